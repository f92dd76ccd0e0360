"""Text serialization for matrix fixtures.

Grammar (whitespace-separated, one matrix per file):

    sparse <rows> <cols>
    <col>:<value> <col>:<value> ...     # one line per row, ascending col;
    ...                                 # an empty line is an empty row

    dense <rows> <cols>
    <v> <v> ...                         # rows*cols row-major values; line
    ...                                 # breaks are not significant

Values are int16; sparse entries must be non-zero.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .formats import VALUE_DTYPE, PackedSparseMatrix


def dump_matrix(mat: PackedSparseMatrix | np.ndarray) -> str:
    """Serialize a packed-sparse or dense int16 matrix to fixture text."""
    if isinstance(mat, PackedSparseMatrix):
        lines = [f"sparse {mat.rows} {mat.cols}"]
        for entries in mat.row_entries:
            lines.append(" ".join(f"{col}:{value}" for value, col in entries))
    else:
        mat = np.asarray(mat)
        lines = [f"dense {mat.shape[0]} {mat.shape[1]}"]
        for row in mat:
            lines.append(" ".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> PackedSparseMatrix | np.ndarray:
    """Parse fixture text into a PackedSparseMatrix or a dense int16 array."""
    lines = text.splitlines()
    if not lines:
        raise ValueError("empty matrix file")
    header = lines[0].split()
    if len(header) != 3 or header[0] not in ("sparse", "dense"):
        raise ValueError(f"bad header {lines[0]!r}, expected 'sparse|dense <rows> <cols>'")
    kind, rows, cols = header[0], int(header[1]), int(header[2])
    if kind == "sparse":
        if len(lines) - 1 < rows:
            raise ValueError(f"sparse matrix needs {rows} row lines, found {len(lines) - 1}")
        row_entries = []
        for i in range(rows):
            entries = []
            for token in lines[1 + i].split():
                col_str, _, value_str = token.partition(":")
                if not value_str:
                    raise ValueError(f"row {i}: bad entry {token!r}, expected col:value")
                entries.append((int(value_str), int(col_str)))
            row_entries.append(tuple(entries))
        return PackedSparseMatrix(rows, cols, tuple(row_entries))
    values = " ".join(lines[1:]).split()
    if len(values) != rows * cols:
        raise ValueError(f"dense matrix needs {rows * cols} values, found {len(values)}")
    data = np.array([int(v) for v in values], dtype=np.int64)
    if data.min(initial=0) < -32768 or data.max(initial=0) > 32767:
        raise ValueError("dense matrix value outside int16 range")
    return data.astype(VALUE_DTYPE).reshape(rows, cols)


def save_matrix(path: str | Path, mat: PackedSparseMatrix | np.ndarray) -> None:
    Path(path).write_text(dump_matrix(mat))


def load_matrix(path: str | Path) -> PackedSparseMatrix | np.ndarray:
    return parse_matrix(Path(path).read_text())
