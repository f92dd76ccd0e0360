"""Row-wise N:M structured-sparse matrix format.

An N:M pattern allows at most ``n`` non-zero elements in every aligned block
of ``m`` consecutive columns of a row.  Blocks start at column 0 and repeat
every ``m`` columns; a trailing partial block (when the column count is not a
multiple of ``m``) is checked against the same ``n``.

Sparse matrices are stored packed: per row, an ordered list of
``(value, col_idx)`` pairs holding only the non-zero values and their column
indexes in the full logical row.  Dense matrices are plain numpy arrays,
``int16`` for inputs/weights and ``int32`` for accumulated outputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

VALUE_DTYPE = np.int16
ACC_DTYPE = np.int32

# Generation range for synthetic values; keeps long int32 accumulations far
# from the wraparound point in ordinary tests.
VALUE_LO = -128
VALUE_HI = 127


@dataclass(frozen=True)
class SparsityPattern:
    """At most ``n`` non-zeros per aligned block of ``m`` consecutive columns."""

    n: int
    m: int

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ValueError(f"pattern {self.n}:{self.m} must have positive n and m")
        if self.n > self.m:
            raise ValueError(f"pattern {self.n}:{self.m} needs n <= m")

    def __str__(self) -> str:
        return f"{self.n}:{self.m}"

    @classmethod
    def parse(cls, text: str) -> "SparsityPattern":
        """Parse ``"N:M"`` notation, e.g. ``"8:128"``."""
        try:
            n_str, m_str = text.split(":")
            return cls(int(n_str), int(m_str))
        except ValueError as exc:
            raise ValueError(f"bad sparsity pattern {text!r}, expected N:M") from exc


@dataclass(frozen=True)
class PackedSparseMatrix:
    """Packed non-zero representation of a row-sparse matrix.

    ``row_entries[i]`` is the ordered tuple of ``(value, col_idx)`` pairs for
    row ``i``: column indexes strictly increasing, every value non-zero.
    """

    rows: int
    cols: int
    row_entries: tuple[tuple[tuple[int, int], ...], ...]

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be positive")
        if len(self.row_entries) != self.rows:
            raise ValueError(f"expected {self.rows} rows, got {len(self.row_entries)}")
        for i, entries in enumerate(self.row_entries):
            prev = -1
            for value, col in entries:
                if value == 0:
                    raise ValueError(f"row {i}: packed entry with zero value at col {col}")
                if not -32768 <= value <= 32767:
                    raise ValueError(f"row {i}: value {value} outside int16 range")
                if col <= prev:
                    raise ValueError(f"row {i}: column indexes not strictly increasing")
                if col >= self.cols:
                    raise ValueError(f"row {i}: col_idx {col} >= cols {self.cols}")
                prev = col

    @property
    def nnz(self) -> int:
        return sum(len(entries) for entries in self.row_entries)


def validate_pattern(a: PackedSparseMatrix, p: SparsityPattern) -> bool:
    """True iff every aligned m-wide block of every row holds at most n entries."""
    for entries in a.row_entries:
        counts: dict[int, int] = {}
        for _, col in entries:
            block = col // p.m
            counts[block] = counts.get(block, 0) + 1
            if counts[block] > p.n:
                return False
    return True


def pack(dense: np.ndarray) -> PackedSparseMatrix:
    """Pack a dense int16 matrix, dropping zeros and keeping column indexes."""
    dense = _check_dense_values(dense)
    rows_out = []
    for row in dense:
        cols = np.nonzero(row)[0]
        rows_out.append(tuple((int(row[c]), int(c)) for c in cols))
    return PackedSparseMatrix(dense.shape[0], dense.shape[1], tuple(rows_out))


def unpack(a: PackedSparseMatrix) -> np.ndarray:
    """Inverse of :func:`pack`: dense int16 matrix with zeros elsewhere."""
    dense = np.zeros((a.rows, a.cols), dtype=VALUE_DTYPE)
    for i, entries in enumerate(a.row_entries):
        for value, col in entries:
            dense[i, col] = value
    return dense


def prune_to_pattern(dense: np.ndarray, p: SparsityPattern) -> PackedSparseMatrix:
    """Magnitude-prune each aligned block to the pattern limit, then pack.

    Within each m-wide block of each row the ``p.n`` largest-magnitude values
    survive; ties keep the lower column index.  Surviving entries are taken
    from the input unchanged, so the result always validates against ``p``.
    """
    dense = _check_dense_values(dense)
    kept = np.zeros_like(dense)
    mags = np.abs(dense.astype(np.int64))
    rows, cols = dense.shape
    for start in range(0, cols, p.m):
        stop = min(start + p.m, cols)
        block_mags = mags[:, start:stop]
        # Stable argsort on negated magnitude: equal magnitudes stay in
        # column order, so the lower index wins the tie.
        order = np.argsort(-block_mags, axis=1, kind="stable")[:, : p.n]
        for i in range(rows):
            sel = start + order[i]
            kept[i, sel] = dense[i, sel]
    return pack(kept)


def random_sparse(
    rows: int, cols: int, p: SparsityPattern, seed: int
) -> PackedSparseMatrix:
    """Deterministic worst-case-density random matrix for a pattern.

    Every full block gets exactly ``p.n`` non-zeros at uniform positions; a
    trailing partial block of width w gets ``min(p.n, w)``.  Values are drawn
    uniformly from [-128, 127] excluding zero.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = np.random.default_rng(seed)
    blocks = []
    for start in range(0, cols, p.m):
        width = min(p.m, cols - start)
        count = min(p.n, width)
        # rank iid uniforms per row: a uniform random count-subset of the block
        scores = rng.random((rows, width))
        positions = np.sort(np.argsort(scores, axis=1)[:, :count], axis=1) + start
        blocks.append((positions.tolist(), _random_values(rng, (rows, count)).tolist()))
    rows_out = []
    for i in range(rows):
        entries = []
        for positions, values in blocks:
            entries.extend(zip(values[i], positions[i]))
        rows_out.append(tuple(entries))
    return PackedSparseMatrix(rows, cols, tuple(rows_out))


def random_dense(rows: int, cols: int, seed: int) -> np.ndarray:
    """Deterministic dense int16 matrix with values in [-128, 127]."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = np.random.default_rng(seed)
    return rng.integers(VALUE_LO, VALUE_HI + 1, size=(rows, cols)).astype(VALUE_DTYPE)


def _random_values(rng: np.random.Generator, shape) -> np.ndarray:
    # 255 equally likely non-zero values: [0,127] -> [-128,-1], [128,254] -> [1,127]
    draws = rng.integers(0, 255, size=shape)
    return np.where(draws < 128, draws - 128, draws - 127)


def _check_dense_values(dense: np.ndarray) -> np.ndarray:
    dense = np.asarray(dense)
    if dense.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {dense.shape}")
    if dense.dtype != VALUE_DTYPE:
        raise ValueError(f"expected int16 values, got dtype {dense.dtype}")
    return dense
