"""Bit-exact reference semantics for the sparse-dense matrix product.

All arithmetic is integer: 16-bit operands, products widened to 32 bits,
and 32-bit two's-complement wraparound on accumulation.  Wraparound keeps
integer addition associative, so any tiling or accumulation order produces
the same result; numpy's int32 matmul and dtype-pinned reductions implement
exactly these semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .formats import ACC_DTYPE, PackedSparseMatrix, _check_dense_values

Entry = tuple[int, int]


class DimensionMismatchError(ValueError):
    """Operand shapes do not describe a valid matrix product."""


@dataclass(frozen=True)
class GemmDims:
    """Problem size: C[r x cdim] = A[r x kdim] * B[kdim x cdim]."""

    r: int
    kdim: int
    cdim: int

    def __post_init__(self) -> None:
        if min(self.r, self.kdim, self.cdim) < 1:
            raise ValueError(f"GEMM dims must be positive, got {self}")

    def __str__(self) -> str:
        return f"{self.r}x{self.kdim}x{self.cdim}"

    @classmethod
    def parse(cls, text: str) -> "GemmDims":
        """Parse ``"RxKxC"`` notation, e.g. ``"64x128x64"``."""
        try:
            r, k, c = (int(part) for part in text.lower().split("x"))
            return cls(r, k, c)
        except ValueError as exc:
            raise ValueError(f"bad GEMM dims {text!r}, expected RxKxC") from exc


@dataclass(frozen=True)
class TilePlan:
    """Ceil-divided coverage of a GEMM by (m_tile x c_tile) operand tiles."""

    m_tile: int
    c_tile: int
    k_tiles: int
    c_tiles: int

    def k_range(self, kt: int, kdim: int) -> tuple[int, int]:
        return kt * self.m_tile, min((kt + 1) * self.m_tile, kdim)

    def c_range(self, ct: int, cdim: int) -> tuple[int, int]:
        return ct * self.c_tile, min((ct + 1) * self.c_tile, cdim)


def plan_tiles(dims: GemmDims, m: int, c: int) -> TilePlan:
    """Tile counts for a B operand of m rows by c columns per tile."""
    if m < 1 or c < 1:
        raise ValueError("tile sizes must be positive")
    return TilePlan(m, c, math.ceil(dims.kdim / m), math.ceil(dims.cdim / c))


def dense_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Ground-truth dense product: int16 operands, wrapping int32 output."""
    a = _check_dense_values(a)
    b = _check_dense_values(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatchError(
            f"inner dimensions differ: A is {a.shape}, B is {b.shape}"
        )
    return np.matmul(a.astype(ACC_DTYPE), b.astype(ACC_DTYPE))


def rowwise_sparse_matmul(a: PackedSparseMatrix, b: np.ndarray) -> np.ndarray:
    """Row-wise product: each output row is the sum of value-scaled B rows.

    For row i with packed entries (v, j), output row i is sum_j v * B[j, :].
    Equals ``dense_matmul(unpack(a), b)`` exactly.
    """
    b = _check_dense_values(b)
    if a.cols != b.shape[0]:
        raise DimensionMismatchError(
            f"A has {a.cols} columns but B has {b.shape[0]} rows"
        )
    b32 = b.astype(ACC_DTYPE)
    out = np.zeros((a.rows, b.shape[1]), dtype=ACC_DTYPE)
    for i, entries in enumerate(a.row_entries):
        if not entries:
            continue
        values = np.array([v for v, _ in entries], dtype=ACC_DTYPE)
        cols = [c for _, c in entries]
        if cols[-1] >= b.shape[0]:
            raise DimensionMismatchError(f"row {i}: col_idx {cols[-1]} out of range")
        out[i] = (values[:, None] * b32[cols, :]).sum(axis=0, dtype=ACC_DTYPE)
    return out


def slice_row_for_ktile(
    row_entries: tuple[Entry, ...], kt: int, m: int
) -> tuple[Entry, ...]:
    """Entries of one row falling in k-tile ``kt``, rebased to [0, m)."""
    lo, hi = kt * m, (kt + 1) * m
    return tuple((v, c - lo) for v, c in row_entries if lo <= c < hi)
