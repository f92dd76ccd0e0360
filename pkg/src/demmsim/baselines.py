"""Analytical latency models of conventional systolic arrays.

These are generic first-order comparison points, NOT cycle-faithful models
of any published accelerator; every report derived from them must carry the
``approximate_baseline`` tag.

Derivation of the cycle formulas (standard systolic skew arithmetic):

* weight-stationary: the PE grid holds a stationary operand tile covering a
  ``rows``-deep slice of the inner dimension by a ``cols``-wide slice of the
  output rows, so a problem needs ``ceil(kdim/rows) * ceil(r/cols)`` folds.
  Per fold: the tile fills through the top edge one row per cycle
  (``rows`` cycles), all ``cdim`` output columns stream through once
  (``cdim`` cycles), and the last input needs ``rows + cols - 1`` further
  cycles to traverse the diagonal and exit (drain).
* output-stationary: the grid accumulates a ``rows x cols`` output tile in
  place over ``ceil(r/rows) * ceil(cdim/cols)`` folds; each fold streams
  the ``kdim`` reduction steps plus the same ``rows + cols - 1`` skew.

Structured sparsity is modeled as ideal index-matched skipping: the
effective inner dimension shrinks to ``ceil(kdim / sparsity_speedup)``
(speedup m/n for an n:m pattern) before folds are counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import CycleReport
from .gemm import GemmDims

WEIGHT_STATIONARY = "weight-stationary"
OUTPUT_STATIONARY = "output-stationary"

# Stamped on every report row built from this module.
APPROXIMATE_BASELINE = True


@dataclass(frozen=True)
class SystolicConfig:
    rows: int
    cols: int
    dataflow: str = WEIGHT_STATIONARY
    sparsity_speedup: float = 1.0

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"PE grid must be positive, got {self.rows}x{self.cols}")
        if self.dataflow not in (WEIGHT_STATIONARY, OUTPUT_STATIONARY):
            raise ValueError(f"unknown dataflow {self.dataflow!r}")
        if self.sparsity_speedup < 1:
            raise ValueError("sparsity_speedup must be >= 1")

    @property
    def macs(self) -> int:
        return self.rows * self.cols


def systolic_cycles(dims: GemmDims, cfg: SystolicConfig) -> CycleReport:
    """Fold-counted latency of a GEMM on the modeled array."""
    kdim_eff = math.ceil(dims.kdim / cfg.sparsity_speedup)
    skew = cfg.rows + cfg.cols - 1
    if cfg.dataflow == WEIGHT_STATIONARY:
        folds = math.ceil(kdim_eff / cfg.rows) * math.ceil(dims.r / cfg.cols)
        fill, stream = cfg.rows, dims.cdim
    else:
        folds = math.ceil(dims.r / cfg.rows) * math.ceil(dims.cdim / cfg.cols)
        fill, stream = 0, kdim_eff
    preload = folds * fill
    compute = folds * stream
    drain = folds * skew
    total = preload + compute + drain
    useful = dims.r * kdim_eff * dims.cdim
    return CycleReport(
        preload_cycles=preload,
        compute_cycles=compute,
        drain_cycles=drain,
        total_cycles=total,
        issued_row_ops=0,
        useful_macs=useful,
        mac_utilization=useful / (total * cfg.macs),
    )
