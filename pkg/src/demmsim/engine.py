"""Cycle-stepped model of the decoupled sparse-dense multiply engine.

One engine instance owns an m-row by c-column memory block with a single
write port and n independent read ports, n*c multipliers, and c pipelined
n-operand reduction trees.  A dense operand tile is preloaded one row per
cycle through the write port; packed sparse rows are then streamed in, each
non-zero fetching one full memory row through its read port.

Cycle accounting
----------------
* preload: one cycle per tile row actually written.
* compute: a row with e non-zeros occupies the read ports for
  max(1, ceil(e / n)) consecutive issue cycles; an empty row still spends
  one bubble cycle so output rows stream in order.  Rows denser than the
  k*n static pattern bound are legal and simply take more issue cycles.
* drain: the issue cycle applies read addresses; the datapath behind it is
  D = 1 (read) + 1 (multiply) + ceil(log2 n) (reduce) + 1 (accumulate)
  stages deep, so after the last issue the pipeline empties in exactly D
  cycles, charged once per tile.

The time-share factor k is a static capability bound (how dense a claimed
pattern may be, see :func:`reconfigure_density_check`); it does not change
the port-sharing timing mechanism.

Outputs are bit-exact: 16-bit operands, 32-bit wraparound accumulation,
identical to :func:`demmsim.gemm.dense_matmul` on the unpacked operand.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .formats import ACC_DTYPE, VALUE_DTYPE, PackedSparseMatrix, SparsityPattern
from .gemm import DimensionMismatchError, Entry, GemmDims, plan_tiles


class EngineStateError(RuntimeError):
    """Operation not legal in the engine's current phase."""


# (values, tile-local indexes, entry count); arrays are None for empty rows
PreparedRow = tuple[np.ndarray | None, np.ndarray | None, int]

_EMPTY_ROW: PreparedRow = (None, None, 0)


def _prepare_row(entries: Sequence[Entry]) -> PreparedRow:
    e = len(entries)
    if not e:
        return _EMPTY_ROW
    vals = np.fromiter((v for v, _ in entries), dtype=ACC_DTYPE, count=e)
    idx = np.fromiter((c for _, c in entries), dtype=np.intp, count=e)
    return vals, idx, e


@dataclass(frozen=True)
class DemmConfig:
    """Engine instantiation parameters (n read ports, m x c memory, k-share)."""

    n: int
    m: int
    c: int
    k: int

    def __post_init__(self) -> None:
        if min(self.n, self.m, self.c, self.k) < 1:
            raise ValueError(f"all of n, m, c, k must be >= 1, got {self}")
        if self.n > self.m:
            raise ValueError(f"need n <= m, got n={self.n}, m={self.m}")
        if self.k * self.n > self.m:
            raise ValueError(f"need k*n <= m, got k*n={self.k * self.n}, m={self.m}")

    @property
    def multipliers(self) -> int:
        return self.n * self.c

    @property
    def reduction_trees(self) -> int:
        return self.c

    @property
    def reduce_stages(self) -> int:
        return math.ceil(math.log2(self.n)) if self.n > 1 else 0

    @property
    def pipeline_depth(self) -> int:
        """D = read + multiply + reduce stages + accumulate."""
        return 3 + self.reduce_stages

    def __str__(self) -> str:
        return f"demm:{self.n},{self.m},{self.c},{self.k}"

    @classmethod
    def parse(cls, text: str) -> "DemmConfig":
        """Parse ``"N,M,C,k"`` notation, e.g. ``"8,128,64,8"``."""
        try:
            n, m, c, k = (int(part) for part in text.split(","))
            return cls(n, m, c, k)
        except ValueError as exc:
            raise ValueError(f"bad engine config {text!r}, expected N,M,C,k") from exc


@dataclass(frozen=True)
class CycleReport:
    """Timing breakdown of one engine run (or a per-tile fragment of one)."""

    preload_cycles: int
    compute_cycles: int
    drain_cycles: int
    total_cycles: int
    issued_row_ops: int
    useful_macs: int
    mac_utilization: float

    def __post_init__(self) -> None:
        if self.total_cycles != self.preload_cycles + self.compute_cycles + self.drain_cycles:
            raise ValueError("total_cycles must equal preload + compute + drain")
        if not 0.0 <= self.mac_utilization <= 1.0:
            raise ValueError(f"mac_utilization {self.mac_utilization} outside [0, 1]")

    @classmethod
    def tally(
        cls, preload: int, compute: int, drain: int,
        issued: int, useful: int, cfg: DemmConfig,
    ) -> "CycleReport":
        total = preload + compute + drain
        util = useful / (total * cfg.multipliers) if total else 0.0
        return cls(preload, compute, drain, total, issued, useful, util)


class PipelineTrace:
    """Per-cycle event record of one or more engine runs.

    Each cycle has exactly one primary phase event (``preload``, ``issue``
    or ``drain``); when a wave of work flows down the datapath its stage
    occupancy (``read``, ``multiply``, ``reduce<i>``, ``accumulate``) is
    recorded as secondary events.  ``dump()`` emits the documented stable
    format: one line per cycle, ``cycle=<t> stage=<name> detail=<k=v,...>``.
    """

    def __init__(self) -> None:
        self.events: list[tuple[int, str, bool, dict]] = []
        self.context: dict = {}

    def record(self, cycle: int, stage: str, primary: bool, **detail) -> None:
        self.events.append((cycle, stage, primary, {**self.context, **detail}))

    def primary_events(self) -> list[tuple[int, str, dict]]:
        return [(t, s, d) for t, s, p, d in self.events if p]

    def stage_cycles(self, stage: str) -> list[int]:
        return sorted(t for t, s, _, _ in self.events if s == stage)

    def stages_at(self, cycle: int) -> set[str]:
        return {s for t, s, _, _ in self.events if t == cycle}

    def dump(self) -> str:
        lines = []
        for cycle, stage, detail in sorted(self.primary_events(), key=lambda e: e[0]):
            body = ",".join(f"{k}={v}" for k, v in detail.items()) or "-"
            lines.append(f"cycle={cycle} stage={stage} detail={body}")
        return "\n".join(lines) + ("\n" if lines else "")


class DemmEngine:
    """One engine instance: a sequential preload/stream/drain state machine.

    Not safe for concurrent mutation; distinct instances share nothing.
    """

    def __init__(self, cfg: DemmConfig, trace: PipelineTrace | None = None):
        self.cfg = cfg
        self.trace = trace
        self.now = 0
        self._mem32 = np.zeros((cfg.m, cfg.c), dtype=ACC_DTYPE)
        self._width = 0
        self._phase = "idle"
        # issue timestamps still inside the datapath, for drain-trace detail
        self._inflight: deque[int] = deque(maxlen=cfg.pipeline_depth)

    @property
    def memory(self) -> np.ndarray:
        """Current memory contents (m x c, int16 view for inspection)."""
        return self._mem32.astype(VALUE_DTYPE)

    def preload(self, b_tile: np.ndarray) -> int:
        """Write a dense tile one row per cycle; returns the cycles spent."""
        if self._phase == "streaming":
            raise EngineStateError("preload during active compute")
        b_tile = np.asarray(b_tile)
        rows, cols = b_tile.shape
        if rows > self.cfg.m or cols > self.cfg.c:
            raise ValueError(
                f"tile {rows}x{cols} exceeds engine memory {self.cfg.m}x{self.cfg.c}"
            )
        self._mem32[:] = 0
        self._mem32[:rows, :cols] = b_tile
        self._width = cols
        self._phase = "loaded"
        if self.trace is not None:
            for r in range(rows):
                self.trace.record(self.now + r, "preload", True, row=r)
        self.now += rows
        return rows

    def issue_row(
        self, entries: Sequence[Entry], row: int | None = None
    ) -> tuple[np.ndarray, int]:
        """Stream one packed row through the ports.

        Returns the 32-bit output row (tile width) and the issue cycles
        spent: max(1, ceil(len(entries) / n)), each group of up to n
        entries holding the read ports for one cycle.
        """
        return self._issue(*_prepare_row(entries), row)

    def _issue(
        self, vals: np.ndarray | None, idx: np.ndarray | None, e: int,
        row: int | None = None,
    ) -> tuple[np.ndarray, int]:
        if self._phase == "idle":
            raise EngineStateError("issue before preload")
        groups = max(1, math.ceil(e / self.cfg.n))
        if e:
            if int(idx.max()) >= self.cfg.m:
                raise ValueError(
                    f"col_idx {int(idx.max())} exceeds memory depth {self.cfg.m}"
                )
            out = (vals[:, None] * self._mem32[idx, : self._width]).sum(
                axis=0, dtype=ACC_DTYPE
            )
        else:
            out = np.zeros(self._width, dtype=ACC_DTYPE)
        self._phase = "streaming"
        if self.trace is not None:
            self._trace_issue(groups, e, row)
        else:
            self.now += groups
        return out, groups

    def finish_stream(self) -> int:
        """Let the datapath empty after the last issue; returns drain cycles."""
        depth = self.cfg.pipeline_depth
        if self.trace is not None:
            for t in range(self.now, self.now + depth):
                inflight = sum(1 for s in self._inflight if s + depth >= t)
                self.trace.record(t, "drain", True, inflight=inflight)
        self.now += depth
        self._phase = "loaded"
        self._inflight.clear()
        return depth

    def schedule_matrix(
        self, rows: Sequence[Sequence[Entry]], out_block: np.ndarray
    ) -> CycleReport:
        """Issue every row back to back, accumulate into ``out_block``, drain.

        ``out_block`` is an int32 buffer of len(rows) by tile width; partial
        products add into it with wraparound, so k-tile fragments compose
        exactly.  Returns the per-tile timing fragment (no preload).
        """
        return self._schedule([_prepare_row(entries) for entries in rows], out_block)

    def _schedule(self, prepared: list[PreparedRow], out_block: np.ndarray) -> CycleReport:
        compute = 0
        useful = 0
        for i, (vals, idx, e) in enumerate(prepared):
            out_row, cycles = self._issue(vals, idx, e, row=i)
            out_block[i, : self._width] += out_row
            compute += cycles
            useful += e * self._width
        drain = self.finish_stream()
        return CycleReport.tally(0, compute, drain, compute, useful, self.cfg)

    def _trace_issue(self, groups: int, e: int, row: int | None) -> None:
        n = self.cfg.n
        depth = self.cfg.pipeline_depth
        label = {} if row is None else {"row": row}
        for g in range(groups):
            t = self.now
            ports = min(n, e - g * n) if e else 0
            self.trace.record(t, "issue", True, **label, group=f"{g + 1}/{groups}", ports=ports)
            self.trace.record(t + 1, "read", False, **label)
            self.trace.record(t + 2, "multiply", False, **label)
            for s in range(1, self.cfg.reduce_stages + 1):
                self.trace.record(t + 2 + s, f"reduce{s}", False, **label)
            self.trace.record(t + depth, "accumulate", False, **label)
            self._inflight.append(t)
            self.now += 1


def run_gemm(
    a: PackedSparseMatrix,
    b: np.ndarray,
    cfg: DemmConfig,
    trace: PipelineTrace | None = None,
) -> tuple[np.ndarray, CycleReport]:
    """Run a full sparse-dense GEMM on one engine, tiling as needed.

    B is cut into m-row by c-column tiles; each tile is preloaded (no
    overlap with compute), the matching k-slice of every A row is streamed,
    and k-tile partial sums accumulate into the output buffer at zero
    modeled cycle cost.  Output equals the dense oracle bit for bit.
    """
    b = np.asarray(b)
    if a.cols != b.shape[0]:
        raise DimensionMismatchError(
            f"A has {a.cols} columns but B has {b.shape[0]} rows"
        )
    dims = GemmDims(a.rows, a.cols, b.shape[1])
    plan = plan_tiles(dims, cfg.m, cfg.c)
    out = np.zeros((dims.r, dims.cdim), dtype=ACC_DTYPE)
    engine = DemmEngine(cfg, trace)

    # one bucketing pass per row (equivalent to slice_row_for_ktile over every
    # kt), prepared as arrays once and reused by every c-tile
    slices: list[list[PreparedRow]] = [
        [_EMPTY_ROW] * a.rows for _ in range(plan.k_tiles)
    ]
    for i, row in enumerate(a.row_entries):
        buckets: dict[int, list[Entry]] = {}
        for v, c in row:
            kt, local = divmod(c, cfg.m)
            buckets.setdefault(kt, []).append((v, local))
        for kt, entries in buckets.items():
            slices[kt][i] = _prepare_row(entries)

    preload = compute = drain = issued = useful = 0
    for ct in range(plan.c_tiles):
        c_lo, c_hi = plan.c_range(ct, dims.cdim)
        for kt in range(plan.k_tiles):
            k_lo, k_hi = plan.k_range(kt, dims.kdim)
            if trace is not None:
                trace.context = {"kt": kt, "ct": ct}
            preload += engine.preload(b[k_lo:k_hi, c_lo:c_hi])
            frag = engine._schedule(slices[kt], out[:, c_lo:c_hi])
            compute += frag.compute_cycles
            drain += frag.drain_cycles
            issued += frag.issued_row_ops
            useful += frag.useful_macs
    if trace is not None:
        trace.context = {}
    return out, CycleReport.tally(preload, compute, drain, issued, useful, cfg)


def reconfigure_density_check(cfg: DemmConfig, p: SparsityPattern) -> bool:
    """Whether the engine's k-share can serve pattern ``p`` on its m-wide rows.

    The pattern is rescaled to block width m (possible only when p.m divides
    m); the rescaled non-zero budget must fit the k*n port-cycles available
    per row.  An indivisible block width is reported as unsupported.
    """
    if cfg.m % p.m != 0:
        return False
    rescaled = p.n * (cfg.m // p.m)
    return rescaled <= cfg.k * cfg.n
