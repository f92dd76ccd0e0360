"""CNN layer shapes and their lowering to sparse-dense GEMM problems.

Convolutions lower through im2col: the weight operand becomes an
``out_channels x (in_channels * kh * kw)`` matrix and the activation patches
an ``(in_channels * kh * kw) x (out_h * out_w)`` matrix.  Fully-connected
layers are the degenerate 1x1 case with the batch size as the streamed
dimension.

Weights are synthesized to a requested sparsity pattern and activations are
random dense values: latency depends only on the shapes and the weight
sparsity structure, never on activation contents, so no real inference is
run.  An overflow mode instead draws per-block non-zero counts from a
Poisson distribution (configurable mean per block) to emulate
unstructured-pruned rows that exceed the pattern and must take extra issue
cycles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .formats import (
    PackedSparseMatrix,
    SparsityPattern,
    random_dense,
    random_sparse,
    _random_values,
)
from .gemm import GemmDims

LAYER_KINDS = ("conv", "fc")

_LAYER_FIELDS = {
    "name": str,
    "kind": str,
    "in_channels": int,
    "out_channels": int,
    "kernel_h": int,
    "kernel_w": int,
    "out_h": int,
    "out_w": int,
    "stride": int,
}
_FC_DEFAULTED = {"kernel_h": 1, "kernel_w": 1, "out_h": 1, "out_w": 1, "stride": 1}


class LayerFileError(ValueError):
    """Layer shape file could not be parsed or validated."""


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_channels: int
    out_channels: int
    kernel_h: int = 1
    kernel_w: int = 1
    out_h: int = 1
    out_w: int = 1
    stride: int = 1

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"layer {self.name!r}: kind must be one of {LAYER_KINDS}")
        for field in ("in_channels", "out_channels", "kernel_h", "kernel_w",
                      "out_h", "out_w", "stride"):
            if getattr(self, field) < 1:
                raise ValueError(f"layer {self.name!r}: {field} must be positive")


@dataclass(frozen=True)
class GemmProblem:
    layer: LayerSpec
    dims: GemmDims
    a: PackedSparseMatrix
    b: np.ndarray

    def __post_init__(self) -> None:
        if (self.a.rows, self.a.cols) != (self.dims.r, self.dims.kdim):
            raise ValueError("weight matrix does not match the lowered dims")
        if self.b.shape != (self.dims.kdim, self.dims.cdim):
            raise ValueError("activation matrix does not match the lowered dims")


def lower_layer(spec: LayerSpec, batch: int = 1) -> GemmDims:
    """GEMM dims of a layer; ``batch`` is the streamed dim for fc layers."""
    if spec.kind == "fc":
        return GemmDims(spec.out_channels, spec.in_channels, batch)
    return GemmDims(
        spec.out_channels,
        spec.in_channels * spec.kernel_h * spec.kernel_w,
        spec.out_h * spec.out_w,
    )


def synthesize_problem(
    spec: LayerSpec,
    pattern: SparsityPattern,
    seed: int,
    batch: int = 1,
    overflow_mean: float | None = None,
) -> GemmProblem:
    """Deterministic GEMM problem for a layer at a weight sparsity pattern.

    With ``overflow_mean`` set, weights come from the Poisson overflow
    generator (block width ``pattern.m``) instead of exact-density
    ``random_sparse``.
    """
    dims = lower_layer(spec, batch)
    if overflow_mean is None:
        a = random_sparse(dims.r, dims.kdim, pattern, _child_seed(seed, spec.name, 0))
    else:
        a = random_overflow_sparse(
            dims.r, dims.kdim, pattern.m, overflow_mean, _child_seed(seed, spec.name, 0)
        )
    b = random_dense(dims.kdim, dims.cdim, _child_seed(seed, spec.name, 1))
    return GemmProblem(spec, dims, a, b)


def random_overflow_sparse(
    rows: int, cols: int, m: int, mean: float, seed: int
) -> PackedSparseMatrix:
    """Sparse matrix whose per-block non-zero count is Poisson(mean), capped.

    The mean applies to a full m-wide block; partial trailing blocks scale
    it by their width.  Rows may exceed any n:m claim, which is the point.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if mean < 0:
        raise ValueError("mean must be non-negative")
    rng = np.random.default_rng(seed)
    rows_out = []
    for _ in range(rows):
        entries = []
        for start in range(0, cols, m):
            width = min(m, cols - start)
            count = min(int(rng.poisson(mean * width / m)), width)
            if not count:
                continue
            positions = np.sort(rng.choice(width, size=count, replace=False))
            values = _random_values(rng, count)
            entries.extend((int(v), start + int(p)) for v, p in zip(values, positions))
        rows_out.append(tuple(entries))
    return PackedSparseMatrix(rows, cols, tuple(rows_out))


# ---------------------------------------------------------------------------
# Layer shape files
# ---------------------------------------------------------------------------

def load_layer_file(path: str | Path) -> list[LayerSpec]:
    """Load and validate a JSON layer shape file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise LayerFileError(f"cannot read layer file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayerFileError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    layers = doc.get("layers") if isinstance(doc, dict) else doc
    if not isinstance(layers, list) or not layers:
        raise LayerFileError(f"{path}: expected a non-empty 'layers' list")
    specs = []
    for i, obj in enumerate(layers):
        try:
            specs.append(layer_from_dict(obj))
        except (TypeError, ValueError) as exc:
            raise LayerFileError(f"{path}: layer {i}: {exc}") from exc
    return specs


def layer_from_dict(obj: dict) -> LayerSpec:
    if not isinstance(obj, dict):
        raise ValueError(f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(_LAYER_FIELDS)
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)}")
    merged = dict(obj)
    if merged.get("kind") == "fc":
        for field, default in _FC_DEFAULTED.items():
            merged.setdefault(field, default)
    missing = set(_LAYER_FIELDS) - set(merged)
    if missing:
        raise ValueError(f"missing fields {sorted(missing)}")
    for field, typ in _LAYER_FIELDS.items():
        if not isinstance(merged[field], typ) or isinstance(merged[field], bool):
            raise ValueError(f"field {field!r} must be {typ.__name__}")
    return LayerSpec(**merged)


def serialize_layers(specs: list[LayerSpec], name: str = "", notes: str = "") -> str:
    doc = {
        "schema_version": 1,
        "name": name,
        "notes": notes,
        "layers": [asdict(spec) for spec in specs],
    }
    return json.dumps(doc, indent=2) + "\n"


def save_layer_file(path: str | Path, specs: list[LayerSpec], **meta: str) -> None:
    Path(path).write_text(serialize_layers(specs, **meta))


def packaged_layer_file(name: str) -> Path | None:
    """Resolve a shipped shape file (e.g. ``resnet50`` or ``resnet50.json``)."""
    stem = name.removesuffix(".json")
    candidate = Path(__file__).parent / "data" / f"{stem}.json"
    return candidate if candidate.is_file() else None


def _child_seed(seed: int, name: str, stream: int) -> int:
    digest = np.random.SeedSequence(
        [seed, stream, *name.encode("utf-8")]
    ).generate_state(1)[0]
    return int(digest)
