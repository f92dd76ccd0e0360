"""Functional and cycle-level model of a decoupled sparse-dense GEMM engine."""

from .baselines import SystolicConfig, systolic_cycles
from .engine import (
    CycleReport,
    DemmConfig,
    DemmEngine,
    EngineStateError,
    PipelineTrace,
    reconfigure_density_check,
    run_gemm,
)
from .formats import (
    PackedSparseMatrix,
    SparsityPattern,
    pack,
    prune_to_pattern,
    random_dense,
    random_sparse,
    unpack,
    validate_pattern,
)
from .gemm import (
    DimensionMismatchError,
    GemmDims,
    TilePlan,
    dense_matmul,
    plan_tiles,
    rowwise_sparse_matmul,
    slice_row_for_ktile,
)
from .workloads import (
    GemmProblem,
    LayerFileError,
    LayerSpec,
    load_layer_file,
    lower_layer,
    random_overflow_sparse,
    save_layer_file,
    synthesize_problem,
)

__all__ = [
    "CycleReport",
    "DemmConfig",
    "DemmEngine",
    "DimensionMismatchError",
    "EngineStateError",
    "GemmDims",
    "GemmProblem",
    "LayerFileError",
    "LayerSpec",
    "PackedSparseMatrix",
    "PipelineTrace",
    "SparsityPattern",
    "SystolicConfig",
    "TilePlan",
    "dense_matmul",
    "load_layer_file",
    "lower_layer",
    "pack",
    "plan_tiles",
    "prune_to_pattern",
    "random_dense",
    "random_overflow_sparse",
    "random_sparse",
    "reconfigure_density_check",
    "rowwise_sparse_matmul",
    "run_gemm",
    "save_layer_file",
    "slice_row_for_ktile",
    "synthesize_problem",
    "systolic_cycles",
    "unpack",
    "validate_pattern",
]

__version__ = "0.1.0"
