"""Analytical systolic baselines: fold arithmetic and labeled approximation."""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from demmsim.baselines import (
    APPROXIMATE_BASELINE,
    OUTPUT_STATIONARY,
    WEIGHT_STATIONARY,
    SystolicConfig,
    systolic_cycles,
)
from demmsim.gemm import GemmDims

dims_strategy = st.builds(
    GemmDims, st.integers(1, 300), st.integers(1, 300), st.integers(1, 300)
)


def test_reports_are_flagged_approximate():
    assert APPROXIMATE_BASELINE is True


class TestConfig:
    def test_mac_count(self):
        assert SystolicConfig(32, 16).macs == 512

    @pytest.mark.parametrize("bad", [
        dict(rows=0, cols=16),
        dict(rows=32, cols=16, dataflow="row-stationary"),
        dict(rows=32, cols=16, sparsity_speedup=0.5),
    ])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            SystolicConfig(**bad)


class TestWeightStationary:
    def test_single_fold_breakdown(self):
        # one fold: fill 32 rows, stream the 16 output columns, skew 32+16-1
        report = systolic_cycles(GemmDims(16, 32, 16), SystolicConfig(32, 16))
        assert report.preload_cycles == 32
        assert report.compute_cycles == 16
        assert report.drain_cycles == 47
        assert report.total_cycles == 95

    def test_fold_count_multiplies(self):
        # r=32 needs two 16-wide folds of the stationary tile
        report = systolic_cycles(GemmDims(32, 32, 16), SystolicConfig(32, 16))
        assert report.total_cycles == 2 * 95

    def test_sparsity_speedup_divides_k_folds(self):
        dims = GemmDims(16, 512, 16)
        dense = systolic_cycles(dims, SystolicConfig(32, 16))
        sparse = systolic_cycles(dims, SystolicConfig(32, 16, sparsity_speedup=16))
        assert dense.total_cycles == 16 * 95
        assert sparse.total_cycles == 95

    def test_speedup_one_reproduces_dense_exactly(self):
        dims = GemmDims(100, 333, 57)
        dense = systolic_cycles(dims, SystolicConfig(32, 16))
        tagged = systolic_cycles(dims, SystolicConfig(32, 16, sparsity_speedup=1.0))
        assert dense == tagged

    def test_doubling_cdim_at_most_doubles(self):
        cfg = SystolicConfig(32, 16)
        for r, k, c in [(64, 576, 49), (7, 33, 100), (1, 1, 1)]:
            one = systolic_cycles(GemmDims(r, k, c), cfg).total_cycles
            two = systolic_cycles(GemmDims(r, k, 2 * c), cfg).total_cycles
            assert two <= 2 * one


class TestOutputStationary:
    def test_single_fold_breakdown(self):
        report = systolic_cycles(
            GemmDims(32, 32, 16), SystolicConfig(32, 16, OUTPUT_STATIONARY)
        )
        assert report.preload_cycles == 0
        assert report.compute_cycles == 32
        assert report.drain_cycles == 47
        assert report.total_cycles == 79

    def test_folds_over_output_tiles(self):
        report = systolic_cycles(
            GemmDims(64, 10, 32), SystolicConfig(32, 16, OUTPUT_STATIONARY)
        )
        assert report.total_cycles == 4 * (10 + 47)


@pytest.mark.parametrize("dataflow", [WEIGHT_STATIONARY, OUTPUT_STATIONARY])
@given(dims=dims_strategy)
def test_work_lower_bound(dims, dataflow):
    cfg = SystolicConfig(32, 16, dataflow)
    report = systolic_cycles(dims, cfg)
    assert report.total_cycles >= math.ceil(dims.r * dims.kdim * dims.cdim / cfg.macs)
    assert 0.0 <= report.mac_utilization <= 1.0
