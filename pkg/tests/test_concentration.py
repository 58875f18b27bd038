"""Double-maximum concentration witnesses (trend checks at small scale)."""

import numpy as np
import pytest

from maxbv.concentration import (
    double_max_ladder,
    double_max_witness,
    excess_conditional,
    excess_conditional_ladder,
    unique_max_check,
)
from maxbv.errors import InsufficientSamplesError
from maxbv.paths import TimeGrid
from maxbv.sampling import SeedSpec

GRID = TimeGrid(500, 1.0)
SEED = SeedSpec(8080, 0)
HALF = GRID.n // 2


class TestUniqueMax:
    def test_no_exact_ties_and_monotone_fractions(self):
        stats = unique_max_check(GRID, 100_000, SEED)
        assert stats.ties == 0
        assert stats.samples == 100_000
        fr = stats.fractions
        assert all(a > b for a, b in zip(fr, fr[1:]))

    def test_small_gap_scaling_below_one(self):
        stats = unique_max_check(GRID, 100_000, SEED)
        for a, b in zip(stats.fractions, stats.fractions[1:]):
            if a > 0:
                assert b / a < 1.0

    def test_custom_thresholds(self):
        stats = unique_max_check(GRID, 10_000, SEED, thresholds=(0.5, 0.01))
        assert stats.thresholds == (0.5, 0.01)


class TestExcessConditional:
    def test_ladder_strictly_decreasing(self):
        ests = excess_conditional_ladder(
            HALF, 0.02, [0.2, 0.1, 0.05, 0.025], GRID, 200_000, SEED
        )
        means = [e.mean for e in ests]
        assert all(a > b for a, b in zip(means, means[1:]))
        assert all(e.samples == ests[0].samples for e in ests)

    def test_saturates_for_large_delta(self):
        est = excess_conditional(HALF, 0.05, 50.0, GRID, 50_000, SEED)
        assert est.mean == 1.0

    def test_window_stability_when_eps_halves(self):
        a = excess_conditional(HALF, 0.04, 0.05, GRID, 400_000, SeedSpec(8080, 1))
        b = excess_conditional(HALF, 0.02, 0.05, GRID, 400_000, SeedSpec(8080, 2))
        comb = (a.std_error**2 + b.std_error**2) ** 0.5
        assert abs(a.mean - b.mean) <= 3 * comb + 0.01

    def test_insufficient_conditioning_flagged(self):
        with pytest.raises(InsufficientSamplesError):
            excess_conditional(HALF, 1e-7, 0.05, GRID, 2_000, SEED)

    def test_interior_node_required(self):
        with pytest.raises(ValueError):
            excess_conditional(0, 0.05, 0.05, GRID, 1_000, SEED)


class TestDoubleMax:
    def test_ladder_trend_and_separation(self):
        summaries = double_max_ladder(
            HALF, [0.1, 0.4, 1e9], 0.05, GRID, 300_000, SEED
        )
        fractions = [s.both_fraction for s in summaries]
        # ascending eps: tighter conditioning concentrates harder
        assert fractions[0] > fractions[1] > fractions[2]
        assert all(s.argmax_separated for s in summaries)

    def test_conditioned_beats_unconditioned(self):
        summaries = double_max_ladder(
            HALF, [0.1, 1e9], 0.05, GRID, 300_000, SeedSpec(8080, 3)
        )
        tight, base = summaries
        comb = (tight.std_error**2 + base.std_error**2) ** 0.5
        assert tight.both_fraction - base.both_fraction > 3 * comb

    def test_witness_scatter_reservoir(self):
        s = double_max_witness(HALF, 0.1, 0.05, GRID, 50_000, SEED, scatter_cap=64)
        assert s.scatter.shape[1] == 2
        assert 0 < len(s.scatter) <= 64
        assert (s.scatter >= 0).all()

    def test_deterministic_across_workers(self):
        a = double_max_witness(HALF, 0.1, 0.05, GRID, 50_000, SEED, workers=1)
        b = double_max_witness(HALF, 0.1, 0.05, GRID, 50_000, SEED, workers=4)
        assert a.both_fraction == b.both_fraction
        assert a.conditioned == b.conditioned
        assert np.array_equal(a.scatter, b.scatter)
