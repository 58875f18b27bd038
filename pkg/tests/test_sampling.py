"""Sampler laws and the deterministic Monte Carlo driver contract."""

import numpy as np
import pytest

from maxbv.errors import NonFiniteStatisticError
from maxbv.paths import TimeGrid
from maxbv.sampling import (
    MCEstimate,
    SeedSpec,
    bridge_sums_batch,
    mc_collect,
    mc_run,
    pooled_estimate,
    sample_bridge,
    sample_brownian,
    sample_walk,
    stream_counts,
    walk_sums_batch,
)

SEED = SeedSpec(777, 0)


class TestSeedSpec:
    def test_streams_differ(self):
        a = SeedSpec(1, 0).generator().standard_normal(4)
        b = SeedSpec(1, 1).generator().standard_normal(4)
        assert not np.array_equal(a, b)

    def test_negative_stream_rejected(self):
        with pytest.raises(ValueError):
            SeedSpec(1, -1)


class TestWalk:
    def test_deterministic(self):
        w1, w2 = sample_walk(16, SEED), sample_walk(16, SEED)
        assert np.array_equal(w1.increments, w2.increments)
        assert np.array_equal(w1.partial_sums, w2.partial_sums)

    def test_partial_sums_consistent(self):
        w = sample_walk(32, SEED)
        assert w.partial_sums[0] == 0.0
        np.testing.assert_array_equal(np.diff(w.partial_sums), w.increments)

    def test_moments(self):
        est = mc_run(lambda rng, c: rng.standard_normal(c), 100_000, SEED)
        assert est.within(0.0)
        est2 = mc_run(lambda rng, c: rng.standard_normal(c) ** 2, 100_000, SEED)
        assert est2.within(1.0)

    def test_endpoint_sign_probability(self):
        est = mc_run(
            lambda rng, c: (walk_sums_batch(rng, c, 10)[:, -1] <= 0).astype(float),
            100_000,
            SEED,
        )
        assert est.within(0.5)

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            sample_walk(0, SEED)


class TestBrownian:
    def test_equals_scaled_walk_bitwise(self):
        grid = TimeGrid(64, 2.0)
        path = sample_brownian(grid, SEED)
        walk = sample_walk(64, SEED)
        assert np.array_equal(path.values, np.sqrt(grid.step) * walk.partial_sums)

    def test_terminal_variance(self):
        grid = TimeGrid(100, 4.0)

        def statistic(rng, c):
            sums = walk_sums_batch(rng, c, grid.n)
            return grid.step * sums[:, -1] ** 2

        est = mc_run(statistic, 100_000, SEED)
        assert est.within(4.0)

    def test_reflection_principle_tail(self):
        from scipy.stats import norm

        grid = TimeGrid(1000, 1.0)

        def statistic(rng, c):
            sums = walk_sums_batch(rng, c, grid.n)
            return (np.sqrt(grid.step) * sums.max(axis=1) > 0.5).astype(float)

        est = mc_run(statistic, 100_000, SEED)
        ref = 2 * norm.sf(0.5)
        # discrete monitoring undershoots the continuous maximum
        assert est.within(ref, slack=0.02)


class TestBridge:
    def test_endpoint_exact_zero_and_consistency(self):
        for n in (1, 2, 17):
            b = sample_bridge(n, SEED)
            assert b.partial_sums[-1] == 0.0
            np.testing.assert_array_equal(np.diff(b.partial_sums), b.increments)

    def test_raw_projection_kills_sum(self):
        rng = SeedSpec(5, 1).generator()
        x = rng.standard_normal(50)
        inc = x - x.mean()
        assert abs(inc.sum()) <= 1e-12

    def test_n1_bridge_is_zero(self):
        b = sample_bridge(1, SEED)
        assert np.array_equal(b.partial_sums, [0.0, 0.0])

    def test_covariance_oracle(self):
        # Cov(W_j, W_k) = min(j,k) - j*k/n for the conditioned walk
        n, j, k = 10, 3, 7

        def statistic(rng, c):
            sums = bridge_sums_batch(rng, c, n)
            return sums[:, j] * sums[:, k]

        est = mc_run(statistic, 200_000, SEED)
        assert est.within(min(j, k) - j * k / n)

    def test_cyclic_shift_invariance_in_law(self):
        # mean-subtracted increments are exchangeable under rotation: the
        # statistic sum of squares is invariant pathwise, the law of a fixed
        # coordinate matches across positions statistically
        def statistic(rng, c):
            sums = bridge_sums_batch(rng, c, 8)
            inc = np.diff(sums, axis=1)
            return inc[:, 0] ** 2 - inc[:, 5] ** 2

        est = mc_run(statistic, 100_000, SEED)
        assert est.within(0.0)


class TestMCRun:
    def test_worker_count_bit_identical(self):
        def statistic(rng, c):
            return (walk_sums_batch(rng, c, 5)[:, 1:].max(axis=1) <= 0).astype(float)

        runs = [mc_run(statistic, 30_000, SEED, workers=w) for w in (1, 2, 8)]
        assert runs[0] == runs[1] == runs[2]

    def test_constant_statistic_zero_stderr(self):
        est = mc_run(lambda rng, c: np.ones(c), 10_000, SEED)
        assert est.mean == 1.0
        assert est.std_error == 0.0

    def test_indicator_half(self):
        est = mc_run(
            lambda rng, c: (rng.standard_normal(c) <= 0).astype(float), 100_000, SEED
        )
        assert est.within(0.5)

    def test_nonfinite_statistic_aborts_with_seed(self):
        def statistic(rng, c):
            vals = rng.standard_normal(c)
            vals[0] = np.nan
            return vals

        with pytest.raises(NonFiniteStatisticError) as err:
            mc_run(statistic, 1000, SeedSpec(31, 4))
        assert err.value.master_seed == 31
        assert "31/4" in str(err.value)

    def test_sample_count_preserved(self):
        for samples in (2, 63, 64, 65, 1000):
            est = mc_run(lambda rng, c: np.ones(c), samples, SEED)
            assert est.samples == samples

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            mc_run(lambda rng, c: np.ones(c), 1, SEED)

    def test_stream_plan_deterministic(self):
        counts = stream_counts(1000)
        assert counts.sum() == 1000
        assert counts.max() - counts.min() <= 1

    def test_mc_collect_draws_chunking_independent(self):
        # the drawn sample values do not depend on the chunk size; only the
        # fixed-default summation grouping does
        def task(rng, count):
            return [rng.standard_normal(count)]

        cat = lambda a, b: a + b
        a = np.concatenate(mc_collect(task, 3_000, SEED, combine=cat, chunk_size=128))
        b = np.concatenate(mc_collect(task, 3_000, SEED, combine=cat, chunk_size=1024))
        assert np.array_equal(a, b)

    def test_mc_run_repeatable_exactly(self):
        stat = lambda rng, c: rng.standard_normal(c)
        assert mc_run(stat, 10_000, SEED) == mc_run(stat, 10_000, SEED)


class TestPooling:
    def test_pooled_mean_and_se(self):
        e1 = MCEstimate(1.0, 0.1, 100, SEED)
        e2 = MCEstimate(3.0, 0.1, 100, SEED)
        pooled = pooled_estimate([e1, e2])
        assert pooled.mean == 2.0
        assert pooled.std_error == pytest.approx(np.sqrt(0.02) / 2)
        assert pooled.samples == 200
