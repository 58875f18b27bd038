"""Exact fluctuation identities and their Monte Carlo counterparts."""

from fractions import Fraction

import pytest

from maxbv.fluctuation import (
    andersen_series_check,
    bridge_argmax_histogram,
    bridge_stay_prob_exact,
    halfline_prob_exact,
    halfline_prob_float,
    mc_bridge_stay_prob,
    mc_halfline_prob,
    rational_str,
)
from maxbv.sampling import SeedSpec

SEED = SeedSpec(424242, 0)


class TestExact:
    def test_pinned_values(self):
        assert halfline_prob_exact(0) == 1
        assert halfline_prob_exact(1) == Fraction(1, 2)
        assert halfline_prob_exact(2) == Fraction(3, 8)
        assert halfline_prob_exact(10) == Fraction(46189, 262144)
        assert rational_str(halfline_prob_exact(10)) == "46189/262144"

    def test_strictly_decreasing(self):
        values = [halfline_prob_exact(n) for n in range(65)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_float_matches_exact_through_crossover(self):
        # the log-gamma branch takes over past n = 64
        for n in (1, 64, 65, 80, 200):
            exact = float(Fraction(halfline_prob_exact(n)))
            assert halfline_prob_float(n) == pytest.approx(exact, rel=1e-12)

    def test_bridge_stay_exact(self):
        assert bridge_stay_prob_exact(1) == 1
        assert bridge_stay_prob_exact(2) == Fraction(1, 2)
        assert bridge_stay_prob_exact(10) == Fraction(1, 10)
        with pytest.raises(ValueError):
            bridge_stay_prob_exact(0)


class TestSeries:
    def test_low_order_coefficients(self):
        lhs, rhs = andersen_series_check(2)
        assert lhs.coefficients[1] == Fraction(1, 2) == rhs.coefficients[1]
        assert lhs.coefficients[2] == Fraction(3, 8) == rhs.coefficients[2]

    def test_order_64_exact_equality(self):
        lhs, rhs = andersen_series_check(64)
        assert lhs.coefficients == rhs.coefficients

    def test_series_matches_closed_form_to_64(self):
        lhs, _ = andersen_series_check(64)
        for n in range(65):
            assert lhs.coefficients[n] == halfline_prob_exact(n)


class TestMC:
    def test_halfline_n1(self):
        est = mc_halfline_prob(1, 100_000, SEED)
        assert est.within(0.5)

    def test_halfline_n10_vs_exact(self):
        est = mc_halfline_prob(10, 100_000, SEED)
        assert est.within(float(halfline_prob_exact(10)))

    def test_halfline_n50(self):
        est = mc_halfline_prob(50, 200_000, SEED)
        assert est.within(float(halfline_prob_exact(50)))

    def test_bridge_stay_small_n(self):
        for n in (2, 10):
            est = mc_bridge_stay_prob(n, 100_000, SeedSpec(424242, n))
            assert est.within(1.0 / n), (n, est.mean, est.std_error)


class TestArgmaxHistogram:
    def test_n2_split(self):
        hist = bridge_argmax_histogram(2, 50_000, SEED)
        assert hist.ties == 0
        est_frac = hist.counts[0] / hist.samples
        se = (0.25 / hist.samples) ** 0.5
        assert abs(est_frac - 0.5) <= 3 * se

    def test_uniformity_n20(self):
        hist = bridge_argmax_histogram(20, 50_000, SEED)
        assert hist.p_value > 1e-3
        assert hist.ties == 0
        assert sum(hist.counts) == hist.samples

    def test_rows_export(self):
        hist = bridge_argmax_histogram(4, 1_000, SEED)
        rows = hist.rows()
        assert len(rows) == 4
        assert rows[0][0] == 0
