"""Random-walk fluctuation identities, exact and Monte Carlo.

The exact layer works in arbitrary-precision rationals: the stay-below
probability P(W_1 <= 0, ..., W_n <= 0) = C(2n,n)/4^n for symmetric
continuous increments (Sparre Andersen), its generating function
(1-t)^(-1/2), and the bridge identity P(stay below | W_n = 0) = 1/n.
The Monte Carlo layer checks the same quantities on sampled walks and
bridges, including the cyclic-symmetry consequence that the bridge argmax
position is uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .sampling import (
    MCEstimate,
    SeedSpec,
    bridge_sums_batch,
    mc_collect,
    mc_run,
    walk_sums_batch,
)

ExactRational = Fraction


def rational_str(q: Fraction) -> str:
    """Serialize as "p/q"."""
    return f"{q.numerator}/{q.denominator}"


def halfline_prob_exact(n: int) -> Fraction:
    """P(all of W_1..W_n <= 0) = C(2n,n)/4^n, exactly; n = 0 gives 1."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return Fraction(math.comb(2 * n, n), 4**n)


def halfline_prob_float(n: int) -> float:
    """Float stay-below probability, via log-gamma beyond n = 64 where the
    central binomial over 4^n would overflow naively."""
    if n <= 64:
        return float(halfline_prob_exact(n))
    log_p = math.lgamma(2 * n + 1) - 2 * math.lgamma(n + 1) - n * math.log(4.0)
    return math.exp(log_p)


def bridge_stay_prob_exact(n: int) -> Fraction:
    """P(bridge of length n stays <= 0) = 1/n, exactly."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return Fraction(1, n)


@dataclass(frozen=True)
class SeriesCoefficients:
    """Truncated formal power series with exact rational coefficients."""

    order: int
    coefficients: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.coefficients) != self.order + 1:
            raise ValueError("need order + 1 coefficients")


def andersen_series_check(order: int) -> tuple[SeriesCoefficients, SeriesCoefficients]:
    """Both sides of the stay-below generating identity, truncated at ``order``.

    lhs: exp(sum_{k>=1} t^k/(2k)) by exact formal-series exponentiation
    (g_n = (1/(2n)) * sum_{j<n} g_j, from g' = f' g with f' summing to 1/2);
    rhs: the binomial series of (1-t)^(-1/2).  Equal coefficients constitute
    a machine-checked proof of the identity at every truncation order.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    lhs = [Fraction(1)]
    running = Fraction(1)  # sum of lhs so far
    for n in range(1, order + 1):
        g_n = running / (2 * n)
        lhs.append(g_n)
        running += g_n
    rhs = [Fraction(1)]
    for n in range(1, order + 1):
        rhs.append(rhs[-1] * Fraction(2 * n - 1, 2 * n))
    return (
        SeriesCoefficients(order, tuple(lhs)),
        SeriesCoefficients(order, tuple(rhs)),
    )


# ---------------------------------------------------------------------------
# Monte Carlo counterparts
# ---------------------------------------------------------------------------

def mc_halfline_prob(
    n: int, samples: int, seed: SeedSpec, *, workers: int = 1
) -> MCEstimate:
    """MC estimate of P(all partial sums <= 0) over sampled walks."""
    if n < 1:
        raise ValueError("n must be at least 1")

    def statistic(rng: np.random.Generator, count: int) -> np.ndarray:
        sums = walk_sums_batch(rng, count, n)
        return (sums[:, 1:].max(axis=1) <= 0.0).astype(float)

    return mc_run(statistic, samples, seed, workers=workers)


def mc_bridge_stay_prob(
    n: int, samples: int, seed: SeedSpec, *, workers: int = 1
) -> MCEstimate:
    """MC estimate of P(all bridge partial sums <= 0)."""
    if n < 2:
        raise ValueError("n must be at least 2")

    def statistic(rng: np.random.Generator, count: int) -> np.ndarray:
        sums = bridge_sums_batch(rng, count, n)
        return (sums[:, 1:n].max(axis=1) <= 0.0).astype(float)

    return mc_run(statistic, samples, seed, workers=workers)


@dataclass(frozen=True)
class ArgmaxHistogram:
    """First-argmax census of bridge partial sums W_0..W_{n-1}."""

    n: int
    counts: tuple[int, ...]
    ties: int
    samples: int
    chi_square: float
    p_value: float
    seed: SeedSpec

    def rows(self) -> list[tuple[int, int]]:
        return list(enumerate(self.counts))


def bridge_argmax_histogram(
    n: int, samples: int, seed: SeedSpec, *, workers: int = 1
) -> ArgmaxHistogram:
    """Histogram of the first argmax position of W_0..W_{n-1} over sampled
    bridges, with a chi-square statistic against the uniform law on n cells.

    The forced W_n = 0 is excluded from the census (it duplicates W_0 in the
    cyclic picture).  Exact float ties of the maximum are counted and
    expected to be 0.
    """
    if n < 2:
        raise ValueError("n must be at least 2")

    def task(rng: np.random.Generator, count: int):
        sums = bridge_sums_batch(rng, count, n)
        head = sums[:, :n]
        arg = head.argmax(axis=1)  # first occurrence
        m = head.max(axis=1)
        ties = int(((head == m[:, None]).sum(axis=1) > 1).sum())
        return np.bincount(arg, minlength=n), ties

    def combine(a, b):
        return a[0] + b[0], a[1] + b[1]

    counts, ties = mc_collect(task, samples, seed, combine=combine, workers=workers)
    expected = samples / n
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    p_value = float(stats.chi2.sf(chi2, df=n - 1))
    return ArgmaxHistogram(
        n=n,
        counts=tuple(int(c) for c in counts),
        ties=ties,
        samples=samples,
        chi_square=chi2,
        p_value=p_value,
        seed=seed,
    )
