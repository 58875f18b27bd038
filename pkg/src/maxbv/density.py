"""Reflection-principle densities, the split-point density at zero, the
discrete total-variation bound for the second-derivative measure of the
running maximum, and its limiting singular integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import QuadratureError
from .fluctuation import halfline_prob_float
from .perimeter import HALFSPACE_PERIMETER


def segment_max_density(y: float, length: float) -> float:
    """Density of the running maximum of a Brownian segment of the given
    length, started at 0: the half-normal 2*phi(y/sqrt(L))/sqrt(L) for y >= 0.

    Via the reflection principle, P(max > a) = 2 P(W_L > a)."""
    if length <= 0:
        raise ValueError("segment length must be positive")
    if y < 0:
        return 0.0
    s = math.sqrt(length)
    return 2.0 * math.exp(-0.5 * (y / s) ** 2) / (s * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True, eq=False)
class DensityCurve:
    """A sampled density with a mass check (quadrature plus analytic tail)."""

    abscissae: np.ndarray
    values: np.ndarray
    total_mass_check: float

    def __post_init__(self) -> None:
        if (np.asarray(self.values) < 0).any():
            raise ValueError("density values must be non-negative")


def segment_max_curve(length: float, y_max: float | None = None, points: int = 801) -> DensityCurve:
    """Tabulated segment-max density with trapezoid mass + half-normal tail."""
    if y_max is None:
        y_max = 8.0 * math.sqrt(length)
    ys = np.linspace(0.0, y_max, points)
    vals = np.array([segment_max_density(float(y), length) for y in ys])
    mass = float(np.trapezoid(vals, ys))
    z = y_max / math.sqrt(length)
    tail = float(math.erfc(z / math.sqrt(2.0)))  # 2*(1 - Phi(z))
    return DensityCurve(abscissae=ys, values=vals, total_mass_check=mass + tail)


def lt_zero(t: float, horizon: float) -> float:
    """Density at 0 of the split-point difference max[t,T] - max[0,t].

    The two sides, each measured above the path value at t, are independent
    half-normals of lengths T - t (forward) and t (by time reversal), so the
    density of their difference at 0 is the overlap integral
    int_0^inf f_{T-t}(y) f_t(y) dy, evaluated by adaptive quadrature.
    """
    if not (0.0 < t < horizon):
        raise ValueError(f"need 0 < t < horizon, got t={t}, horizon={horizon}")
    a, b = horizon - t, t

    def integrand(y: float) -> float:
        return segment_max_density(y, a) * segment_max_density(y, b)

    value, err = integrate.quad(
        integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200
    )
    if err > 1e-10:
        raise QuadratureError(f"lt_zero quadrature error {err:.2e} too large")
    return float(value)


def lt_zero_closed(horizon: float) -> float:
    """Closed evaluation of the overlap integral: sqrt(2/(pi*T)), independent
    of the split point (the Gaussian product integrates in closed form)."""
    return math.sqrt(2.0 / (math.pi * horizon))


# ---------------------------------------------------------------------------
# Discrete total-variation bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TVBoundRow:
    """One row of the discrete total-variation bound table.

    ``total`` is sqrt(T/n) * (2*pi)^(-1/2) * sum over ordered index pairs
    (m, k) of p(m) * p(n-k) / sqrt(k-m) with p the exact stay-below
    probability; ``boundary`` collects the m = 0 and k = n terms.
    """

    n: int
    horizon: float
    total: float
    boundary: float

    @property
    def bulk(self) -> float:
        return self.total - self.boundary


def tv_bound_discrete(n: int, horizon: float = 1.0) -> TVBoundRow:
    """Exact-factor bound for the total variation of the discretized second
    derivative.

    Every pair m < k contributes the product of three independent factors:
    the stay-below probabilities of the two outer segments and the
    perimeter-times-bridge value (2*pi)^(-1/2)/(k-m) of the middle one,
    weighted by the increment scale sqrt((k-m) T / n).
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    p = np.array([halfline_prob_float(j) for j in range(n + 1)])
    # sum over 0 <= m < k <= n of p[m] * p[n-k] / sqrt(k-m), grouped by d = k-m
    q = p[::-1]  # q[k] = p[n-k]
    total = 0.0
    for d in range(1, n + 1):
        total += float(np.dot(p[: n - d + 1], q[d:])) / math.sqrt(d)
    # boundary: m = 0 terms, k = n terms, minus the doubly counted corner
    m0 = sum(p[0] * p[n - k] / math.sqrt(k) for k in range(1, n + 1))
    kn = sum(p[m] * p[0] / math.sqrt(n - m) for m in range(0, n))
    corner = p[0] * p[0] / math.sqrt(n)
    boundary = m0 + kn - corner
    scale = math.sqrt(horizon / n) * HALFSPACE_PERIMETER
    return TVBoundRow(
        n=n,
        horizon=horizon,
        total=float(scale * total),
        boundary=float(scale * boundary),
    )


def tv_bound_table(ns: list[int], horizon: float = 1.0) -> list[TVBoundRow]:
    return [tv_bound_discrete(n, horizon) for n in ns]


# ---------------------------------------------------------------------------
# The limiting singular integral
# ---------------------------------------------------------------------------

def inner_arcsine_integral(t: float) -> float:
    """int_t^1 ds / sqrt((s-t)(1-s)), by square-root substitutions at both
    endpoints (s = t + v^2 below the midpoint, s = 1 - w^2 above); the exact
    value is pi for every t in [0, 1)."""
    if not (0.0 <= t < 1.0):
        raise ValueError("t must lie in [0, 1)")
    mid = 0.5 * (t + 1.0)

    def left(v: float) -> float:
        return 2.0 / math.sqrt(1.0 - t - v * v)

    def right(w: float) -> float:
        return 2.0 / math.sqrt(1.0 - t - w * w)

    vmax = math.sqrt(mid - t)
    wmax = math.sqrt(1.0 - mid)
    a, ea = integrate.quad(left, 0.0, vmax, epsabs=1e-12, epsrel=1e-12)
    b, eb = integrate.quad(right, 0.0, wmax, epsabs=1e-12, epsrel=1e-12)
    if ea + eb > 1e-9:
        raise QuadratureError(f"inner quadrature error {ea + eb:.2e} too large")
    return a + b


@dataclass(frozen=True)
class QuadratureValue:
    value: float
    error_estimate: float


def limit_integral() -> QuadratureValue:
    """int_0^1 dt int_t^1 ds / sqrt(t (s-t) (1-s)).

    The outer 1/sqrt(t) singularity is removed by t = r^2; the inner
    integral gets square-root substitutions at both of its endpoints.
    """

    def outer(r: float) -> float:
        return 2.0 * inner_arcsine_integral(r * r)

    # the integrand is smooth in r on [0, 1); keep the endpoint open by eps
    value, err = integrate.quad(
        outer, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10, limit=200
    )
    total_err = err + 2.0e-9  # inner quadrature tolerance propagated
    if total_err > 1e-8:
        raise QuadratureError(
            f"limit integral reached error {total_err:.2e}, wanted < 1e-8"
        )
    return QuadratureValue(value=float(value), error_estimate=float(total_err))


def limit_integral_riemann(n: int) -> float:
    """Riemann-sum version sum_{0<m<k<n} n^-2 / sqrt((m/n)((k-m)/n)((n-k)/n))."""
    if n < 3:
        raise ValueError("n must be at least 3")
    m = np.arange(1, n)
    total = 0.0
    for k in range(2, n):
        mm = m[: k - 1]
        total += float(
            np.sum(1.0 / np.sqrt((mm / n) * ((k - mm) / n) * ((n - k) / n)))
        )
    return total / (n * n)


# ---------------------------------------------------------------------------
# Stirling asymptotics of the stay-below probability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticGap:
    n: int
    scaled_value: float  # sqrt(n) * P(stay below n steps)
    reference: float  # 1/sqrt(pi)
    relative_gap: float


def asymptotic_match(n: int) -> AsymptoticGap:
    """Compare sqrt(n)*P(stay below) to its Stirling limit 1/sqrt(pi).

    The relative gap is 1/(8n) + O(n^-2), so it decreases in n.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    scaled = math.sqrt(n) * halfline_prob_float(n)
    ref = 1.0 / math.sqrt(math.pi)
    return AsymptoticGap(
        n=n,
        scaled_value=scaled,
        reference=ref,
        relative_gap=abs(scaled - ref) / ref,
    )
