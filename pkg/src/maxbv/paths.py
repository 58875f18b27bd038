"""Uniform time grids, discrete Brownian paths, segment maxima, and
Cameron-Martin directions.

Every other module speaks this vocabulary.  All types are immutable after
construction and all operations are pure functions, so everything here is
safe to call from any number of concurrent workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from typing import IO

import numpy as np

from .errors import GridMismatchError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < t_1 < ... < t_n = horizon with n steps."""

    n: int
    horizon: float

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"grid needs at least one step, got n={self.n}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be finite and positive, got {self.horizon}")

    @property
    def step(self) -> float:
        return self.horizon / self.n

    @cached_property
    def times(self) -> np.ndarray:
        t = np.arange(self.n + 1) * self.step
        t[-1] = self.horizon  # force the exact endpoint
        t.flags.writeable = False
        return t

    def time_at(self, index: int) -> float:
        if index == self.n:
            return self.horizon
        return index * self.step


def _check_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """A path sampled at the grid nodes, starting at exactly 0."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise ValueError(
                f"expected {self.grid.n + 1} values, got shape {values.shape}"
            )
        if not np.isfinite(values).all():
            raise ValueError("path values must be finite")
        if values[0] != 0.0:
            raise ValueError(f"paths start at 0, got w_0={values[0]}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def write_csv(self, fp: IO[str]) -> None:
        """Debug serialization: columns index, time, value."""
        writer = csv.writer(fp)
        writer.writerow(["index", "time", "value"])
        for i, (t, v) in enumerate(zip(self.grid.times, self.values)):
            writer.writerow([i, repr(float(t)), repr(float(v))])


@dataclass(frozen=True)
class SegmentMaxStat:
    """Maximum of a path over an inclusive index range [a, b], with the
    smallest index attaining it (first attainment breaks ties)."""

    a: int
    b: int
    max_value: float
    argmax_index: int

    def argmax_time(self, grid: TimeGrid) -> float:
        return grid.time_at(self.argmax_index)


@dataclass(frozen=True)
class DeltaStat:
    """Split-point statistics at node t: the max over [t, n] minus the max
    over [0, t], and how far each segment max sits above the path value at t."""

    t_index: int
    delta: float
    left_excess: float
    right_excess: float


def running_max(path: DiscretePath, a: int = 0, b: int | None = None) -> SegmentMaxStat:
    """Exact maximum and first argmax of ``path`` over indices a..b inclusive.

    Ties are broken toward the smallest index, matching the first-attainment
    convention for the argmax time of a running maximum.
    """
    n = path.grid.n
    if b is None:
        b = n
    if not (isinstance(a, int) and isinstance(b, int)):
        raise TypeError("segment bounds must be integers")
    if not (0 <= a <= b <= n):
        raise IndexError(f"need 0 <= a <= b <= {n}, got a={a}, b={b}")
    seg = path.values[a : b + 1]
    k = int(np.argmax(seg))  # np.argmax returns the first occurrence
    return SegmentMaxStat(a=a, b=b, max_value=float(seg[k]), argmax_index=a + k)


def delta_stat(path: DiscretePath, t_index: int) -> DeltaStat:
    """Left/right segment maxima around node ``t_index`` and their difference.

    The identity delta = right_excess - left_excess holds exactly because all
    three quantities are derived from the same two segment maxima.
    """
    n = path.grid.n
    if not isinstance(t_index, int):
        raise TypeError("t_index must be an integer")
    if not (0 <= t_index <= n):
        raise IndexError(f"t_index out of range: {t_index}")
    left = running_max(path, 0, t_index)
    right = running_max(path, t_index, n)
    w_t = float(path.values[t_index])
    left_excess = left.max_value - w_t
    right_excess = right.max_value - w_t
    # delta derived from the excesses keeps the decomposition identity exact
    return DeltaStat(
        t_index=t_index,
        delta=right_excess - left_excess,
        left_excess=left_excess,
        right_excess=right_excess,
    )


@dataclass(frozen=True, eq=False)
class Direction:
    """A Cameron-Martin direction given by its density, a step function that
    is constant on each grid interval.

    ``primitive[i]`` is the running discrete integral sum_{j<i} density[j]*step,
    i.e. the direction evaluated at node i; primitive[0] == 0 exactly.
    """

    grid: TimeGrid
    density: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        density = np.asarray(self.density, dtype=float)
        if density.shape != (self.grid.n,):
            raise ValueError(
                f"density needs one value per interval ({self.grid.n}), got {density.shape}"
            )
        if not np.isfinite(density).all():
            raise ValueError("direction density must be finite")
        density = density.copy()
        density.flags.writeable = False
        object.__setattr__(self, "density", density)

    @cached_property
    def primitive(self) -> np.ndarray:
        p = np.empty(self.grid.n + 1)
        p[0] = 0.0
        np.cumsum(self.density * self.grid.step, out=p[1:])
        p.flags.writeable = False
        return p

    @property
    def sup_primitive(self) -> float:
        return float(np.abs(self.primitive).max())

    @classmethod
    def constant(cls, grid: TimeGrid, value: float = 1.0, label: str = "unit") -> Direction:
        return cls(grid, np.full(grid.n, float(value)), label=label)

    @classmethod
    def indicator(
        cls, grid: TimeGrid, start: float, end: float, label: str = ""
    ) -> Direction:
        """Density 1 on grid intervals whose left endpoint lies in [start, end)."""
        left = grid.times[:-1]
        dens = ((left >= start) & (left < end)).astype(float)
        return cls(grid, dens, label=label or f"ind[{start},{end})")

    def write_csv(self, fp: IO[str]) -> None:
        """Debug serialization of the primitive: columns index, time, value."""
        writer = csv.writer(fp)
        writer.writerow(["index", "time", "value"])
        for i, (t, v) in enumerate(zip(self.grid.times, self.primitive)):
            writer.writerow([i, repr(float(t)), repr(float(v))])


def direction_catalog(grid: TimeGrid) -> list[Direction]:
    """Three standard test directions: constant density, front-half indicator,
    and a tent whose primitive rises then falls back to 0."""
    half = grid.horizon / 2
    tent = np.where(grid.times[:-1] < half, 1.0, -1.0)
    return [
        Direction.constant(grid, 1.0, label="unit"),
        Direction.indicator(grid, 0.0, half, label="front-half"),
        Direction(grid, tent, label="tent"),
    ]


def bump(path: DiscretePath, h: Direction, eps: float) -> DiscretePath:
    """The perturbed path w + eps*h, evaluated through h's primitive."""
    _check_same_grid(path.grid, h.grid)
    if not math.isfinite(eps):
        raise ValueError(f"bump size must be finite, got {eps}")
    return DiscretePath(path.grid, path.values + eps * h.primitive)


def wiener_integral(h: Direction, path: DiscretePath) -> float:
    """Discrete Wiener integral of h' against the path increments,
    sum_i density[i] * (w_{i+1} - w_i), with left-endpoint (Ito) weights."""
    _check_same_grid(path.grid, h.grid)
    return float(np.dot(h.density, np.diff(path.values)))


def wiener_integral_batch(h: Direction, values: np.ndarray) -> np.ndarray:
    """Vectorized ``wiener_integral`` over a (batch, n+1) array of node values."""
    return np.diff(values, axis=-1) @ h.density


def direction_inner(h: Direction, k: Direction) -> float:
    """L2(0, horizon) inner product of the two step densities."""
    _check_same_grid(h.grid, k.grid)
    return float(np.dot(h.density, k.density) * h.grid.step)


# ---------------------------------------------------------------------------
# Vectorized running-max machinery for batch estimators
# ---------------------------------------------------------------------------

def running_max_tables(
    values: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-prefix and per-suffix maxima with first-attainment argmax indices.

    For a (batch, n+1) array returns (fwd_max, fwd_arg, bwd_max, bwd_arg):

    - fwd_max[:, i] = max(values[:, :i+1]), fwd_arg the smallest attaining index;
    - bwd_max[:, i] = max(values[:, i:]),  bwd_arg the smallest attaining index.

    This gives segment statistics for every split point of every path in
    O(n) per path, which the kernel-conditioned estimators rely on.
    """
    values = np.atleast_2d(values)
    m = values.shape[1]
    idx = np.arange(m)

    fwd_max = np.maximum.accumulate(values, axis=1)
    prev = np.empty_like(fwd_max)
    prev[:, 0] = -np.inf
    prev[:, 1:] = fwd_max[:, :-1]
    # strict improvement: ties keep the earlier index
    fwd_arg = np.maximum.accumulate(np.where(values > prev, idx, 0), axis=1)

    rev = values[:, ::-1]
    rev_max = np.maximum.accumulate(rev, axis=1)
    prev[:, 0] = -np.inf
    prev[:, 1:] = rev_max[:, :-1]
    # non-strict improvement in reversed order keeps the latest reversed index,
    # i.e. the earliest original index of the suffix maximum
    rev_arg = np.maximum.accumulate(np.where(rev >= prev, idx, 0), axis=1)
    bwd_max = rev_max[:, ::-1]
    bwd_arg = (m - 1) - rev_arg[:, ::-1]
    return fwd_max, fwd_arg, bwd_max, bwd_arg


def top_two_gap(values: np.ndarray) -> np.ndarray:
    """Gap between the largest and second-largest entry of each row.

    A gap of exactly 0 means the discrete maximum is tied.
    """
    values = np.atleast_2d(values)
    top2 = np.partition(values, values.shape[1] - 2, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def segment_split_stats(
    values: np.ndarray, t_index: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batch maxima and first argmax of [0, t] and [t, n] around one split node.

    Returns (max_left, arg_left, max_right, arg_right) for a (batch, n+1)
    array; cheaper than full tables when only one split point is needed.
    """
    values = np.atleast_2d(values)
    left = values[:, : t_index + 1]
    right = values[:, t_index:]
    return (
        left.max(axis=1),
        left.argmax(axis=1),
        right.max(axis=1),
        t_index + right.argmax(axis=1),
    )
