#!/usr/bin/env python3
"""
evaluators.py - Part of equistream

Welfare functionals on utility streams: partial means, the Cesaro average,
discounted utilitarian values and their delta -> 1 limits, and the four
bound functionals

    W1 = sup_k liminf_T mu_{kT}      W2 = liminf_{delta->1} sigma_delta
    W3 = limsup_{delta->1} sigma_delta   W4 = inf_k limsup_T mu_{kT}

On EpStream every quantity is exact (Fractions). On BoundedStream the liminf
and limsup values are estimates from a finite horizon and are tagged approx.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from stream_core import (
    BoundedStream,
    EpStream,
    ParameterError,
    Stream,
    as_bounded,
    exact_sum,
    require_ep,
)

logger = logging.getLogger("equistream.evaluators")

Number = Union[Fraction, float]

DEFAULT_GRID = (4, 20)
GRID_TAIL = 8
CHUNK = 1 << 20


@dataclass(frozen=True)
class Interval:
    lower: Number
    upper: Number
    approx: bool = True

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ParameterError(f"interval lower {self.lower} exceeds upper {self.upper}")

    @property
    def width(self) -> Number:
        return self.upper - self.lower

    def contains(self, x: Number, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol


@dataclass(frozen=True)
class DiscountParams:
    delta: Number
    truncation_tolerance: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 < self.delta < 1:
            raise ParameterError(f"discount factor must lie in (0, 1), got {self.delta}")
        if not self.truncation_tolerance > 0:
            raise ParameterError("truncation tolerance must be positive")

    def truncation_length(self, bound: float) -> int:
        """Smallest N with delta^N * B / (1 - delta) <= tolerance"""
        delta = float(self.delta)
        target = self.truncation_tolerance * (1.0 - delta) / bound
        if target >= 1.0:
            return 1
        return max(1, math.ceil(math.log(target) / math.log(delta)))


def _check_delta(delta: Number) -> Number:
    if not 0 < delta < 1:
        raise ParameterError(f"discount factor must lie in (0, 1), got {delta}")
    return delta


def _chunked(stream: BoundedStream, n: int) -> Iterator[Tuple[int, np.ndarray]]:
    start = 1
    while start <= n:
        size = min(CHUNK, n - start + 1)
        yield start, stream.sample(size, start)
        start += size


def partial_sum(s: EpStream, T: int) -> Fraction:
    """Exact S_T = u_1 + ... + u_T"""
    require_ep(s, "partial_sum")
    if T < 0:
        raise ParameterError(f"partial sum length must be >= 0, got {T}")
    h = len(s.head)
    if T <= h:
        return exact_sum(s.head[:T])
    full, rem = divmod(T - h, s.period)
    return (
        exact_sum(s.head)
        + full * exact_sum(s.cycle)
        + exact_sum(s.cycle[:rem])
    )


def partial_sums(s: EpStream, T: int) -> List[Fraction]:
    """Exact running sums S_1..S_T"""
    require_ep(s, "partial_sums")
    return list(accumulate(s.prefix(T)))


def partial_mean(s: Stream, T: int) -> Number:
    """mu_T(u) = (1/T) * sum_{t<=T} u_t"""
    if T < 1:
        raise ParameterError(f"mean horizon must be >= 1, got {T}")
    if isinstance(s, EpStream):
        return partial_sum(s, T) / T
    total = 0.0
    for _, chunk in _chunked(s, T):
        total += float(chunk.sum())
    return total / T


def cesaro_average(s: EpStream) -> Fraction:
    """mu_inf; the head has no effect"""
    require_ep(s, "cesaro_average")
    return exact_sum(s.cycle) / s.period


def value_bounds(s: EpStream) -> Interval:
    """(liminf u_t, limsup u_t) = (min cycle, max cycle)"""
    require_ep(s, "value_bounds")
    return Interval(min(s.cycle), max(s.cycle), approx=False)


def _kstep_tail_means(k: int, horizon: int, cumsum: np.ndarray) -> np.ndarray:
    n = horizon // k
    totals = cumsum[k - 1 : n * k : k]
    means = totals / (k * np.arange(1, n + 1, dtype=np.float64))
    return means[n // 2 :]


def _cumsum(s: Stream, horizon: int) -> np.ndarray:
    stream = as_bounded(s) if isinstance(s, EpStream) else s
    return np.cumsum(stream.sample(horizon))


def cesaro_estimate(s: Stream, k: int, horizon: int) -> Interval:
    """Empirical (liminf, limsup) of mu_{kT} over the last half of T <= horizon/k.

    An estimate, not a bound.
    """
    if k < 1:
        raise ParameterError(f"step must be >= 1, got {k}")
    if horizon < 10 * k:
        raise ParameterError(f"horizon {horizon} too short for step {k}; need >= {10 * k}")
    means = _kstep_tail_means(k, horizon, _cumsum(s, horizon))
    return Interval(float(means.min()), float(means.max()), approx=True)


def discounted_value(s: Stream, delta: Number, truncation_tolerance: float = 1e-6) -> Number:
    """sigma_delta(u) = (1 - delta) * sum_t delta^(t-1) u_t.

    EpStream uses the closed form with (1 - delta) / (1 - delta^p) written as
    1 / (1 + delta + ... + delta^(p-1)); the result is an exact Fraction when
    delta is a Fraction. BoundedStream uses a truncated sum whose error is at
    most delta^N * B / (1 - delta) <= truncation_tolerance.
    """
    _check_delta(delta)
    if isinstance(s, EpStream):
        if isinstance(delta, Fraction):
            one, head, cycle = Fraction(1), s.head, s.cycle
        else:
            delta = float(delta)
            one = 1.0
            head = [float(x) for x in s.head]
            cycle = [float(x) for x in s.cycle]
        h = len(head)
        head_part = sum(delta ** (t - 1) * u for t, u in enumerate(head, start=1))
        cycle_part = sum(delta ** (j - 1) * c for j, c in enumerate(cycle, start=1))
        normaliser = sum(delta ** j for j in range(len(cycle)))
        return (one - delta) * head_part + delta**h * cycle_part / normaliser

    params = DiscountParams(float(delta), truncation_tolerance)
    n = params.truncation_length(s.bound)
    log_delta = math.log1p(-(1.0 - params.delta))
    total = 0.0
    for start, chunk in _chunked(s, n):
        exponents = np.arange(start - 1, start - 1 + len(chunk), dtype=np.float64)
        total += float(np.dot(np.exp(exponents * log_delta), chunk))
    return (1.0 - params.delta) * total


def discounted_grid(j0: int = DEFAULT_GRID[0], j1: int = DEFAULT_GRID[1]) -> List[float]:
    """delta_j = 1 - 2^-j for j = j0..j1 (exact binary floats)"""
    if not 1 <= j0 < j1 <= 52:
        raise ParameterError(f"delta grid needs 1 <= j0 < j1 <= 52, got {j0}..{j1}")
    return [1.0 - 2.0**-j for j in range(j0, j1 + 1)]


def discounted_series(s: Stream, grid: Sequence[float], truncation_tolerance: float = 1e-6) -> List[Tuple[float, float]]:
    return [(delta, float(discounted_value(s, delta, truncation_tolerance))) for delta in grid]


def discounted_limit_interval(s: Stream, grid: Optional[Sequence[float]] = None, tail: int = GRID_TAIL) -> Interval:
    """(W2, W3): min and max of sigma_delta over the last `tail` grid points.

    On EpStream the delta -> 1 limit exists and equals the Cesaro average, so the
    exact value is returned as a degenerate interval.
    """
    grid = list(grid) if grid is not None else discounted_grid()
    if not grid or any(not 0 < d < 1 for d in grid):
        raise ParameterError("delta grid must be nonempty with every delta in (0, 1)")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("delta grid must be strictly increasing")
    if tail < 1:
        raise ParameterError(f"grid tail must be >= 1, got {tail}")
    if isinstance(s, EpStream):
        mu = cesaro_average(s)
        return Interval(mu, mu, approx=False)
    values = [v for _, v in discounted_series(s, grid[-tail:])]
    logger.debug(f"sigma_delta tail for {s.label}: {values}")
    return Interval(min(values), max(values), approx=True)


def kstep_mean_bounds(s: Stream, kmax: int, horizon: int) -> Tuple[Number, Number]:
    """(W1, W4) from the k-step mean estimates, k = 1..kmax"""
    if kmax < 1:
        raise ParameterError(f"kmax must be >= 1, got {kmax}")
    if isinstance(s, EpStream):
        mu = cesaro_average(s)
        return mu, mu
    if horizon < 10 * kmax:
        raise ParameterError(f"horizon {horizon} too short for kmax {kmax}; need >= {10 * kmax}")
    cumsum = _cumsum(s, horizon)
    lows, highs = [], []
    for k in range(1, kmax + 1):
        means = _kstep_tail_means(k, horizon, cumsum)
        lows.append(float(means.min()))
        highs.append(float(means.max()))
    return max(lows), min(highs)


def bound_functionals(
    s: Stream, kmax: int, horizon: int, grid: Optional[Sequence[float]] = None, tail: int = GRID_TAIL
) -> Dict[str, Number]:
    w1, w4 = kstep_mean_bounds(s, kmax, horizon)
    limits = discounted_limit_interval(s, grid, tail)
    return {"W1": w1, "W2": limits.lower, "W3": limits.upper, "W4": w4}


@dataclass
class SandwichCheck:
    """liminf mu_{kT} - eps <= W2 <= W3 <= limsup mu_{kT} + eps for every k"""

    estimates: List[Interval]
    limits: Interval
    eps: float
    ok: bool = field(init=False)

    def __post_init__(self) -> None:
        self.ok = self.limits.lower <= self.limits.upper and all(
            est.lower - self.eps <= self.limits.lower and self.limits.upper <= est.upper + self.eps
            for est in self.estimates
        )


def check_sandwich(
    s: Stream,
    kmax: int,
    horizon: int,
    grid: Optional[Sequence[float]] = None,
    eps: float = 0.05,
    tail: int = GRID_TAIL,
) -> SandwichCheck:
    if isinstance(s, EpStream):
        mu = cesaro_average(s)
        exact = Interval(mu, mu, approx=False)
        return SandwichCheck([exact] * kmax, exact, 0.0)
    estimates = [cesaro_estimate(s, k, horizon) for k in range(1, kmax + 1)]
    return SandwichCheck(estimates, discounted_limit_interval(s, grid, tail), eps)


def _abel_tail(delta: float, bound: float, n: int) -> float:
    # (1 - delta)^2 * sum_{t > n} delta^(t-1) * t * B, in closed form
    return delta**n * (n + 1 - n * delta) * bound


def abel_truncation_length(delta: Number, bound: float, tol: float = 1e-10) -> int:
    """Smallest N for which the Abel tail is below tol"""
    delta = float(_check_delta(delta))
    if bound <= 0:
        return 1
    n = max(1, math.ceil(math.log(tol / bound) / math.log(delta)))
    while _abel_tail(delta, bound, n) >= tol:
        n += max(1, n // 64)
    return n


def abel_identity_residual(s: EpStream, delta: Number, N: int, tol: float = 1e-10) -> float:
    """|sigma_delta(u) - (1 - delta)^2 * sum_{t<=N} delta^(t-1) * t * mu_t(u)|

    t * mu_t is the running sum S_t, so the right side costs O(N).
    """
    require_ep(s, "abel_identity_residual")
    delta = float(_check_delta(delta))
    bound = float(max(abs(x) for x in s.values))
    if bound > 0 and _abel_tail(delta, bound, N) >= tol:
        raise ParameterError(
            f"N={N} too small for delta={delta}: need N >= {abel_truncation_length(delta, bound, tol)}"
        )
    running = np.cumsum(np.array([float(x) for x in s.prefix(N)], dtype=np.float64))
    weights = np.power(delta, np.arange(N, dtype=np.float64))
    series = (1.0 - delta) ** 2 * math.fsum(weights * running)
    return abs(float(discounted_value(s, delta)) - series)
