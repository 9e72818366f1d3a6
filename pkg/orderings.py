#!/usr/bin/env python3
"""
orderings.py - Part of equistream

Decision procedures for the welfare (quasi-)orderings on EpStream pairs:

* the Cesaro ordering (compare mu_inf),
* catching-up: u >=C v iff exists T* such that D_T >= 0 for all T >= T*,
* fixed-step catching-up: u >=fixC v iff exists k such that D_{kT} >= 0 for all T,

where D_T = sum_{t<=T} (u_t - v_t). Past H0 = max head length, D grows by a
fixed drift every P = lcm(cycle lengths) steps, so (drift, one window of D)
decides both criteria exactly. brute_force_compare is an independent oracle
that only looks at D up to a finite horizon.

Strict parts follow the usual convention: u > v iff u >= v and not v >= u.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import accumulate
from typing import Any, Dict, Optional, Tuple

import numpy as np

from evaluators import cesaro_average
from stream_core import EpStream, ParameterError, StreamError, require_ep

logger = logging.getLogger("equistream.orderings")


class Verdict(str, Enum):
    STRICTLY_BETTER = "StrictlyBetter"
    EQUIVALENT = "Equivalent"
    STRICTLY_WORSE = "StrictlyWorse"
    INCOMPARABLE = "Incomparable"
    UNKNOWN = "Unknown"

    def mirror(self) -> "Verdict":
        return _MIRROR.get(self, self)

    @property
    def at_least_as_good(self) -> bool:
        return self in (Verdict.STRICTLY_BETTER, Verdict.EQUIVALENT)


_MIRROR = {
    Verdict.STRICTLY_BETTER: Verdict.STRICTLY_WORSE,
    Verdict.STRICTLY_WORSE: Verdict.STRICTLY_BETTER,
}


def verdict_from_relations(ge: bool, le: bool) -> Verdict:
    """Combine u >= v and v >= u into a verdict"""
    if ge and le:
        return Verdict.EQUIVALENT
    if ge:
        return Verdict.STRICTLY_BETTER
    if le:
        return Verdict.STRICTLY_WORSE
    return Verdict.INCOMPARABLE


def verdict_from_sign(x: Any) -> Verdict:
    if x > 0:
        return Verdict.STRICTLY_BETTER
    if x < 0:
        return Verdict.STRICTLY_WORSE
    return Verdict.EQUIVALENT


@dataclass(frozen=True)
class ComparisonResult:
    verdict: Verdict
    witness: Optional[Dict[str, Any]] = field(default=None, hash=False)

    def mirror(self) -> "ComparisonResult":
        return ComparisonResult(self.verdict.mirror(), self.witness)


@dataclass(frozen=True)
class DifferenceProfile:
    """Exact structure of D_T = sum_{t<=T}(u_t - v_t).

    prefix holds D_0..D_{H0-1}; window holds D_{H0}..D_{H0+P-1}; for every
    T >= H0, D_{T+P} = D_T + drift.
    """

    drift: Fraction
    stable_from: int
    period: int
    window: Tuple[Fraction, ...]
    prefix: Tuple[Fraction, ...]

    def partial_difference(self, T: int) -> Fraction:
        if T < 0:
            raise ParameterError(f"partial difference index must be >= 0, got {T}")
        if T < self.stable_from:
            return self.prefix[T]
        q, r = divmod(T - self.stable_from, self.period)
        return self.window[r] + q * self.drift

    @property
    def zero_phase_value(self) -> Fraction:
        """D at the unique T = 0 (mod P) inside [H0, H0 + P)"""
        t0 = self.period * -(-self.stable_from // self.period)
        return self.window[t0 - self.stable_from]


def difference_profile(u: EpStream, v: EpStream) -> DifferenceProfile:
    require_ep(u, "difference_profile")
    require_ep(v, "difference_profile")
    h0 = max(len(u.head), len(v.head))
    p = math.lcm(u.period, v.period)
    n = h0 + 2 * p
    diffs = [a - b for a, b in zip(u.prefix(n), v.prefix(n))]
    d = [Fraction(0)] + list(accumulate(diffs))
    drift = d[h0 + p] - d[h0]
    if any(d[t + p] != d[t] + drift for t in range(h0, h0 + p + 1)):
        raise StreamError(f"partial differences of {u!r} and {v!r} are not periodic past {h0}")
    return DifferenceProfile(
        drift=drift,
        stable_from=h0,
        period=p,
        window=tuple(d[h0 : h0 + p]),
        prefix=tuple(d[:h0]),
    )


def fixed_step_dominates(profile: DifferenceProfile, k: int) -> bool:
    """Exact test of D_{kT} >= 0 for every T >= 1"""
    return first_fixed_step_shortfall(profile, k) is None


def first_fixed_step_shortfall(profile: DifferenceProfile, k: int) -> Optional[int]:
    """Smallest T >= 1 with D_{kT} < 0, or None when there is none.

    With drift >= 0, D_{kT + kP} >= D_{kT} once kT >= H0, so the multiples of k
    up to H0 + kP cover every case.
    """
    if k < 1:
        raise ParameterError(f"step must be >= 1, got {k}")
    last = profile.stable_from // k + profile.period + 1
    for T in range(1, last + 1):
        if profile.partial_difference(k * T) < 0:
            return T
    if profile.drift >= 0:
        return None
    # D_{kT} falls by k * drift every P values of T
    T = last + 1
    while profile.partial_difference(k * T) >= 0:
        T += 1
    return T


def compare_cesaro(u: EpStream, v: EpStream) -> ComparisonResult:
    mu_u, mu_v = cesaro_average(u), cesaro_average(v)
    return ComparisonResult(verdict_from_sign(mu_u - mu_v), {"mean_u": mu_u, "mean_v": mu_v})


def compare_catching_up(u: EpStream, v: EpStream) -> ComparisonResult:
    profile = difference_profile(u, v)
    if profile.drift != 0:
        return ComparisonResult(verdict_from_sign(profile.drift), {"drift": profile.drift})
    low, high = min(profile.window), max(profile.window)
    witness = {"drift": profile.drift, "window_min": low, "window_max": high, "from": profile.stable_from}
    return ComparisonResult(verdict_from_relations(low >= 0, high <= 0), witness)


def _minimal_period_multiple(profile: DifferenceProfile) -> int:
    return profile.period * max(1, -(-profile.stable_from // profile.period))


def compare_fixed_step(u: EpStream, v: EpStream) -> ComparisonResult:
    profile = difference_profile(u, v)
    if profile.drift < 0:
        return compare_fixed_step(v, u).mirror()
    k = _minimal_period_multiple(profile)
    if profile.drift > 0:
        while not fixed_step_dominates(profile, k):
            k += profile.period
        return ComparisonResult(Verdict.STRICTLY_BETTER, {"k": k, "drift": profile.drift})
    # Every step k hits T with kT = 0 (mod P) in the stable region, pinning D there
    d0 = profile.zero_phase_value
    return ComparisonResult(verdict_from_sign(d0), {"k": k, "d0": d0})


def compare_streams(u: EpStream, v: EpStream, criterion: str) -> ComparisonResult:
    procedures = {
        "C": compare_catching_up,
        "catching_up": compare_catching_up,
        "fixC": compare_fixed_step,
        "fixed_step": compare_fixed_step,
        "cesaro": compare_cesaro,
    }
    if criterion not in procedures:
        raise ParameterError(f"unknown criterion {criterion!r}; expected C, fixC or cesaro")
    return procedures[criterion](u, v)


def check_C_implies_fixC(u: EpStream, v: EpStream) -> bool:
    """not (u >=C v) or u >=fixC v"""
    return (
        not compare_catching_up(u, v).verdict.at_least_as_good
        or compare_fixed_step(u, v).verdict.at_least_as_good
    )


_HOLDS, _REFUTED, _UNSETTLED = "holds", "refuted", "unsettled"


def _scaled_partial_sums(u: EpStream, v: EpStream, horizon: int) -> np.ndarray:
    """D_1..D_horizon times the common denominator of all entries, as integers"""
    scale = math.lcm(*(x.denominator for x in u.values + v.values))
    a = [x.numerator * (scale // x.denominator) for x in u.prefix(horizon)]
    b = [x.numerator * (scale // x.denominator) for x in v.prefix(horizon)]
    sums = list(accumulate(x - y for x, y in zip(a, b)))
    if sums and max(abs(x) for x in sums) < 2**62:
        return np.array(sums, dtype=np.int64)
    return np.array(sums, dtype=object)


def _stretch_minima(d: np.ndarray, width: int, step: int = 1) -> Tuple[Any, Any]:
    """Minima of D at multiples of step over (H - 2w, H - w] and (H - w, H].

    width is a multiple of both step and P, so the two stretches are shifts of
    each other and their minima differ by (width / P) * drift.
    """
    horizon = len(d)
    recent = d[horizon - width + step - 1 :: step]
    earlier = d[horizon - 2 * width + step - 1 : horizon - width : step]
    return np.min(recent), np.min(earlier)


def _catching_up_status(d: np.ndarray, width: int) -> str:
    low_recent, low_earlier = _stretch_minima(d, width)
    if low_recent >= 0 and low_recent >= low_earlier:
        return _HOLDS
    if low_recent < 0 and low_recent <= low_earlier:
        return _REFUTED
    return _UNSETTLED


def _fixed_step_status(d: np.ndarray, h0: int, p: int, kmax: int) -> str:
    horizon = len(d)
    statuses = []
    for k in range(1, kmax + 1):
        if np.min(d[k - 1 :: k]) < 0:
            statuses.append(_REFUTED)
            continue
        span = math.lcm(k, p)
        width = span * ((horizon - h0) // (4 * span))
        if width == 0:
            statuses.append(_UNSETTLED)
            continue
        # horizon may not be a multiple of k; align the stretches on the last multiple
        aligned = d[: horizon - horizon % k]
        low_recent, low_earlier = _stretch_minima(aligned, width, k)
        statuses.append(_HOLDS if low_recent >= low_earlier else _UNSETTLED)
    if _HOLDS in statuses:
        return _HOLDS
    if all(s == _REFUTED for s in statuses):
        width = p * ((horizon - h0) // (4 * p))
        low_recent, low_earlier = _stretch_minima(d, width)
        if low_recent < low_earlier:
            return _REFUTED
        # zero drift: the smallest multiple of P past the heads decides every step
        if low_recent == low_earlier and kmax >= p * max(1, -(-h0 // p)):
            return _REFUTED
    return _UNSETTLED


def brute_force_compare(u: EpStream, v: EpStream, criterion: str, horizon: int, kmax: int = 12) -> ComparisonResult:
    """Test the defining quantifiers on D_1..D_horizon directly.

    A relation holds when the most recent stretch of D is nonnegative and not
    trending down, and is refuted when it is negative and not trending up;
    anything else leaves the verdict Unknown.
    """
    require_ep(u, "brute_force_compare")
    require_ep(v, "brute_force_compare")
    if criterion not in ("C", "fixC"):
        raise ParameterError(f"criterion must be C or fixC, got {criterion!r}")
    h0 = max(len(u.head), len(v.head))
    p = math.lcm(u.period, v.period)
    if horizon < h0 + 50 * p:
        raise ParameterError(f"horizon {horizon} below H0 + 50 P = {h0 + 50 * p}")
    d = _scaled_partial_sums(u, v, horizon)
    if criterion == "C":
        width = p * ((horizon - h0) // (4 * p))
        ge = _catching_up_status(d, width)
        le = _catching_up_status(-d, width)
    else:
        ge = _fixed_step_status(d, h0, p, kmax)
        le = _fixed_step_status(-d, h0, p, kmax)
    witness = {"horizon": horizon, "kmax": kmax, "ge": ge, "le": le}
    if _UNSETTLED in (ge, le):
        return ComparisonResult(Verdict.UNKNOWN, witness)
    return ComparisonResult(verdict_from_relations(ge == _HOLDS, le == _HOLDS), witness)
