#!/usr/bin/env python3
"""
test_orderings.py - Part of equistream

Tests for the exact catching-up decision procedures and the brute-force oracle
"""
import math
import os
import sys
from fractions import Fraction

import numpy as np
import pytest

# Add the parent directory to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from axiom_harness import GeneratorConfig, random_stream
from orderings import (
    ComparisonResult,
    Verdict,
    brute_force_compare,
    check_C_implies_fixC,
    compare_catching_up,
    compare_cesaro,
    compare_fixed_step,
    compare_streams,
    difference_profile,
    first_fixed_step_shortfall,
    fixed_step_dominates,
    verdict_from_relations,
)
from stream_core import (
    DomainMismatchError,
    ParameterError,
    add,
    alternating,
    builtin_generator,
    constant,
    make_ep,
    prepend,
    tail,
)

F = Fraction


@pytest.fixture
def alternating_pair():
    """(1,0,1,0,...) against (0,1,0,1,...)"""
    return alternating(), tail(alternating(), 1)


def oracle_horizon(u, v):
    return max(len(u.head), len(v.head)) + 50 * math.lcm(u.period, v.period)


class TestVerdicts:
    """Verdict helpers"""

    def test_mirror(self):
        assert Verdict.STRICTLY_BETTER.mirror() is Verdict.STRICTLY_WORSE
        assert Verdict.EQUIVALENT.mirror() is Verdict.EQUIVALENT
        assert Verdict.INCOMPARABLE.mirror() is Verdict.INCOMPARABLE

    def test_relations(self):
        assert verdict_from_relations(True, True) is Verdict.EQUIVALENT
        assert verdict_from_relations(True, False) is Verdict.STRICTLY_BETTER
        assert verdict_from_relations(False, True) is Verdict.STRICTLY_WORSE
        assert verdict_from_relations(False, False) is Verdict.INCOMPARABLE

    def test_at_least_as_good(self):
        assert Verdict.STRICTLY_BETTER.at_least_as_good
        assert Verdict.EQUIVALENT.at_least_as_good
        assert not Verdict.UNKNOWN.at_least_as_good

    def test_result_mirror_keeps_witness(self):
        result = ComparisonResult(Verdict.STRICTLY_BETTER, {"k": 2})
        assert result.mirror() == ComparisonResult(Verdict.STRICTLY_WORSE, {"k": 2})


class TestDifferenceProfile:
    """D_T = sum_{t<=T} (u_t - v_t)"""

    def test_profile_reproduces_partial_differences(self):
        u = make_ep([2, -1, 0], [1, 3])
        v = make_ep([1], [0, 2, 2])
        profile = difference_profile(u, v)
        running = F(0)
        assert profile.partial_difference(0) == 0
        for T in range(1, 60):
            running += u.value_at(T) - v.value_at(T)
            assert profile.partial_difference(T) == running

    def test_drift_is_one_period_of_growth(self):
        profile = difference_profile(constant(1), constant(0))
        assert profile.drift == 1
        assert profile.period == 1

    def test_profile_needs_ep(self):
        with pytest.raises(DomainMismatchError):
            difference_profile(builtin_generator("doubling_blocks"), constant(0))

    def test_fixed_step_dominates(self, alternating_pair):
        u, v = alternating_pair
        profile = difference_profile(u, v)
        assert fixed_step_dominates(profile, 1)
        assert fixed_step_dominates(difference_profile(v, u), 2)
        assert not fixed_step_dominates(difference_profile(v, u), 1)
        with pytest.raises(ParameterError):
            fixed_step_dominates(profile, 0)

    def test_first_fixed_step_shortfall(self, alternating_pair):
        u, v = alternating_pair
        assert first_fixed_step_shortfall(difference_profile(u, v), 1) is None
        assert first_fixed_step_shortfall(difference_profile(v, u), 1) == 1
        assert first_fixed_step_shortfall(difference_profile(v, u), 2) is None
        # a lead of 3 that loses 1 every second generation
        profile = difference_profile(make_ep([3], [0, -1]), constant(0))
        assert [first_fixed_step_shortfall(profile, k) for k in (1, 2, 3)] == [9, 5, 3]


class TestExactProcedures:
    """Catching-up and fixed-step catching-up on EpStreams"""

    def test_alternating_pair(self, alternating_pair):
        """C strictly prefers (1,0,...) while fixC finds them equivalent with k = 2"""
        u, v = alternating_pair
        catching_up = compare_catching_up(u, v)
        fixed_step = compare_fixed_step(u, v)
        assert catching_up.verdict is Verdict.STRICTLY_BETTER
        assert fixed_step.verdict is Verdict.EQUIVALENT
        assert fixed_step.witness["k"] == 2

    def test_alternating_pair_is_cesaro_equivalent(self, alternating_pair):
        result = compare_cesaro(*alternating_pair)
        assert result.verdict is Verdict.EQUIVALENT
        assert result.witness == {"mean_u": F(1, 2), "mean_v": F(1, 2)}

    def test_incomparable_pair(self):
        """(1,-2,1) repeated against 0: D oscillates through both signs"""
        result = compare_catching_up(make_ep([], [1, -2, 1]), constant(0))
        assert result.verdict is Verdict.INCOMPARABLE
        assert compare_fixed_step(make_ep([], [1, -2, 1]), constant(0)).verdict is Verdict.EQUIVALENT

    def test_positive_drift(self):
        u = make_ep([-5, -5], [1])
        result = compare_fixed_step(u, constant(0))
        assert compare_catching_up(u, constant(0)).verdict is Verdict.STRICTLY_BETTER
        assert result.verdict is Verdict.STRICTLY_BETTER
        k = result.witness["k"]
        assert all(sum(u.prefix(k * T), F(0)) >= 0 for T in range(1, 50))

    def test_negative_drift_mirrors(self):
        u = make_ep([3], [0, -1])
        assert compare_fixed_step(u, constant(0)).verdict is Verdict.STRICTLY_WORSE
        assert compare_catching_up(u, constant(0)).verdict is Verdict.STRICTLY_WORSE

    def test_antisymmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            u, v = random_stream(rng), random_stream(rng)
            for procedure in (compare_catching_up, compare_fixed_step, compare_cesaro):
                assert procedure(u, v).verdict is procedure(v, u).verdict.mirror()

    def test_dispatcher(self, alternating_pair):
        assert compare_streams(*alternating_pair, "C").verdict is Verdict.STRICTLY_BETTER
        assert compare_streams(*alternating_pair, "fixC").verdict is Verdict.EQUIVALENT
        with pytest.raises(ParameterError):
            compare_streams(*alternating_pair, "lexicographic")

    def test_catching_up_implies_fixed_step(self):
        """u >=C v implies u >=fixC v on 1000 seeded pairs"""
        rng = np.random.default_rng(1)
        violations = 0
        for _ in range(1000):
            u, v = random_stream(rng), random_stream(rng)
            violations += not check_C_implies_fixC(u, v)
            violations += not check_C_implies_fixC(v, u)
        assert violations == 0


class TestBruteForceOracle:
    """The decision procedures against the finite-horizon oracle"""

    def test_alternating_pair(self, alternating_pair):
        u, v = alternating_pair
        assert brute_force_compare(u, v, "C", 200).verdict is Verdict.STRICTLY_BETTER
        assert brute_force_compare(u, v, "fixC", 200).verdict is Verdict.EQUIVALENT

    def test_incomparable_pair(self):
        u, v = make_ep([], [1, -2, 1]), constant(0)
        assert brute_force_compare(u, v, "C", oracle_horizon(u, v)).verdict is Verdict.INCOMPARABLE

    def test_horizon_too_short(self, alternating_pair):
        with pytest.raises(ParameterError):
            brute_force_compare(*alternating_pair, "C", 50)

    def test_bad_criterion(self, alternating_pair):
        with pytest.raises(ParameterError):
            brute_force_compare(*alternating_pair, "cesaro", 500)

    def test_agreement_on_random_pairs(self):
        """Zero disagreements on 1000 pairs; Unknown oracle verdicts are excluded and counted"""
        rng = np.random.default_rng(3)
        disagreements = []
        unknown = {"C": 0, "fixC": 0}
        exact = {"C": compare_catching_up, "fixC": compare_fixed_step}
        pairs = 1000
        for _ in range(pairs):
            u, v = random_stream(rng), random_stream(rng)
            horizon = oracle_horizon(u, v)
            for criterion, procedure in exact.items():
                oracle = brute_force_compare(u, v, criterion, horizon, kmax=12).verdict
                if oracle is Verdict.UNKNOWN:
                    unknown[criterion] += 1
                elif oracle is not procedure(u, v).verdict:
                    disagreements.append((criterion, u, v))
        assert disagreements == []
        assert unknown["C"] < 0.05 * pairs
        assert unknown["fixC"] < 0.05 * pairs


PROCEDURES = {"C": compare_catching_up, "fixC": compare_fixed_step, "cesaro": compare_cesaro}


def at_least_as_good(procedure, u, v):
    return procedure(u, v).verdict.at_least_as_good


class TestOrderingProperties:
    """Order-theoretic properties of the exact procedures on seeded random streams"""

    def test_reflexivity(self):
        rng = np.random.default_rng(21)
        for _ in range(300):
            u = random_stream(rng)
            for name, procedure in PROCEDURES.items():
                assert procedure(u, u).verdict is Verdict.EQUIVALENT, (name, u)

    def test_transitivity(self):
        """u >= v and v >= w imply u >= w on 1000 triples"""
        rng = np.random.default_rng(22)
        violations = []
        for _ in range(1000):
            u, v, w = random_stream(rng), random_stream(rng), random_stream(rng)
            for name, procedure in PROCEDURES.items():
                for x, y, z in ((u, v, w), (w, v, u)):
                    if at_least_as_good(procedure, x, y) and at_least_as_good(procedure, y, z):
                        if not at_least_as_good(procedure, x, z):
                            violations.append((name, x, y, z))
        assert violations == []

    def test_cesaro_refines_both_criteria(self):
        """A strict catching-up preference never reverses the Cesaro averages"""
        rng = np.random.default_rng(23)
        strict = 0
        for _ in range(1000):
            u, v = random_stream(rng), random_stream(rng)
            for name in ("C", "fixC"):
                if PROCEDURES[name](u, v).verdict is Verdict.STRICTLY_BETTER:
                    strict += 1
                    assert at_least_as_good(compare_cesaro, u, v), (name, u, v)
        assert strict > 0

    def test_tail_dominance(self):
        """tail(u, T) >= tail(v, T) + eps makes u strictly better under both criteria, whatever the heads"""
        rng = np.random.default_rng(24)
        noise = GeneratorConfig(max_head=2, max_cycle=3, low=0, high=2, corpus_size=1)
        for _ in range(300):
            v = random_stream(rng)
            T = int(rng.integers(1, 6))
            eps = (F(1), F(1, 2), F(1, 4))[int(rng.integers(3))]
            head = [F(int(x)) for x in rng.integers(-3, 4, size=T)]
            u = prepend(head, add(add(tail(v, T), constant(eps)), random_stream(rng, noise)))
            assert compare_catching_up(u, v).verdict is Verdict.STRICTLY_BETTER, (u, v)
            assert compare_fixed_step(u, v).verdict is Verdict.STRICTLY_BETTER, (u, v)

    def test_unique_consistent_verdict(self):
        """Every pair gets exactly one decided verdict, the one its two relations determine"""
        rng = np.random.default_rng(25)
        for _ in range(1000):
            u, v = random_stream(rng), random_stream(rng)
            for name, procedure in PROCEDURES.items():
                verdict = procedure(u, v).verdict
                assert verdict is not Verdict.UNKNOWN
                expected = verdict_from_relations(at_least_as_good(procedure, u, v), at_least_as_good(procedure, v, u))
                assert verdict is expected, (name, u, v)
            assert compare_cesaro(u, v).verdict is not Verdict.INCOMPARABLE
