#!/usr/bin/env python3
"""
test_axiom_harness.py - Part of equistream

Tests for the rule registry, the axiom checks, suites and counterexample search
"""
import json
import math
import os
import sys
from fractions import Fraction

import pytest

# Add the parent directory to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import axiom_harness as harness
from axiom_harness import (
    AXIOMS,
    BEYOND_EP_FAILURES,
    INDEPENDENCE_TABLE,
    SUITES,
    AxiomReport,
    GeneratorConfig,
    HarnessError,
    HarnessSettings,
    Instance,
    Rule,
    UnknownAxiomError,
    UnknownRuleError,
    Witness,
    builtin_rule,
    random_corpus,
    register_rule,
    replay_witness,
    run_independence_check,
    run_suite,
    search_counterexample,
    shrink_streams,
    witness_from_dict,
)
from orderings import ComparisonResult, Verdict, brute_force_compare, compare_catching_up
from stream_core import (
    DomainMismatchError,
    ParameterError,
    builtin_generator,
    constant,
    make_ep,
    scale,
)

F = Fraction


@pytest.fixture(scope="module")
def corpus():
    return random_corpus(500, seed=42)


class TestRules:
    """The rule registry"""

    def test_dictator_compares_the_first_generation(self):
        result = builtin_rule("dictator_t1").compare(make_ep([1], [0]), constant(0))
        assert result.verdict is Verdict.STRICTLY_BETTER

    def test_trivial_indifference(self):
        rule = builtin_rule("trivial_indifference")
        assert rule.compare(make_ep([9], [1]), constant(-3)).verdict is Verdict.EQUIVALENT

    def test_inf_rule(self):
        rule = builtin_rule("inf_rule")
        assert rule.compare(make_ep([], [1, 2]), make_ep([], [1, 3])).verdict is Verdict.EQUIVALENT
        assert rule.compare(make_ep([-1], [5]), constant(0)).verdict is Verdict.STRICTLY_WORSE

    def test_liminf_value_ignores_the_head(self):
        rule = builtin_rule("liminf_value")
        assert rule.compare(make_ep([-1], [5]), constant(0)).verdict is Verdict.STRICTLY_BETTER

    def test_liminf_mean_on_ep_is_the_cesaro_average(self):
        rule = builtin_rule("liminf_mean")
        assert rule.compare(make_ep([], [3, 0]), constant(1)).verdict is Verdict.STRICTLY_BETTER

    def test_liminf_mean_on_bounded_streams(self):
        rule = builtin_rule("liminf_mean")
        high = builtin_generator("harmonic_shift", {"c": 1})
        low = builtin_generator("harmonic_shift", {"c": 0})
        assert rule.compare(high, low).verdict is Verdict.STRICTLY_BETTER
        assert rule.compare(high, high).verdict is Verdict.UNKNOWN

    def test_flags(self):
        assert builtin_rule("cesaro").complete
        assert builtin_rule("cesaro").mean_determined
        assert builtin_rule("liminf_mean").mean_determined
        assert not builtin_rule("catching_up").complete
        assert builtin_rule("dictator_t1").domain == "general"
        assert builtin_rule("liminf_value").domain == "ep"

    def test_unknown_rule(self):
        with pytest.raises(UnknownRuleError):
            builtin_rule("leximin")
        with pytest.raises(KeyError):
            builtin_rule("leximin")

    def test_register_rule(self):
        rule = register_rule(Rule("always_better", lambda u, v: ComparisonResult(Verdict.STRICTLY_BETTER)))
        try:
            assert builtin_rule("always_better") is rule
            assert "always_better" in harness.rule_ids()
        finally:
            harness._RULES.pop("always_better")
        with pytest.raises(ParameterError):
            register_rule(Rule("bad_domain", rule.compare, domain="reals"))


class TestCorpus:
    """Seeded random EpStreams"""

    def test_corpus_is_deterministic(self):
        assert random_corpus(20, seed=5) == random_corpus(20, seed=5)
        assert random_corpus(20, seed=5) != random_corpus(20, seed=6)

    def test_generator_shape(self):
        cfg = GeneratorConfig(max_head=2, max_cycle=3, low=0, high=1, corpus_size=50)
        for s in random_corpus(cfg.corpus_size, 1, cfg):
            assert len(s.head) <= 2
            assert s.period <= 3
            assert all(x in (0, 1) for x in s.values)

    def test_invalid_config(self):
        with pytest.raises(ParameterError):
            GeneratorConfig(low=2, high=1)


class TestAxiomChecks:
    """Single axioms against single rules"""

    def test_catalog(self):
        assert len(AXIOMS) == 14
        assert set(SUITES["theorem1"]) == set(AXIOMS)
        assert set(SUITES["appendix_b"]) == set(INDEPENDENCE_TABLE)

    def test_cesaro_has_incremental_equity(self, corpus):
        report = harness.test_axiom("cesaro", "incremental_equity", corpus, 200, seed=1)
        assert report.failures == 0
        assert report.witness is None
        assert report.mode == "exact"
        assert report.trials == 200

    def test_dictator_fails_finite_anonymity(self, corpus):
        report = harness.test_axiom("dictator_t1", "finite_anonymity", corpus, 200, seed=1)
        assert report.failures > 0
        assert report.witness is not None
        assert replay_witness("dictator_t1", report)
        assert not replay_witness("cesaro", report)

    def test_dictator_swap_witness(self):
        instance = Instance({"u": make_ep([1, 0], [0])}, {"horizon": 2, "mapping": [2, 1]})
        outcome = AXIOMS["finite_anonymity"].evaluate(builtin_rule("dictator_t1"), instance, HarnessSettings())
        assert not outcome.ok
        assert outcome.verdicts == {"u_vs_permuted": "StrictlyBetter"}

    def test_inf_rule_additivity_witness(self):
        """inf 0 on both sides until generation 1 is raised by 1"""
        instance = Instance({"u": constant(0), "v": make_ep([0], [1])}, {"t": 1, "alpha": F(1)})
        outcome = AXIOMS["one_generation_additivity"].evaluate(builtin_rule("inf_rule"), instance, HarnessSettings())
        assert not outcome.ok
        assert outcome.verdicts == {"before": "Equivalent", "after": "StrictlyWorse"}

    def test_premises_are_rechecked(self):
        """An instance that does not meet the Pareto premise is vacuously fine"""
        instance = Instance({"u": constant(0), "v": constant(0)}, {"epsilon": F(1)})
        outcome = AXIOMS["uniform_pareto"].evaluate(builtin_rule("trivial_indifference"), instance, HarnessSettings())
        assert outcome.ok

    def test_modes(self, corpus):
        assert harness.test_axiom("cesaro", "continuity_bounded", corpus, 5, seed=0).mode == "bounded-horizon"
        assert harness.test_axiom("cesaro", "fixed_step_replication_consistency", corpus, 5, seed=0).mode == "exact"
        assert (
            harness.test_axiom("liminf_mean", "fixed_step_replication_consistency", corpus, 5, seed=0).mode
            == "exact"
        )
        assert (
            harness.test_axiom("inf_rule", "fixed_step_replication_consistency", corpus, 5, seed=0).mode
            == "bounded-horizon"
        )

    def test_liminf_mean_keeps_replication_consistency_on_ep(self, corpus):
        """On EpStreams liminf_T mu_T is the Cesaro average, so the exact check never fails"""
        report = harness.test_axiom("liminf_mean", "fixed_step_replication_consistency", corpus, 500, seed=0)
        assert report.mode == "exact"
        assert report.failures == 0
        assert not report.refutes

    def test_replication_consistency_on_a_slowly_losing_pair(self):
        """u leads v by 1, then loses 1 every 64 generations: D_T < 0 first at T = 129"""
        d = make_ep([1], [0] * 63 + [-1])
        instance = Instance({"u": constant(0), "v": scale(d, -1)}, {"k": 1})
        check = AXIOMS["fixed_step_replication_consistency"]

        exact = check.evaluate(builtin_rule("liminf_mean"), instance, HarnessSettings())
        assert exact.ok
        assert exact.verdicts == {"premise": "mu_(kT)(u) < mu_(kT)(v) first at T=129 with k=1"}

        windowed = Rule("liminf_mean_windowed", builtin_rule("liminf_mean").compare, domain="general")
        outcome = check.evaluate(windowed, instance, HarnessSettings())
        assert not outcome.ok
        assert outcome.verdicts == {"u_vs_v": "StrictlyWorse", "premise_window": "T=1..64", "mean_shortfall_T": "129"}
        assert check.evaluate(windowed, instance, HarnessSettings(consistency_window=200)).ok

    def test_bounded_failures_do_not_refute(self):
        witness = Witness("continuity_bounded", 0, Instance({"u": constant(0)}), {})
        assert not AxiomReport("continuity_bounded", "cesaro", 10, 1, witness, "bounded-horizon", 0).refutes
        report = AxiomReport("finite_anonymity", "dictator_t1", 10, 1, witness, "exact", 0)
        assert report.refutes
        assert report.to_dict()["refutes"] is True

    def test_reports_are_deterministic(self, corpus):
        first = harness.test_axiom("inf_rule", "periodic_additivity", corpus, 100, seed=9)
        second = harness.test_axiom("inf_rule", "periodic_additivity", corpus, 100, seed=9)
        assert first.to_dict() == second.to_dict()

    def test_parallel_matches_serial(self, corpus):
        serial = harness.test_axiom("inf_rule", "one_generation_additivity", corpus, 100, seed=4)
        parallel = harness.test_axiom(
            "inf_rule", "one_generation_additivity", corpus, 100, seed=4, settings=HarnessSettings(workers=4)
        )
        assert serial.to_dict() == parallel.to_dict()

    def test_stop_at_first(self, corpus):
        report = harness.test_axiom("trivial_indifference", "uniform_pareto", corpus, 1000, seed=0, stop_at_first=True)
        assert report.failures == 1
        assert report.trials == report.witness.trial + 1

    def test_eventual_periodic_reading(self, corpus):
        settings = HarnessSettings(periodic_reading="eventual")
        report = harness.test_axiom("cesaro", "periodic_additivity", corpus, 100, seed=2, settings=settings)
        assert report.failures == 0

    def test_errors(self, corpus):
        with pytest.raises(UnknownAxiomError):
            harness.test_axiom("cesaro", "strong_pareto", corpus, 10, seed=0)
        with pytest.raises(ParameterError):
            harness.test_axiom("cesaro", "finite_anonymity", [], 10, seed=0)
        with pytest.raises(DomainMismatchError):
            harness.test_axiom("cesaro", "finite_anonymity", [builtin_generator("doubling_blocks")], 10, seed=0)
        with pytest.raises(ParameterError):
            HarnessSettings(periodic_reading="sometimes")

    def test_report_invariant(self):
        with pytest.raises(HarnessError):
            AxiomReport("finite_anonymity", "cesaro", 10, 1, None, "exact", 0)


class TestWitnessSerialization:
    """Witnesses survive a JSON round trip"""

    def test_round_trip_replays(self, corpus):
        report = harness.test_axiom("trivial_indifference", "uniform_pareto", corpus, 50, seed=3)
        document = json.loads(json.dumps(report.to_dict()))
        witness = witness_from_dict(document["witness"])
        assert witness.instance == report.witness.instance
        assert isinstance(witness.instance.params["epsilon"], Fraction)
        assert replay_witness("trivial_indifference", document["witness"])

    def test_stream_specs_in_witness(self, corpus):
        report = harness.test_axiom("dictator_t1", "fixed_step_anonymity", corpus, 200, seed=3)
        streams = report.to_dict()["witness"]["streams"]
        assert streams["u"]["type"] == "ep"
        assert all("/" in x for x in streams["u"]["cycle"])


class TestSuites:
    """Positive and independence suites"""

    def test_cesaro_passes_every_axiom(self, corpus):
        """500-stream corpus, 200 trials per axiom, no failures"""
        reports = run_suite("cesaro", SUITES["theorem1"], corpus, 200, seed=0)
        assert [r.axiom_id for r in reports] == list(SUITES["theorem1"])
        failing = {r.axiom_id: r.witness.to_dict() for r in reports if r.failures}
        assert failing == {}

    @pytest.mark.parametrize("rule_id", sorted(INDEPENDENCE_TABLE))
    def test_independence_rows(self, corpus, rule_id):
        """Each rule fails its designated axioms and keeps the rest of its row"""
        result = run_independence_check(rule_id, corpus, trials=200, seed=0, budget=10_000)
        failing, keeping = INDEPENDENCE_TABLE[rule_id]
        assert [r.axiom_id for r in result.designated] == list(failing)
        assert [r.axiom_id for r in result.kept] == list(keeping)
        for report in result.designated:
            assert report.failures > 0, report.axiom_id
            assert replay_witness(rule_id, report)
        assert {r.axiom_id: r.failures for r in result.kept if r.failures} == {}
        assert [r.axiom_id for r in result.beyond_ep] == list(BEYOND_EP_FAILURES.get(rule_id, ()))
        for report in result.beyond_ep:
            assert report.mode == "exact"
            assert report.passed, report.axiom_id
        assert result.ok

    def test_liminf_mean_row_has_no_ep_failure(self, corpus):
        """Its replication-consistency failure needs streams outside the eventually periodic class"""
        result = run_independence_check("liminf_mean", corpus, trials=200, seed=0)
        assert result.designated == []
        assert [r.axiom_id for r in result.beyond_ep] == ["fixed_step_replication_consistency"]
        assert result.to_dict()["beyond_ep"][0]["refutes"] is False
        assert result.ok

    def test_unknown_independence_rule(self, corpus):
        with pytest.raises(UnknownRuleError):
            run_independence_check("cesaro", corpus, 10, seed=0)


class TestSearch:
    """Randomized counterexample search with shrinking"""

    def test_fixed_step_is_strictly_weaker(self):
        witness = search_counterexample("fixC_strictly_weaker_than_C", seed=0, budget=10_000)
        assert witness is not None
        assert witness.verdicts["catching_up"] != witness.verdicts["fixed_step"]

    def test_incomparable_pair(self):
        witness = search_counterexample("C_incomparable_pair", seed=0, budget=10_000)
        assert witness is not None
        u, v = witness.instance.streams["u"], witness.instance.streams["v"]
        assert compare_catching_up(u, v).verdict is Verdict.INCOMPARABLE
        horizon = max(len(u.head), len(v.head)) + 50 * math.lcm(u.period, v.period)
        assert brute_force_compare(u, v, "C", horizon).verdict is Verdict.INCOMPARABLE

    def test_implication_has_no_counterexample(self):
        assert search_counterexample("C_implies_fixC_violation", seed=0, budget=10_000) is None

    def test_search_is_deterministic(self):
        first = search_counterexample("fixC_strictly_weaker_than_C", seed=5, budget=1000)
        second = search_counterexample("fixC_strictly_weaker_than_C", seed=5, budget=1000)
        assert first == second

    def test_axiom_failure_search(self):
        witness = search_counterexample("axiom_failure:dictator_t1:finite_anonymity", seed=0, budget=1000)
        assert witness is not None
        assert witness.property_id == "finite_anonymity"
        assert replay_witness("dictator_t1", witness)

    def test_unknown_property(self):
        with pytest.raises(UnknownAxiomError):
            search_counterexample("strong_pareto")
        with pytest.raises(UnknownAxiomError):
            search_counterexample("axiom_failure:cesaro")
        with pytest.raises(UnknownAxiomError):
            search_counterexample("axiom_failure:cesaro:strong_pareto", budget=10)

    def test_shrinking_is_greedy(self):
        streams = {"u": make_ep([3, 2], [5, 1])}
        shrunk = shrink_streams(streams, lambda st: st["u"].value_at(1) > 0)
        assert shrunk == {"u": constant(1)}
