#!/usr/bin/env python3
"""
axiom_harness.py - Part of equistream

Executable axioms, a registry of comparison rules and randomized
counterexample search.

Every axiom is an AxiomCheck: `draw` builds an Instance (streams plus
parameters) from the corpus and a per-trial generator, `evaluate` decides the
instance for a rule and re-checks every premise from the stored streams, so a
witness can be replayed, shrunk or loaded back from JSON and still mean the
same thing.

Axioms whose premise quantifies over infinitely many T or k are checked on a
finite window and reported with mode "bounded-horizon": such a run never
certifies the axiom, and its failures hold on the window only, so they are not
reported as refutations.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

import monitoring
from evaluators import cesaro_average, cesaro_estimate
from orderings import (
    ComparisonResult,
    Verdict,
    check_C_implies_fixC,
    compare_catching_up,
    compare_cesaro,
    compare_fixed_step,
    difference_profile,
    first_fixed_step_shortfall,
    verdict_from_sign,
)
from stream_core import (
    DomainMismatchError,
    EpStream,
    FinitePermutation,
    FixedStepPermutation,
    ParameterError,
    Stream,
    StreamError,
    add,
    add_indicator,
    apply_finite_permutation,
    apply_fixed_step_permutation,
    constant,
    format_rational,
    mean_complete,
    parse_stream_spec,
    prepend,
    replicate_prefix,
    scale,
    stream_to_spec,
    tail,
    to_rational,
    transfer,
)

logger = logging.getLogger("equistream.axiom_harness")

Corpus = Sequence[EpStream]

EXACT = "exact"
BOUNDED = "bounded-horizon"

EPSILONS = (Fraction(1), Fraction(1, 2), Fraction(1, 4))
ALPHAS = tuple(Fraction(x) for x in ("-3", "-2", "-1", "-1/2", "1/2", "1", "2", "3"))
SHORTFALLS = tuple(Fraction(x) for x in ("1/2", "1", "2", "3"))


class HarnessError(StreamError):
    """Base class for harness lookup errors"""


class UnknownRuleError(HarnessError, KeyError):
    pass


class UnknownAxiomError(HarnessError, KeyError):
    pass


# Rules


@dataclass(frozen=True)
class Rule:
    """A comparison rule under test.

    domain is "ep" for rules defined through the eventually periodic structure
    and "general" for rules that also read BoundedStreams. mean_determined
    marks rules whose verdict on two periodic streams is the sign of their
    cycle-mean difference.
    """

    id: str
    compare: Callable[[Any, Any], ComparisonResult]
    domain: str = "ep"
    complete: bool = True
    mean_determined: bool = False
    description: str = ""


def _trivial_indifference(u: Stream, v: Stream) -> ComparisonResult:
    return ComparisonResult(Verdict.EQUIVALENT)


def _dictator_t1(u: Stream, v: Stream) -> ComparisonResult:
    first_u, first_v = u.value_at(1), v.value_at(1)
    return ComparisonResult(verdict_from_sign(first_u - first_v), {"u1": first_u, "v1": first_v})


def _inf_rule(u: EpStream, v: EpStream) -> ComparisonResult:
    inf_u, inf_v = min(u.values), min(v.values)
    return ComparisonResult(verdict_from_sign(inf_u - inf_v), {"inf_u": inf_u, "inf_v": inf_v})


def _liminf_value(u: EpStream, v: EpStream) -> ComparisonResult:
    low_u, low_v = min(u.cycle), min(v.cycle)
    return ComparisonResult(verdict_from_sign(low_u - low_v), {"liminf_u": low_u, "liminf_v": low_v})


# liminf_T mu_T estimates closer than this are left Unknown on BoundedStreams
LIMINF_MEAN_RESOLUTION = 1e-3
LIMINF_MEAN_HORIZON = 1 << 16


def _liminf_mean_value(s: Stream) -> Union[Fraction, float]:
    if isinstance(s, EpStream):
        return cesaro_average(s)
    return cesaro_estimate(s, 1, LIMINF_MEAN_HORIZON).lower


def _liminf_mean(u: Stream, v: Stream) -> ComparisonResult:
    low_u, low_v = _liminf_mean_value(u), _liminf_mean_value(v)
    witness = {"liminf_mean_u": low_u, "liminf_mean_v": low_v}
    if not (isinstance(u, EpStream) and isinstance(v, EpStream)):
        if abs(low_u - low_v) < LIMINF_MEAN_RESOLUTION:
            return ComparisonResult(Verdict.UNKNOWN, witness)
    return ComparisonResult(verdict_from_sign(low_u - low_v), witness)


_RULES: Dict[str, Rule] = {}


def register_rule(rule: Rule) -> Rule:
    if rule.domain not in ("ep", "general"):
        raise ParameterError(f"rule {rule.id!r}: domain must be 'ep' or 'general'")
    _RULES[rule.id] = rule
    return rule


for _rule in (
    Rule("cesaro", compare_cesaro, mean_determined=True, description="Cesaro average ordering"),
    Rule("catching_up", compare_catching_up, complete=False, description="catching-up quasi-ordering"),
    Rule("fixed_step", compare_fixed_step, complete=False, mean_determined=True,
         description="fixed-step catching-up quasi-ordering"),
    Rule("trivial_indifference", _trivial_indifference, domain="general",
         description="every pair is indifferent"),
    Rule("dictator_t1", _dictator_t1, domain="general", description="compare the first generation"),
    Rule("inf_rule", _inf_rule, description="compare inf_t u_t"),
    Rule("liminf_value", _liminf_value, description="compare liminf_t u_t"),
    Rule("liminf_mean", _liminf_mean, domain="general", mean_determined=True,
         description="compare liminf_T mu_T"),
):
    register_rule(_rule)


def rule_ids() -> List[str]:
    return list(_RULES)


def builtin_rule(rule_id: str) -> Rule:
    try:
        return _RULES[rule_id]
    except KeyError:
        raise UnknownRuleError(f"unknown rule {rule_id!r}; registered: {', '.join(_RULES)}") from None


def _resolve_rule(rule: Union[str, Rule]) -> Rule:
    return builtin_rule(rule) if isinstance(rule, str) else rule


# Corpus


@dataclass(frozen=True)
class GeneratorConfig:
    """Shape of random EpStreams: |head| ~ U{0..max_head}, |cycle| ~ U{1..max_cycle}"""

    max_head: int = 4
    max_cycle: int = 6
    low: int = -3
    high: int = 3
    corpus_size: int = 500

    def __post_init__(self) -> None:
        if self.max_head < 0 or self.max_cycle < 1 or self.low > self.high or self.corpus_size < 1:
            raise ParameterError(f"invalid generator config {self}")


def random_stream(rng: np.random.Generator, cfg: GeneratorConfig = GeneratorConfig()) -> EpStream:
    h = int(rng.integers(0, cfg.max_head + 1))
    p = int(rng.integers(1, cfg.max_cycle + 1))
    entries = [Fraction(int(x)) for x in rng.integers(cfg.low, cfg.high + 1, size=h + p)]
    return EpStream(tuple(entries[:h]), tuple(entries[h:]))


def random_corpus(size: int, seed: int, cfg: GeneratorConfig = GeneratorConfig()) -> List[EpStream]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    return [random_stream(rng, cfg) for _ in range(size)]


# Axioms


@dataclass(frozen=True)
class HarnessSettings:
    continuity_k: int = 64
    consistency_window: int = 64
    offset_periods: Tuple[int, int] = (32, 40)
    fsrc_kmax: int = 4
    max_index: int = 8
    periodic_reading: str = "pure"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.periodic_reading not in ("pure", "eventual"):
            raise ParameterError("periodic_reading must be 'pure' or 'eventual'")
        low, high = self.offset_periods
        if not 1 <= low <= high:
            raise ParameterError(f"invalid offset periods {self.offset_periods}")
        if min(self.continuity_k, self.consistency_window, self.fsrc_kmax, self.workers) < 1 or self.max_index < 2:
            raise ParameterError(f"invalid harness settings {self}")

    def describe(self) -> Dict[str, Any]:
        return {
            "continuity_k": self.continuity_k,
            "consistency_window": self.consistency_window,
            "offset_periods": list(self.offset_periods),
            "fsrc_kmax": self.fsrc_kmax,
            "periodic_reading": self.periodic_reading,
        }


@dataclass(frozen=True)
class Instance:
    streams: Dict[str, EpStream]
    params: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Outcome:
    ok: bool
    verdicts: Dict[str, str]


DrawFn = Callable[[np.random.Generator, Corpus, HarnessSettings], Instance]
EvaluateFn = Callable[[Rule, Instance, HarnessSettings], Outcome]


@dataclass(frozen=True)
class AxiomCheck:
    id: str
    draw: DrawFn
    evaluate: EvaluateFn
    bounded: bool = False
    description: str = ""

    def mode(self, rule: Rule) -> str:
        if self.id == "fixed_step_replication_consistency":
            return EXACT if rule.mean_determined else BOUNDED
        return BOUNDED if self.bounded else EXACT


AXIOMS: Dict[str, AxiomCheck] = {}


def _axiom(
    axiom_id: str, draw: DrawFn, bounded: bool = False, description: str = ""
) -> Callable[[EvaluateFn], EvaluateFn]:
    """Register the decorated evaluate function together with its draw function"""

    def decorator(evaluate: EvaluateFn) -> EvaluateFn:
        AXIOMS[axiom_id] = AxiomCheck(axiom_id, draw, evaluate, bounded, description)
        return evaluate

    return decorator


def _pick(rng: np.random.Generator, corpus: Corpus) -> EpStream:
    return corpus[int(rng.integers(len(corpus)))]


def _choice(rng: np.random.Generator, options: Sequence[Fraction]) -> Fraction:
    return options[int(rng.integers(len(options)))]


def _index(rng: np.random.Generator, settings: HarnessSettings) -> int:
    return int(rng.integers(1, settings.max_index + 1))


def _two_indices(rng: np.random.Generator, upper: int) -> Tuple[int, int]:
    i = int(rng.integers(1, upper + 1))
    j = int(rng.integers(1, upper))
    return i, j + (j >= i)


def _periodic_part(s: EpStream) -> EpStream:
    return tail(s, len(s.head))


def _pair_shape(u: EpStream, v: EpStream) -> Tuple[int, int]:
    return max(len(u.head), len(v.head)), math.lcm(u.period, v.period)


def _equivalence(result: ComparisonResult, name: str) -> Outcome:
    return Outcome(result.verdict == Verdict.EQUIVALENT, {name: result.verdict.value})


def _vacuous(reason: str) -> Outcome:
    return Outcome(True, {"premise": reason})


def _draw_single(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    return Instance({"u": _pick(rng, corpus)})


def _draw_pair(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    return Instance({"u": _pick(rng, corpus), "v": _pick(rng, corpus)})


def _draw_finite_permutation(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    horizon = int(rng.integers(2, settings.max_index + 1))
    mapping = [int(x) + 1 for x in rng.permutation(horizon)]
    return Instance({"u": _pick(rng, corpus)}, {"horizon": horizon, "mapping": mapping})


@_axiom("finite_anonymity", _draw_finite_permutation)
def _finite_anonymity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u = inst.streams["u"]
    pi = FinitePermutation(inst.params["horizon"], tuple(inst.params["mapping"]))
    return _equivalence(rule.compare(u, apply_finite_permutation(u, pi)), "u_vs_permuted")


def _draw_fixed_step_permutation(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    k = int(rng.integers(2, 5))
    blocks = [[int(x) + 1 for x in rng.permutation(k)] for _ in range(int(rng.integers(0, 4)))]
    tail_block = [int(x) + 1 for x in rng.permutation(k)]
    return Instance({"u": _pick(rng, corpus)}, {"step": k, "blocks": blocks, "tail": tail_block})


@_axiom("fixed_step_anonymity", _draw_fixed_step_permutation)
def _fixed_step_anonymity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u = inst.streams["u"]
    pi = FixedStepPermutation(
        inst.params["step"],
        tuple(tuple(b) for b in inst.params["blocks"]),
        tuple(inst.params["tail"]),
    )
    return _equivalence(rule.compare(u, apply_fixed_step_permutation(u, pi)), "u_vs_permuted")


_NOISE = GeneratorConfig(max_head=2, max_cycle=3, low=0, high=2, corpus_size=1)


def _draw_uniform_pareto(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    v = _pick(rng, corpus)
    eps = _choice(rng, EPSILONS)
    u = add(add(v, constant(eps)), random_stream(rng, _NOISE))
    return Instance({"u": u, "v": v}, {"epsilon": eps})


@_axiom("uniform_pareto", _draw_uniform_pareto)
def _uniform_pareto(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u, v = inst.streams["u"], inst.streams["v"]
    gap = add(u, scale(v, -1))
    if min(gap.values) < inst.params["epsilon"]:
        return _vacuous("u is not uniformly above v + epsilon")
    result = rule.compare(u, v)
    return Outcome(result.verdict == Verdict.STRICTLY_BETTER, {"u_vs_v": result.verdict.value})


def _draw_one_generation(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    inst = _draw_pair(rng, corpus, settings)
    return Instance(inst.streams, {"t": _index(rng, settings), "alpha": _choice(rng, ALPHAS)})


@_axiom("one_generation_additivity", _draw_one_generation)
def _one_generation_additivity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u, v = inst.streams["u"], inst.streams["v"]
    t, alpha = inst.params["t"], inst.params["alpha"]
    before = rule.compare(u, v).verdict
    after = rule.compare(add_indicator(u, t, alpha), add_indicator(v, t, alpha)).verdict
    return Outcome(before == after, {"before": before.value, "after": after.value})


def _additivity(rule: Rule, inst: Instance) -> Outcome:
    u, v, w = inst.streams["u"], inst.streams["v"], inst.streams["w"]
    before = rule.compare(u, v).verdict
    after = rule.compare(add(u, w), add(v, w)).verdict
    return Outcome(before == after, {"before": before.value, "after": after.value})


def _draw_periodic_triple(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    streams = {name: _pick(rng, corpus) for name in ("u", "v", "w")}
    if settings.periodic_reading == "pure":
        streams = {name: _periodic_part(s) for name, s in streams.items()}
    return Instance(streams)


@_axiom("periodic_additivity", _draw_periodic_triple)
def _periodic_additivity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    if settings.periodic_reading == "pure" and not all(s.is_periodic for s in inst.streams.values()):
        return _vacuous("streams are not periodic")
    return _additivity(rule, inst)


def _draw_triple(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    return Instance({name: _pick(rng, corpus) for name in ("u", "v", "w")})


@_axiom("full_additivity", _draw_triple)
def _full_additivity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    return _additivity(rule, inst)


def _draw_incremental_equity(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    i, j = _two_indices(rng, settings.max_index)
    return Instance({"u": _pick(rng, corpus)}, {"i": i, "j": j, "epsilon": _choice(rng, EPSILONS)})


@_axiom("incremental_equity", _draw_incremental_equity)
def _incremental_equity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u = inst.streams["u"]
    i, j, eps = inst.params["i"], inst.params["j"], inst.params["epsilon"]
    result = rule.compare(add_indicator(u, i, eps), add_indicator(u, j, eps))
    return _equivalence(result, "raised_i_vs_raised_j")


def _draw_weak_non_substitution(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    v = _pick(rng, corpus)
    eps = _choice(rng, EPSILONS)
    u = prepend([v.value_at(1) - _choice(rng, SHORTFALLS)], add(tail(v, 1), constant(eps)))
    return Instance({"u": u, "v": v}, {"epsilon": eps})


@_axiom("weak_non_substitution", _draw_weak_non_substitution)
def _weak_non_substitution(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u, v = inst.streams["u"], inst.streams["v"]
    eps = inst.params["epsilon"]
    if not (u.value_at(1) < v.value_at(1) and tail(u, 1) == add(tail(v, 1), constant(eps))):
        return _vacuous("u is not a first-generation sacrifice for a uniform later gain")
    result = rule.compare(u, v)
    return Outcome(result.verdict.at_least_as_good, {"u_vs_v": result.verdict.value})


_PERTURBATION = GeneratorConfig(max_head=2, max_cycle=4, low=-4, high=4, corpus_size=1)


def _draw_continuity(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    w = scale(random_stream(rng, _PERTURBATION), Fraction(1, 4))
    return Instance({"u": _pick(rng, corpus), "v": _pick(rng, corpus), "w": w}, {"K": settings.continuity_k})


@_axiom("continuity_bounded", _draw_continuity, bounded=True)
def _continuity(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u, v, w = inst.streams["u"], inst.streams["v"], inst.streams["w"]
    if max(abs(x) for x in w.values) > 1:
        return _vacuous("perturbation exceeds sup-norm 1")
    nearby = [add(u, scale(w, Fraction(1, k))) for k in range(1, inst.params["K"] + 1)]
    verdicts: Dict[str, str] = {}
    if all(rule.compare(x, v).verdict.at_least_as_good for x in nearby):
        verdict = rule.compare(u, v).verdict
        verdicts["u_vs_v"] = verdict.value
        if not verdict.at_least_as_good:
            return Outcome(False, verdicts)
    if all(rule.compare(v, x).verdict.at_least_as_good for x in nearby):
        verdict = rule.compare(v, u).verdict
        verdicts["v_vs_u"] = verdict.value
        if not verdict.at_least_as_good:
            return Outcome(False, verdicts)
    return Outcome(True, verdicts or {"premise": "not met"})


def _draw_consistency(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    u, v = _pick(rng, corpus), _pick(rng, corpus)
    h0, p = _pair_shape(u, v)
    low, high = settings.offset_periods
    start = h0 + p * int(rng.integers(low, high + 1))
    return Instance({"u": u, "v": v}, {"start": start, "window": settings.consistency_window})


def _windowed_consistency(rule: Rule, inst: Instance, build: Callable[[EpStream, int], EpStream]) -> Outcome:
    u, v = inst.streams["u"], inst.streams["v"]
    start, window = inst.params["start"], inst.params["window"]
    for T in range(start, start + window + 1):
        if not rule.compare(build(u, T), build(v, T)).verdict.at_least_as_good:
            return _vacuous(f"premise fails at T={T}")
    verdict = rule.compare(u, v).verdict
    return Outcome(verdict.at_least_as_good, {"u_vs_v": verdict.value})


@_axiom("mean_consistency_bounded", _draw_consistency, bounded=True)
def _mean_consistency(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    return _windowed_consistency(rule, inst, mean_complete)


@_axiom("replication_consistency_bounded", _draw_consistency, bounded=True)
def _replication_consistency(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    return _windowed_consistency(rule, inst, replicate_prefix)


def _draw_fixed_step_replication(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    k = int(rng.integers(1, settings.fsrc_kmax + 1))
    u = _pick(rng, corpus)
    if rng.random() < 0.5:
        return Instance({"u": u, "v": _pick(rng, corpus)}, {"k": k})
    # v = u - d, where d starts with a lead a and then loses 1 every L steps
    lead = int(rng.integers(1, 4))
    length = int(rng.integers(8, 65))
    losses = [Fraction(0)] * length
    losses[int(rng.integers(length))] = Fraction(-1)
    d = EpStream((Fraction(lead),), tuple(losses))
    return Instance({"u": u, "v": add(u, scale(d, -1))}, {"k": k})


@_axiom("fixed_step_replication_consistency", _draw_fixed_step_replication, bounded=True)
def _fixed_step_replication_consistency(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u, v, k = inst.streams["u"], inst.streams["v"], inst.params["k"]
    shortfall = first_fixed_step_shortfall(difference_profile(u, v), k)
    if rule.mean_determined:
        if shortfall is not None:
            return _vacuous(f"mu_(kT)(u) < mu_(kT)(v) first at T={shortfall} with k={k}")
    else:
        window = settings.consistency_window
        for T in range(1, window + 1):
            if not rule.compare(replicate_prefix(u, k * T), replicate_prefix(v, k * T)).verdict.at_least_as_good:
                return _vacuous(f"premise fails at T={T}")
    verdict = rule.compare(u, v).verdict
    verdicts = {"u_vs_v": verdict.value}
    if not rule.mean_determined and not verdict.at_least_as_good:
        verdicts["premise_window"] = f"T=1..{window}"
        verdicts["mean_shortfall_T"] = "none" if shortfall is None else str(shortfall)
    return Outcome(verdict.at_least_as_good, verdicts)


def _draw_transfer(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    i, j = _two_indices(rng, settings.max_index)
    return Instance({"u": _pick(rng, corpus)}, {"i": i, "j": j, "beta": _choice(rng, ALPHAS)})


@_axiom("lemma1_transfer", _draw_transfer)
def _transfer_equivalence(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u = inst.streams["u"]
    p = inst.params
    return _equivalence(rule.compare(u, transfer(u, p["i"], p["j"], p["beta"])), "u_vs_transferred")


def _draw_periodic_transfer(rng: np.random.Generator, corpus: Corpus, settings: HarnessSettings) -> Instance:
    horizon = int(rng.integers(2, settings.max_index + 1))
    i, j = _two_indices(rng, horizon)
    params = {"T": horizon, "i": i, "j": j, "beta": _choice(rng, ALPHAS)}
    return Instance({"u": _pick(rng, corpus)}, params)


@_axiom("lemma2_periodic_transfer", _draw_periodic_transfer)
def _periodic_transfer_equivalence(rule: Rule, inst: Instance, settings: HarnessSettings) -> Outcome:
    u = inst.streams["u"]
    p = inst.params
    if max(p["i"], p["j"]) > p["T"]:
        return _vacuous("transfer leaves the replicated block")
    original = replicate_prefix(u, p["T"])
    moved = replicate_prefix(transfer(u, p["i"], p["j"], p["beta"]), p["T"])
    return _equivalence(rule.compare(original, moved), "periodic_vs_transferred")


AXIOM_IDS = tuple(AXIOMS)


def axiom_check(axiom_id: str) -> AxiomCheck:
    try:
        return AXIOMS[axiom_id]
    except KeyError:
        raise UnknownAxiomError(f"unknown axiom {axiom_id!r}; catalog: {', '.join(AXIOMS)}") from None


# Reports


def _params_to_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _params_to_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_params_to_json(v) for v in value]
    if isinstance(value, Fraction):
        return format_rational(value)
    return value


def _params_from_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _params_from_json(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_params_from_json(v) for v in value]
    if isinstance(value, str):
        return to_rational(value, "params")
    return value


@dataclass(frozen=True)
class Witness:
    """A failing instance together with the verdicts that exposed it"""

    property_id: str
    trial: int
    instance: Instance
    verdicts: Dict[str, str]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "property": self.property_id,
            "trial": self.trial,
            "streams": {name: stream_to_spec(s) for name, s in self.instance.streams.items()},
            "params": _params_to_json(self.instance.params),
            "verdicts": dict(self.verdicts),
        }


def witness_from_dict(data: Dict[str, Any]) -> Witness:
    streams = {name: parse_stream_spec(spec, f"witness.streams.{name}") for name, spec in data["streams"].items()}
    return Witness(
        property_id=data["property"],
        trial=int(data.get("trial", 0)),
        instance=Instance(streams, _params_from_json(data.get("params", {}))),
        verdicts=dict(data.get("verdicts", {})),
    )


@dataclass(frozen=True)
class AxiomReport:
    axiom_id: str
    rule_id: str
    trials: int
    failures: int
    witness: Optional[Witness]
    mode: str
    seed: int
    settings: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if (self.failures > 0) != (self.witness is not None):
            raise HarnessError(f"{self.axiom_id}/{self.rule_id}: failures and witness disagree")

    @property
    def passed(self) -> bool:
        return self.failures == 0

    @property
    def refutes(self) -> bool:
        """Only exact failures refute the axiom for the rule"""
        return self.failures > 0 and self.mode == EXACT

    def to_dict(self) -> Dict[str, Any]:
        return {
            "axiom_id": self.axiom_id,
            "rule_id": self.rule_id,
            "mode": self.mode,
            "trials": self.trials,
            "failures": self.failures,
            "passed": self.passed,
            "refutes": self.refutes,
            "seed": self.seed,
            "settings": self.settings,
            "witness": self.witness.to_dict() if self.witness else None,
        }


def _trial_rng(seed: int, axiom_id: str, trial: int) -> np.random.Generator:
    # The axiom position keys the stream of instances, so every rule sees the same draws
    return np.random.default_rng(np.random.SeedSequence([seed, AXIOM_IDS.index(axiom_id), trial]))


def _check_corpus(rule: Rule, corpus: Sequence[Any]) -> None:
    if not corpus:
        raise ParameterError("axiom tests need a nonempty corpus")
    for i, s in enumerate(corpus):
        if not isinstance(s, EpStream):
            raise DomainMismatchError(
                f"corpus[{i}] is a {type(s).__name__}; rule {rule.id!r} is tested on EpStream corpora"
            )


def _run_trial(
    rule: Rule, check: AxiomCheck, corpus: Corpus, seed: int, settings: HarnessSettings, trial: int
) -> Tuple[Instance, Outcome]:
    instance = check.draw(_trial_rng(seed, check.id, trial), corpus, settings)
    outcome = check.evaluate(rule, instance, settings)
    if not outcome.ok:
        logger.debug(f"{check.id} on {rule.id}: trial {trial} fails with {outcome.verdicts}")
    return instance, outcome


@monitoring.track_axiom_run
def test_axiom(
    rule: Union[str, Rule],
    axiom_id: str,
    corpus: Sequence[EpStream],
    trials: int,
    seed: int,
    settings: Optional[HarnessSettings] = None,
    stop_at_first: bool = False,
) -> AxiomReport:
    """Run `trials` seeded instances of one axiom against one rule.

    With stop_at_first the run ends at the first failure and the report counts
    the trials actually executed.
    """
    rule = _resolve_rule(rule)
    check = axiom_check(axiom_id)
    settings = settings or HarnessSettings()
    _check_corpus(rule, corpus)
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")

    def run(trial: int) -> Tuple[Instance, Outcome]:
        return _run_trial(rule, check, corpus, seed, settings, trial)

    executed, failures, witness = 0, 0, None
    if stop_at_first or settings.workers == 1:
        for trial in range(trials):
            instance, outcome = run(trial)
            executed += 1
            if not outcome.ok:
                failures += 1
                if witness is None:
                    witness = Witness(axiom_id, trial, instance, outcome.verdicts)
                if stop_at_first:
                    break
    else:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            for trial, (instance, outcome) in enumerate(pool.map(run, range(trials))):
                executed += 1
                if not outcome.ok:
                    failures += 1
                    if witness is None:
                        witness = Witness(axiom_id, trial, instance, outcome.verdicts)

    mode = check.mode(rule)
    monitoring.track_axiom_trials(axiom_id, rule.id, executed, failures)
    logger.info(f"{axiom_id} on {rule.id}: {failures}/{executed} failing trials ({mode})")
    return AxiomReport(axiom_id, rule.id, executed, failures, witness, mode, seed, settings.describe())


def replay_witness(
    rule: Union[str, Rule],
    witness: Union[Witness, AxiomReport, Dict[str, Any]],
    settings: Optional[HarnessSettings] = None,
) -> bool:
    """True when the stored instance still violates the axiom for this rule"""
    rule = _resolve_rule(rule)
    if isinstance(witness, AxiomReport):
        witness = witness.witness
    elif isinstance(witness, dict):
        witness = witness_from_dict(witness)
    if witness is None:
        return False
    check = axiom_check(witness.property_id)
    return not check.evaluate(rule, witness.instance, settings or HarnessSettings()).ok


# Suites

# rule -> (axioms it must fail, axioms it keeps)
INDEPENDENCE_TABLE: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    "trivial_indifference": (
        ("uniform_pareto",),
        ("finite_anonymity", "fixed_step_anonymity", "continuity_bounded", "one_generation_additivity",
         "periodic_additivity", "mean_consistency_bounded", "fixed_step_replication_consistency"),
    ),
    "dictator_t1": (
        ("finite_anonymity", "fixed_step_anonymity"),
        ("uniform_pareto", "continuity_bounded", "one_generation_additivity", "periodic_additivity",
         "mean_consistency_bounded", "fixed_step_replication_consistency"),
    ),
    "inf_rule": (
        ("one_generation_additivity", "periodic_additivity"),
        ("uniform_pareto", "finite_anonymity", "fixed_step_anonymity", "continuity_bounded",
         "mean_consistency_bounded", "fixed_step_replication_consistency"),
    ),
    "liminf_value": (
        ("mean_consistency_bounded",),
        ("uniform_pareto", "finite_anonymity", "continuity_bounded", "one_generation_additivity"),
    ),
    "liminf_mean": (
        (),
        ("uniform_pareto", "fixed_step_anonymity", "continuity_bounded", "periodic_additivity"),
    ),
}

# rule -> axioms it fails only on streams outside the eventually periodic class.
# On EpStreams these rules agree with the Cesaro ordering, so the check is exact
# and must pass.
BEYOND_EP_FAILURES: Dict[str, Tuple[str, ...]] = {
    "liminf_mean": ("fixed_step_replication_consistency",),
}

SUITES: Dict[str, Tuple[str, ...]] = {
    "theorem1": AXIOM_IDS,
    "appendix_b": tuple(INDEPENDENCE_TABLE),
}


def run_suite(
    rule: Union[str, Rule],
    axiom_ids: Sequence[str],
    corpus: Sequence[EpStream],
    trials: int,
    seed: int,
    settings: Optional[HarnessSettings] = None,
) -> List[AxiomReport]:
    return [test_axiom(rule, axiom_id, corpus, trials, seed, settings) for axiom_id in axiom_ids]


@dataclass(frozen=True)
class IndependenceResult:
    rule_id: str
    designated: List[AxiomReport]
    kept: List[AxiomReport]
    beyond_ep: List[AxiomReport] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            all(r.failures > 0 for r in self.designated)
            and all(r.passed for r in self.kept)
            and all(r.passed for r in self.beyond_ep)
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "ok": self.ok,
            "designated": [r.to_dict() for r in self.designated],
            "kept": [r.to_dict() for r in self.kept],
            "beyond_ep": [r.to_dict() for r in self.beyond_ep],
        }


def run_independence_check(
    rule_id: str,
    corpus: Sequence[EpStream],
    trials: int,
    seed: int,
    budget: int = 10_000,
    settings: Optional[HarnessSettings] = None,
) -> IndependenceResult:
    """Designated axioms must fail within budget trials; kept and beyond-EP axioms must survive `trials`"""
    if rule_id not in INDEPENDENCE_TABLE:
        raise UnknownRuleError(f"rule {rule_id!r} has no independence table row")
    failing, keeping = INDEPENDENCE_TABLE[rule_id]
    designated = [
        test_axiom(rule_id, axiom_id, corpus, budget, seed, settings, stop_at_first=True)
        for axiom_id in failing
    ]
    kept = run_suite(rule_id, keeping, corpus, trials, seed, settings)
    beyond_ep = run_suite(rule_id, BEYOND_EP_FAILURES.get(rule_id, ()), corpus, trials, seed, settings)
    return IndependenceResult(rule_id, designated, kept, beyond_ep)


# Counterexample search


def _size(s: EpStream) -> Tuple[int, Fraction]:
    return len(s.head) + len(s.cycle), sum((abs(x) for x in s.values), Fraction(0))


def _shrink_candidates(s: EpStream) -> Iterator[Tuple[List[Fraction], List[Fraction]]]:
    head, cycle = list(s.head), list(s.cycle)
    for i in range(len(head)):
        yield head[:i] + head[i + 1 :], cycle
    for n in range(1, len(cycle)):
        yield head, cycle[:n]
    if len(cycle) > 1:
        for i in range(len(cycle)):
            yield head, cycle[:i] + cycle[i + 1 :]
    values = head + cycle
    for i, x in enumerate(values):
        if x == 0:
            continue
        replacements = [Fraction(0)]
        if abs(x) > 1:
            replacements.append(x - 1 if x > 0 else x + 1)
        for r in replacements:
            changed = values[:i] + [r] + values[i + 1 :]
            yield changed[: len(head)], changed[len(head) :]


def shrink_streams(streams: Dict[str, EpStream], still_fails: Callable[[Dict[str, EpStream]], bool]) -> Dict[str, EpStream]:
    """Greedy deterministic shrinking: take the first smaller candidate that keeps failing"""
    current = dict(streams)
    improved = True
    while improved:
        improved = False
        for name in sorted(current):
            size = _size(current[name])
            for head, cycle in _shrink_candidates(current[name]):
                candidate = EpStream(tuple(head), tuple(cycle))
                if _size(candidate) >= size:
                    continue
                trial = {**current, name: candidate}
                try:
                    fails = still_fails(trial)
                except StreamError:
                    fails = False
                if fails:
                    current = trial
                    improved = True
                    break
            if improved:
                break
    return current


def _differ_C_fixC(u: EpStream, v: EpStream) -> bool:
    return compare_catching_up(u, v).verdict != compare_fixed_step(u, v).verdict


def _C_incomparable(u: EpStream, v: EpStream) -> bool:
    return compare_catching_up(u, v).verdict == Verdict.INCOMPARABLE


def _C_implies_fixC_fails(u: EpStream, v: EpStream) -> bool:
    return not check_C_implies_fixC(u, v)


PAIR_PROPERTIES: Dict[str, Callable[[EpStream, EpStream], bool]] = {
    "fixC_strictly_weaker_than_C": _differ_C_fixC,
    "C_incomparable_pair": _C_incomparable,
    "C_implies_fixC_violation": _C_implies_fixC_fails,
}

# Properties that hold for every pair; a witness for one of these is a defect
INVARIANT_PROPERTIES = ("C_implies_fixC_violation",)

AXIOM_FAILURE_PREFIX = "axiom_failure:"


def property_ids() -> List[str]:
    return list(PAIR_PROPERTIES) + [f"{AXIOM_FAILURE_PREFIX}<rule_id>:<axiom_id>"]


def _pair_verdicts(u: EpStream, v: EpStream) -> Dict[str, str]:
    return {
        "catching_up": compare_catching_up(u, v).verdict.value,
        "fixed_step": compare_fixed_step(u, v).verdict.value,
    }


def search_counterexample(
    property_id: str,
    generator_config: Optional[GeneratorConfig] = None,
    seed: int = 0,
    budget: int = 10_000,
    settings: Optional[HarnessSettings] = None,
) -> Optional[Witness]:
    """Random search for a shrunk witness of the property, or None within budget"""
    cfg = generator_config or GeneratorConfig()
    if property_id.startswith(AXIOM_FAILURE_PREFIX):
        try:
            rule_id, axiom_id = property_id[len(AXIOM_FAILURE_PREFIX):].split(":")
        except ValueError:
            raise UnknownAxiomError(f"expected {AXIOM_FAILURE_PREFIX}<rule_id>:<axiom_id>, got {property_id!r}") from None
        return _search_axiom_failure(builtin_rule(rule_id), axiom_check(axiom_id), cfg, seed, budget, settings)
    if property_id not in PAIR_PROPERTIES:
        raise UnknownAxiomError(f"unknown property {property_id!r}; known: {', '.join(property_ids())}")
    predicate = PAIR_PROPERTIES[property_id]
    key = list(PAIR_PROPERTIES).index(property_id)
    for trial in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1000 + key, trial]))
        u, v = random_stream(rng, cfg), random_stream(rng, cfg)
        if predicate(u, v):
            shrunk = shrink_streams({"u": u, "v": v}, lambda st: predicate(st["u"], st["v"]))
            logger.info(f"{property_id}: witness at trial {trial}, shrunk to {shrunk}")
            return Witness(property_id, trial, Instance(shrunk), _pair_verdicts(shrunk["u"], shrunk["v"]))
    logger.info(f"{property_id}: none within budget {budget}")
    return None


def _search_axiom_failure(
    rule: Rule,
    check: AxiomCheck,
    cfg: GeneratorConfig,
    seed: int,
    budget: int,
    settings: Optional[HarnessSettings],
) -> Optional[Witness]:
    settings = settings or HarnessSettings()
    corpus = random_corpus(cfg.corpus_size, seed, cfg)
    report = test_axiom(rule, check.id, corpus, budget, seed, settings, stop_at_first=True)
    if report.witness is None:
        return None
    instance = report.witness.instance

    def still_fails(streams: Dict[str, EpStream]) -> bool:
        return not check.evaluate(rule, Instance(streams, instance.params), settings).ok

    shrunk = Instance(shrink_streams(instance.streams, still_fails), instance.params)
    outcome = check.evaluate(rule, shrunk, settings)
    return Witness(check.id, report.witness.trial, shrunk, outcome.verdicts)
