#!/usr/bin/env python3
"""
main.py - Part of equistream

Command-line front end: parse stream specs, run evaluators, comparisons and
axiom suites, and write machine-readable reports.

Exit status: 0 on success, 1 when a checked property or acceptance suite
fails, 2 on input errors.
"""
import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Any, Callable, Dict, Iterator, List, Literal, Optional, Tuple, TypeVar

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

import monitoring
from axiom_harness import (
    INDEPENDENCE_TABLE,
    INVARIANT_PROPERTIES,
    SUITES,
    GeneratorConfig,
    HarnessSettings,
    builtin_rule,
    random_corpus,
    run_independence_check,
    run_suite,
    search_counterexample,
)
from config import Config
from evaluators import (
    abel_identity_residual,
    abel_truncation_length,
    bound_functionals,
    cesaro_average,
    check_sandwich,
    discounted_grid,
    discounted_value,
    partial_mean,
)
from orderings import ComparisonResult, Verdict, brute_force_compare
from stream_core import (
    EpStream,
    MalformedStreamError,
    ParameterError,
    StreamError,
    load_stream_specs,
    stream_to_spec,
)
from utils import get_environment_config, parse_log_level, render_value, setup_rotating_logs

logger = logging.getLogger("equistream.main")

T = TypeVar("T")
R = TypeVar("R")

COMMANDS = ("eval", "compare", "axioms", "identity-check", "search")
DEFAULT_COMPARE_RULES = ("catching_up", "fixed_step", "cesaro")
CRITERION_RULES = {"C": "catching_up", "fixC": "fixed_step"}
ORACLE_CRITERIA = {rule_id: criterion for criterion, rule_id in CRITERION_RULES.items()}
IDENTITY_DELTAS = (Fraction(1, 2), Fraction(9, 10), Fraction(99, 100))
SANDWICH_EPS = 0.05


class RunConfig(BaseModel):
    """Validated options of one CLI run; None means "take it from Config" """

    model_config = ConfigDict(extra="forbid")

    command: Literal["eval", "compare", "axioms", "identity-check", "search"]
    inputs: List[str] = []
    rules: List[str] = []
    criterion: Optional[Literal["C", "fixC"]] = None
    oracle: bool = False
    suite: Optional[str] = None
    axioms: List[str] = []
    property_id: Optional[str] = None
    budget: Optional[int] = None
    horizon: Optional[int] = None
    kmax: Optional[int] = None
    delta_grid: Optional[Tuple[int, int]] = None
    mean_at: Optional[List[int]] = None
    seed: int = 0
    trials: Optional[int] = None
    corpus_size: Optional[int] = None
    tolerance: Optional[float] = None
    format: Literal["json", "csv", "text"] = "json"
    output: Optional[str] = None

    @field_validator("budget", "horizon", "kmax", "trials", "corpus_size")
    @classmethod
    def check_positive(cls, v: Any) -> Any:
        if v is not None and v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("tolerance")
    @classmethod
    def check_tolerance(cls, v: Any) -> Any:
        if v is not None and not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("delta_grid")
    @classmethod
    def check_grid(cls, v: Any) -> Any:
        if v is not None and not 1 <= v[0] < v[1] <= 52:
            raise ValueError("needs 1 <= j0 < j1 <= 52")
        return v

    @field_validator("mean_at")
    @classmethod
    def check_mean_at(cls, v: Any) -> Any:
        if v is not None and (not v or min(v) < 1):
            raise ValueError("mean horizons must be positive integers")
        return v

    @field_validator("suite")
    @classmethod
    def check_suite(cls, v: Any) -> Any:
        if v is not None and v not in SUITES:
            raise ValueError(f"unknown suite; expected one of {', '.join(SUITES)}")
        return v

    @model_validator(mode="after")
    def check_command(self) -> "RunConfig":
        if self.command in ("eval", "identity-check") and not self.inputs:
            raise ValueError(f"{self.command} needs at least one stream spec")
        if self.command == "compare" and not self.inputs:
            raise ValueError("compare needs at least two stream specs")
        if self.command == "axioms" and not (self.suite or self.axioms):
            raise ValueError("axioms needs --suite or --axiom")
        if self.command == "search" and not self.property_id:
            raise ValueError("search needs --property")
        return self


class StreamWorkbench:
    """Runs one command against parsed streams with settings from Config"""

    def __init__(self, app_config: Optional[Config] = None) -> None:
        self.config = app_config or Config()

    def option(self, run_config: RunConfig, name: str, section: str, key: str) -> Any:
        value = getattr(run_config, name)
        return value if value is not None else self.config.get(section, key)

    def harness_settings(self) -> HarnessSettings:
        harness = self.config.get("harness")
        return HarnessSettings(
            continuity_k=harness["continuity_k"],
            consistency_window=harness["consistency_window"],
            offset_periods=tuple(harness["offset_periods"]),
            fsrc_kmax=harness["fsrc_kmax"],
            max_index=harness["max_index"],
            periodic_reading=harness["periodic_reading"],
            workers=harness["workers"],
        )

    def generator_config(self, corpus_size: Optional[int] = None) -> GeneratorConfig:
        gen = self.config.get("generator")
        size = corpus_size or self.config.get("harness", "corpus_size")
        return GeneratorConfig(gen["max_head"], gen["max_cycle"], gen["low"], gen["high"], size)

    def _map(self, func: Callable[[T], R], items: List[T]) -> List[R]:
        """Apply func to every item, possibly on threads, keeping input order"""
        workers = self.config.get("harness", "workers", 1)
        if workers <= 1 or len(items) <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))

    def load_inputs(self, inputs: List[str]) -> List[Any]:
        streams = []
        for i, source in enumerate(inputs):
            try:
                parsed = load_stream_specs(source)
            except MalformedStreamError as e:
                raise MalformedStreamError(f"inputs[{i}]: {e}") from None
            for s in parsed:
                monitoring.track_stream_parsed("ep" if isinstance(s, EpStream) else "gen")
            streams.extend(parsed)
        logger.info(f"Parsed {len(streams)} streams from {len(inputs)} inputs")
        return streams

    # eval

    def evaluate(self, run_config: RunConfig, streams: List[Any]) -> Tuple[int, List[Dict[str, Any]]]:
        horizons = self.option(run_config, "mean_at", "evaluation", "mean_horizons")
        j0, j1 = self.option(run_config, "delta_grid", "evaluation", "delta_grid")
        kmax = self.option(run_config, "kmax", "evaluation", "kmax")
        horizon = self.option(run_config, "horizon", "evaluation", "estimate_horizon")
        tolerance = self.config.get("evaluation", "truncation_tolerance")
        grid = discounted_grid(j0, j1)
        grid_tail = self.config.get("evaluation", "grid_tail")

        def one(indexed: Tuple[int, Any]) -> Dict[str, Any]:
            index, s = indexed
            exact = isinstance(s, EpStream)
            discounted = []
            for j, delta in zip(range(j0, j1 + 1), grid):
                exact_delta = 1 - Fraction(1, 2**j)
                value = discounted_value(s, exact_delta if exact else delta, tolerance)
                discounted.append({"delta": exact_delta, "value": value})
            return {
                "index": index,
                "kind": "ep" if exact else "gen",
                "stream": stream_to_spec(s),
                "means": [{"T": T, "value": partial_mean(s, T)} for T in horizons],
                "cesaro_average": cesaro_average(s) if exact else None,
                "discounted": discounted,
                "bounds": bound_functionals(s, kmax, horizon, grid, grid_tail),
            }

        return 0, self._map(one, list(enumerate(streams)))

    # compare

    def compare(self, run_config: RunConfig, streams: List[Any]) -> Tuple[int, List[Dict[str, Any]]]:
        if len(streams) < 2:
            raise MalformedStreamError(f"inputs: compare needs at least two streams, got {len(streams)}")
        rule_ids = list(run_config.rules)
        if run_config.criterion:
            rule_ids.append(CRITERION_RULES[run_config.criterion])
        rules = [builtin_rule(r) for r in (rule_ids or DEFAULT_COMPARE_RULES)]
        results = []
        for i in range(len(streams)):
            for j in range(i + 1, len(streams)):
                u, v = streams[i], streams[j]
                both_ep = isinstance(u, EpStream) and isinstance(v, EpStream)
                for rule in rules:
                    if rule.domain == "ep" and not both_ep:
                        result = ComparisonResult(
                            Verdict.UNKNOWN, {"reason": f"rule {rule.id} is decided on EpStream pairs only"}
                        )
                    else:
                        result = rule.compare(u, v)
                    monitoring.track_comparison(rule.id, result.verdict.value)
                    entry = {
                        "pair": [i, j],
                        "rule": rule.id,
                        "verdict": result.verdict,
                        "witness": result.witness,
                    }
                    if run_config.oracle and both_ep and rule.id in ORACLE_CRITERIA:
                        entry["oracle"] = self.oracle_verdict(u, v, ORACLE_CRITERIA[rule.id])
                    results.append(entry)
        status = 0 if all(_oracle_agrees(r) for r in results) else 1
        return status, results

    def oracle_verdict(self, u: EpStream, v: EpStream, criterion: str) -> Dict[str, Any]:
        """Brute-force verdict over orderings.oracle_periods common periods past the heads"""
        periods = self.config.get("orderings", "oracle_periods")
        if periods < 50:
            raise ParameterError(f"orderings.oracle_periods must be >= 50, got {periods}")
        horizon = max(len(u.head), len(v.head)) + periods * math.lcm(u.period, v.period)
        kmax = self.config.get("orderings", "oracle_kmax")
        result = brute_force_compare(u, v, criterion, horizon, kmax)
        return {"criterion": criterion, "verdict": result.verdict, "horizon": horizon, "kmax": kmax}

    # axioms

    def axioms(self, run_config: RunConfig, streams: List[Any]) -> Tuple[int, List[Dict[str, Any]]]:
        trials = self.option(run_config, "trials", "harness", "trials")
        settings = self.harness_settings()
        if streams:
            corpus = streams
        else:
            gen = self.generator_config(run_config.corpus_size)
            corpus = random_corpus(gen.corpus_size, run_config.seed, gen)
        if run_config.suite == "appendix_b":
            budget = self.option(run_config, "budget", "harness", "search_budget")
            rule_ids = run_config.rules or list(INDEPENDENCE_TABLE)
            checks = [
                run_independence_check(rule_id, corpus, trials, run_config.seed, budget, settings)
                for rule_id in rule_ids
            ]
            status = 0 if all(c.ok for c in checks) else 1
            return status, [c.to_dict() for c in checks]

        axiom_ids = list(run_config.axioms) or list(SUITES[run_config.suite])
        reports = []
        for rule_id in run_config.rules or ["cesaro"]:
            reports.extend(run_suite(rule_id, axiom_ids, corpus, trials, run_config.seed, settings))
        status = 0 if all(r.passed for r in reports) else 1
        return status, [r.to_dict() for r in reports]

    # identity-check

    def identity_check(self, run_config: RunConfig, streams: List[Any]) -> Tuple[int, List[Dict[str, Any]]]:
        tolerance = self.option(run_config, "tolerance", "evaluation", "identity_tolerance")
        kmax = self.option(run_config, "kmax", "evaluation", "kmax")
        horizon = self.option(run_config, "horizon", "evaluation", "estimate_horizon")
        j0, j1 = self.option(run_config, "delta_grid", "evaluation", "delta_grid")
        grid = discounted_grid(j0, j1)
        grid_tail = self.config.get("evaluation", "grid_tail")

        def one(indexed: Tuple[int, Any]) -> Dict[str, Any]:
            index, s = indexed
            abel = []
            if isinstance(s, EpStream):
                bound = float(max(abs(x) for x in s.values))
                for delta in IDENTITY_DELTAS:
                    n = abel_truncation_length(float(delta), bound, tolerance / 10)
                    residual = abel_identity_residual(s, float(delta), n, tolerance / 10)
                    abel.append({"delta": delta, "N": n, "residual": residual, "ok": residual < tolerance})
            sandwich = check_sandwich(s, kmax, horizon, grid, SANDWICH_EPS, grid_tail)
            return {
                "index": index,
                "kind": "ep" if isinstance(s, EpStream) else "gen",
                "abel": abel,
                "sandwich": {
                    "ok": sandwich.ok,
                    "eps": sandwich.eps,
                    "W2": sandwich.limits.lower,
                    "W3": sandwich.limits.upper,
                    "estimates": [
                        {"k": k, "liminf": est.lower, "limsup": est.upper}
                        for k, est in enumerate(sandwich.estimates, start=1)
                    ],
                },
                "ok": sandwich.ok and all(a["ok"] for a in abel),
            }

        results = self._map(one, list(enumerate(streams)))
        return (0 if all(r["ok"] for r in results) else 1), results

    # search

    def search(self, run_config: RunConfig, streams: List[Any]) -> Tuple[int, List[Dict[str, Any]]]:
        budget = self.option(run_config, "budget", "harness", "search_budget")
        witness = search_counterexample(
            run_config.property_id,
            self.generator_config(run_config.corpus_size),
            run_config.seed,
            budget,
            self.harness_settings(),
        )
        result = {
            "property": run_config.property_id,
            "budget": budget,
            "found": witness is not None,
            "witness": witness.to_dict() if witness else None,
            "message": None if witness else "none within budget",
        }
        status = 1 if witness is not None and run_config.property_id in INVARIANT_PROPERTIES else 0
        return status, [result]

    def run(self, run_config: RunConfig) -> Tuple[int, List[Dict[str, Any]]]:
        handlers = {
            "eval": self.evaluate,
            "compare": self.compare,
            "axioms": self.axioms,
            "identity-check": self.identity_check,
            "search": self.search,
        }
        streams = self.load_inputs(run_config.inputs)
        return handlers[run_config.command](run_config, streams)


def run(run_config: RunConfig, app_config: Optional[Config] = None) -> Tuple[int, Dict[str, Any]]:
    """Execute one command; returns (exit status, report document)"""
    try:
        status, results = StreamWorkbench(app_config).run(run_config)
    except StreamError as e:
        logger.error(f"{run_config.command}: {e}")
        return 2, {"command": run_config.command, "status": 2, "error": str(e)}
    except Exception as e:
        logger.exception(f"{run_config.command}: unexpected error")
        return 2, {"command": run_config.command, "status": 2, "error": f"{type(e).__name__}: {e}"}
    if status:
        logger.error(f"{run_config.command}: a checked property failed")
    return status, {"command": run_config.command, "status": status, "results": render_value(results)}


def _oracle_agrees(entry: Dict[str, Any]) -> bool:
    """An Unknown oracle verdict is inconclusive; any other must match the exact one"""
    oracle = entry.get("oracle")
    if oracle is None or oracle["verdict"] == Verdict.UNKNOWN:
        return True
    return oracle["verdict"] == entry["verdict"]


# Rendering


def _cell(value: Any) -> Tuple[str, bool]:
    """CSV text of a rendered value and whether it is approximate"""
    if isinstance(value, dict) and value.get("approx"):
        return repr(value["value"]), True
    if value is None:
        return "", False
    if isinstance(value, (dict, list)):
        return json.dumps(value, sort_keys=True), False
    return str(value), False


CSV_COLUMNS = {
    "eval": ["index", "kind", "quantity", "parameter", "value", "approx"],
    "compare": ["left", "right", "rule", "verdict", "witness", "oracle"],
    "axioms": ["rule_id", "axiom_id", "role", "mode", "trials", "failures", "passed"],
    "identity-check": ["index", "check", "parameter", "value", "approx", "ok"],
    "search": ["property", "budget", "found", "witness"],
}


def _csv_rows(command: str, results: List[Dict[str, Any]]) -> Iterator[List[Any]]:
    if command == "eval":
        for r in results:
            quantities = [("mean", m["T"], m["value"]) for m in r["means"]]
            quantities.append(("cesaro_average", "", r["cesaro_average"]))
            quantities.extend(("discounted", d["delta"], d["value"]) for d in r["discounted"])
            quantities.extend((name, "", value) for name, value in r["bounds"].items())
            for quantity, parameter, value in quantities:
                text, approx = _cell(value)
                yield [r["index"], r["kind"], quantity, parameter, text, approx]
    elif command == "compare":
        for r in results:
            oracle = r["oracle"]["verdict"] if "oracle" in r else ""
            yield [r["pair"][0], r["pair"][1], r["rule"], r["verdict"], _cell(r["witness"])[0], oracle]
    elif command == "axioms":
        for r in results:
            if "designated" in r:
                entries = [("designated", x) for x in r["designated"]] + [("kept", x) for x in r["kept"]]
                entries += [("beyond_ep", x) for x in r["beyond_ep"]]
            else:
                entries = [("suite", r)]
            for role, x in entries:
                yield [x["rule_id"], x["axiom_id"], role, x["mode"], x["trials"], x["failures"], x["passed"]]
    elif command == "identity-check":
        for r in results:
            for a in r["abel"]:
                text, approx = _cell(a["residual"])
                yield [r["index"], "abel_residual", a["delta"], text, approx, a["ok"]]
            s = r["sandwich"]
            for name in ("W2", "W3"):
                text, approx = _cell(s[name])
                yield [r["index"], f"sandwich_{name}", "", text, approx, s["ok"]]
    elif command == "search":
        for r in results:
            yield [r["property"], r["budget"], r["found"], _cell(r["witness"])[0]]


def _text_lines(command: str, results: List[Dict[str, Any]]) -> Iterator[str]:
    def show(value: Any) -> str:
        text, approx = _cell(value)
        return f"~{text}" if approx else text

    for r in results:
        if command == "eval":
            bounds = ", ".join(f"{k}={show(v)}" for k, v in r["bounds"].items())
            yield f"stream {r['index']} ({r['kind']}): mean_inf={show(r['cesaro_average']) or 'n/a'}; {bounds}"
            for m in r["means"]:
                yield f"  mu_{m['T']} = {show(m['value'])}"
            for d in r["discounted"]:
                yield f"  sigma[{d['delta']}] = {show(d['value'])}"
        elif command == "compare":
            line = f"{r['pair'][0]} vs {r['pair'][1]} under {r['rule']}: {r['verdict']} {show(r['witness'])}"
            if "oracle" in r:
                line += f" (oracle: {r['oracle']['verdict']})"
            yield line
        elif command == "axioms":
            reports = r["designated"] + r["kept"] + r["beyond_ep"] if "designated" in r else [r]
            if "designated" in r:
                yield f"{r['rule_id']}: {'ok' if r['ok'] else 'FAILED'}"
            for x in reports:
                yield f"  {x['rule_id']} / {x['axiom_id']} [{x['mode']}]: {x['failures']}/{x['trials']} failing"
        elif command == "identity-check":
            yield f"stream {r['index']}: {'ok' if r['ok'] else 'FAILED'}"
            for a in r["abel"]:
                yield f"  abel delta={a['delta']} N={a['N']} residual={show(a['residual'])}"
            s = r["sandwich"]
            yield f"  sandwich W2={show(s['W2'])} W3={show(s['W3'])} eps={show(s['eps'])}: {s['ok']}"
        elif command == "search":
            if r["found"]:
                yield f"{r['property']}: witness {json.dumps(r['witness'], sort_keys=True)}"
            else:
                yield f"{r['property']}: {r['message']}"


def render_report(report: Dict[str, Any], fmt: str) -> str:
    if fmt == "json" or "error" in report:
        return json.dumps(report, indent=2) + "\n"
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS[report["command"]])
        writer.writerows(_csv_rows(report["command"], report["results"]))
        return buffer.getvalue()
    lines = list(_text_lines(report["command"], report["results"]))
    lines.append(f"status: {report['status']}")
    return "\n".join(lines) + "\n"


# Argument parsing


def delta_grid_arg(text: str) -> Tuple[int, int]:
    """Parse "j0..j1" """
    try:
        j0, j1 = (int(x) for x in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected j0..j1, got {text!r}") from None
    return j0, j1


def int_list_arg(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equistream",
        description="Exact and numerical evaluation of infinite utility streams",
    )
    parser.add_argument('command', choices=COMMANDS, help='What to run')
    parser.add_argument('inputs', nargs='*', help='Stream spec files or inline JSON')
    parser.add_argument('--rule', action='append', default=[], dest='rules', help='Rule id (repeatable)')
    parser.add_argument('--criterion', choices=sorted(CRITERION_RULES), help='Catching-up criterion for compare')
    parser.add_argument('--oracle', action='store_true', help='Cross-check catching-up verdicts by brute force')
    parser.add_argument('--suite', choices=sorted(SUITES), help='Axiom suite')
    parser.add_argument('--axiom', action='append', default=[], dest='axioms', help='Axiom id (repeatable)')
    parser.add_argument('--property', dest='property_id', help='Property id for search')
    parser.add_argument('--budget', type=int, help='Search budget / designated-failure trial budget')
    parser.add_argument('--horizon', type=int, help='Horizon for numerical estimates')
    parser.add_argument('--kmax', type=int, help='Largest step k for k-step means')
    parser.add_argument('--delta-grid', type=delta_grid_arg, help='Discount grid delta_j = 1 - 2^-j, j = j0..j1')
    parser.add_argument('--mean-at', type=int_list_arg, help='Horizons T for mu_T, e.g. 1,10,100')
    parser.add_argument('--seed', type=int, default=0, help='Random seed')
    parser.add_argument('--trials', type=int, help='Trials per axiom')
    parser.add_argument('--corpus-size', type=int, help='Size of the random corpus')
    parser.add_argument('--tolerance', type=float, help='Abel identity tolerance')
    parser.add_argument('--format', choices=('json', 'csv', 'text'), default='json', help='Report format')
    parser.add_argument('--out', dest='output', help='Write the report here instead of stdout')
    parser.add_argument('--config', metavar='CONFIG_PATH', help='Path to config file')
    parser.add_argument('--log-dir', help='Directory for rotating logs')
    parser.add_argument('--metrics-port', type=int, help='Expose Prometheus metrics on this port')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable debug logging')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function for equistream"""
    parser = build_parser()
    args = parser.parse_args(argv)
    env = get_environment_config()

    app_config = Config(args.config or env["CONFIG"])
    log_level = logging.DEBUG if args.verbose else parse_log_level(env["LOG_LEVEL"])
    setup_rotating_logs("equistream", args.log_dir or app_config.get("paths", "logs_dir"), log_level)

    metrics_port = args.metrics_port or env["METRICS_PORT"] or app_config.get("monitoring", "metrics_port")
    if metrics_port:
        if not monitoring.start_metrics_server(metrics_port):
            logger.warning(f"Continuing without metrics on port {metrics_port}")

    fields = {
        key: value for key, value in vars(args).items()
        if key not in ("config", "log_dir", "metrics_port", "verbose")
    }
    try:
        run_config = RunConfig(**fields)
    except ValidationError as e:
        error = e.errors()[0]
        location = ".".join(str(p) for p in error["loc"]) or "arguments"
        logger.error(f"Invalid arguments: {location}: {error['msg']}")
        print(f"error: {location}: {error['msg']}", file=sys.stderr)
        return 2

    status, report = run(run_config, app_config)
    if "error" in report:
        print(f"error: {report['error']}", file=sys.stderr)

    text = render_report(report, run_config.format)
    if run_config.output:
        with open(run_config.output, 'w') as f:
            f.write(text)
        logger.info(f"Report written to {run_config.output}")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
