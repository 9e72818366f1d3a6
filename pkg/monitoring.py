#!/usr/bin/env python3
"""
monitoring.py - Part of equistream

Monitoring module for equistream
Handles Prometheus metrics for comparisons, axiom trials and stream parsing
"""
import time
import logging
from functools import wraps
from typing import Any, Callable, TypeVar, cast

from prometheus_client import Counter, Histogram, start_http_server

logger = logging.getLogger("equistream.monitoring")

F = TypeVar("F", bound=Callable[..., Any])

# Create metrics
COMPARISONS = Counter(
    'equistream_comparisons_total',
    'Total number of stream comparisons reported',
    ['rule', 'verdict']
)

AXIOM_TRIALS = Counter(
    'equistream_axiom_trials_total',
    'Total number of axiom trials executed',
    ['axiom', 'rule']
)

AXIOM_FAILURES = Counter(
    'equistream_axiom_failures_total',
    'Total number of axiom trials that produced a counterexample',
    ['axiom', 'rule']
)

AXIOM_RUN_LATENCY = Histogram(
    'equistream_axiom_run_duration_seconds',
    'Wall time of one axiom test run in seconds',
    ['axiom']
)

STREAMS_PARSED = Counter(
    'equistream_streams_parsed_total',
    'Total number of stream specs parsed',
    ['kind']
)


def start_metrics_server(port: int = 9090) -> bool:
    """Start a dedicated Prometheus metrics server.

    Args:
        port: Port to expose metrics on (default: 9090)

    Returns:
        bool: True if the server is listening
    """
    try:
        start_http_server(port)
        logger.info(f"Prometheus metrics server started on port {port}")
        return True
    except Exception as e:
        logger.error(f"Failed to start Prometheus metrics server: {e}")
        return False


def track_comparison(rule: str, verdict: str) -> None:
    """Count one reported comparison.

    Args:
        rule: Rule id
        verdict: Verdict value string
    """
    COMPARISONS.labels(rule=rule, verdict=verdict).inc()


def track_axiom_trials(axiom: str, rule: str, trials: int, failures: int) -> None:
    """Record the trial and failure counts of one axiom run"""
    AXIOM_TRIALS.labels(axiom=axiom, rule=rule).inc(trials)
    if failures:
        AXIOM_FAILURES.labels(axiom=axiom, rule=rule).inc(failures)


def track_stream_parsed(kind: str) -> None:
    STREAMS_PARSED.labels(kind=kind).inc()


def track_axiom_run(func: F) -> F:
    """Decorator to track the latency of an axiom run.

    Args:
        func: Function called as func(rule, axiom_id, ...)

    Returns:
        Wrapped function with latency tracking
    """
    @wraps(func)
    def wrapper(rule: Any, axiom_id: str, *args: Any, **kwargs: Any) -> Any:
        start_time = time.time()
        try:
            return func(rule, axiom_id, *args, **kwargs)
        finally:
            latency = time.time() - start_time
            AXIOM_RUN_LATENCY.labels(axiom=axiom_id).observe(latency)

    return cast(F, wrapper)
