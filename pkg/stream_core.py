#!/usr/bin/env python3
"""
stream_core.py - Part of equistream

Exact representation and algebra of utility streams.

Two stream classes live here:

* EpStream: an eventually periodic stream of Fractions, a finite head followed
  by a cycle repeated forever. Instances are always in canonical form (minimal
  cycle, minimal head) so that equality of objects is pointwise equality.
* BoundedStream: a deterministic index rule with a declared sup-norm bound.
  Its values stay floats and are checked against the bound on every sample.

Indexing is 1-based everywhere: value_at(s, 1) is the first generation.
"""
import json
import logging
import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

logger = logging.getLogger("equistream.stream_core")

Rational = Fraction

# Decimal literals are accepted up to this many fractional digits
MAX_FRACTION_DIGITS = 12

_RATIO_PATTERN = re.compile(r"^\s*([+-]?\d+)\s*/\s*([+-]?\d+)\s*$")


class StreamError(Exception):
    """Base class for every error raised while building or evaluating streams"""


class MalformedStreamError(StreamError):
    """A stream spec or stream component is not well formed"""


class BoundViolationError(StreamError):
    """A BoundedStream produced a value outside its declared bound"""

    def __init__(self, label: str, index: int, value: Any, bound: Any) -> None:
        self.label = label
        self.index = index
        self.value = value
        self.bound = bound
        super().__init__(
            f"stream {label!r}: |u_{index}| = {abs(value)!r} exceeds declared bound {bound!r}"
        )


class ParameterError(StreamError):
    """An operation received a parameter outside its domain"""


class DomainMismatchError(StreamError):
    """An exact operation received a stream outside the eventually periodic class"""


def to_rational(value: Any, where: str = "value") -> Fraction:
    """Convert a literal to an exact Fraction.

    Accepts ints, Fractions, Decimals (as produced by json.loads with
    parse_float=Decimal) and strings of the form "p/q" or a decimal literal
    with at most MAX_FRACTION_DIGITS fractional digits. Binary floats are
    rejected: they have no exact decimal meaning in a spec.
    """
    if isinstance(value, bool):
        raise MalformedStreamError(f"{where}: booleans are not utility values")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, float):
        raise MalformedStreamError(
            f"{where}: float {value!r} is not exact; write it as a string such as \"1/3\" or \"0.25\""
        )
    if isinstance(value, str):
        match = _RATIO_PATTERN.match(value)
        if match:
            denominator = int(match.group(2))
            if denominator == 0:
                raise MalformedStreamError(f"{where}: zero denominator in {value!r}")
            return Fraction(int(match.group(1)), denominator)
        try:
            value = Decimal(value.strip())
        except InvalidOperation:
            raise MalformedStreamError(f"{where}: cannot parse {value!r} as a rational") from None
    if isinstance(value, Decimal):
        if not value.is_finite():
            raise MalformedStreamError(f"{where}: {value} is not a finite number")
        exponent = value.normalize().as_tuple().exponent
        if exponent < -MAX_FRACTION_DIGITS:
            raise MalformedStreamError(
                f"{where}: {value} has more than {MAX_FRACTION_DIGITS} fractional digits"
            )
        return Fraction(value)
    raise MalformedStreamError(f"{where}: unsupported value {value!r}")


def format_rational(value: Fraction) -> str:
    """Render a rational as "p/q" (integers included, e.g. "5/1")"""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def exact_sum(values: Sequence[Fraction]) -> Fraction:
    """Sum of Fractions over a common denominator, normalised once"""
    if not values:
        return Fraction(0)
    den = math.lcm(*{x.denominator for x in values})
    return Fraction(sum(x.numerator * (den // x.denominator) for x in values), den)


def _coerce(values: Sequence[Any], where: str) -> Tuple[Fraction, ...]:
    if all(type(x) is Fraction for x in values):
        return tuple(values)
    return tuple(to_rational(x, f"{where}[{i}]") for i, x in enumerate(values))


def _minimal_cycle(cycle: Tuple[Fraction, ...]) -> Tuple[Fraction, ...]:
    n = len(cycle)
    for p in range(1, n):
        if n % p == 0 and cycle[:p] * (n // p) == cycle:
            return cycle[:p]
    return cycle


@dataclass(frozen=True)
class EpStream:
    """Eventually periodic rational stream (head, then cycle forever)"""

    head: Tuple[Fraction, ...]
    cycle: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        head = _coerce(self.head, "head")
        cycle = _coerce(self.cycle, "cycle")
        if not cycle:
            raise MalformedStreamError("cycle: cycle must be nonempty")
        cycle = _minimal_cycle(cycle)
        # Absorb trailing head entries into the cycle by rotation
        while head and head[-1] == cycle[-1]:
            cycle = (head[-1],) + cycle[:-1]
            head = head[:-1]
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "cycle", cycle)

    @property
    def period(self) -> int:
        return len(self.cycle)

    @property
    def is_periodic(self) -> bool:
        return not self.head

    @property
    def values(self) -> Tuple[Fraction, ...]:
        """All distinct positions of the representation (head then cycle)"""
        return self.head + self.cycle

    def value_at(self, t: int) -> Fraction:
        if t < 1:
            raise ParameterError(f"index must be >= 1, got {t}")
        h = len(self.head)
        if t <= h:
            return self.head[t - 1]
        return self.cycle[(t - h - 1) % len(self.cycle)]

    def prefix(self, T: int) -> Tuple[Fraction, ...]:
        """The first T coordinates (u_1, ..., u_T)"""
        if T < 0:
            raise ParameterError(f"prefix length must be >= 0, got {T}")
        h = len(self.head)
        if T <= h:
            return self.head[:T]
        rest = T - h
        reps = -(-rest // len(self.cycle))
        return self.head + (self.cycle * reps)[:rest]

    def __add__(self, other: object) -> "EpStream":
        if not isinstance(other, EpStream):
            return NotImplemented
        return add(self, other)

    def __neg__(self) -> "EpStream":
        return scale(self, Fraction(-1))

    def __sub__(self, other: object) -> "EpStream":
        if not isinstance(other, EpStream):
            return NotImplemented
        return add(self, scale(other, Fraction(-1)))

    def __repr__(self) -> str:
        head = ", ".join(str(x) for x in self.head)
        cycle = ", ".join(str(x) for x in self.cycle)
        return f"EpStream(head=[{head}], cycle=[{cycle}])"


@dataclass(frozen=True)
class BoundedStream:
    """Index rule t -> real with a declared bound B on |u_t|.

    vector_rule, when given, must agree with rule on integer arrays; it is used
    for the long horizons of the numerical evaluators.
    """

    rule: Callable[[int], float]
    bound: float
    label: str
    vector_rule: Optional[Callable[[np.ndarray], np.ndarray]] = None
    spec: Optional[Dict[str, Any]] = field(default=None, compare=False, hash=False)

    def __post_init__(self) -> None:
        if not (self.bound > 0 and math.isfinite(self.bound)):
            raise ParameterError(f"stream {self.label!r}: bound must be a positive finite number")

    def value_at(self, t: int) -> float:
        if t < 1:
            raise ParameterError(f"index must be >= 1, got {t}")
        value = float(self.rule(t))
        if not abs(value) <= self.bound:
            raise BoundViolationError(self.label, t, value, self.bound)
        return value

    def sample(self, n: int, start: int = 1) -> np.ndarray:
        """Values u_start .. u_{start+n-1} as a float array, bound-checked"""
        if start < 1 or n < 0:
            raise ParameterError(f"invalid sample range start={start}, n={n}")
        idx = np.arange(start, start + n, dtype=np.int64)
        if self.vector_rule is not None:
            values = np.asarray(self.vector_rule(idx), dtype=np.float64)
        else:
            values = np.fromiter((self.rule(int(t)) for t in idx), dtype=np.float64, count=n)
        violations = ~(np.abs(values) <= self.bound)
        if violations.any():
            first = int(np.argmax(violations))
            raise BoundViolationError(self.label, int(idx[first]), float(values[first]), self.bound)
        return values


Stream = Union[EpStream, BoundedStream]


def require_ep(s: Any, operation: str) -> EpStream:
    if not isinstance(s, EpStream):
        raise DomainMismatchError(
            f"{operation} needs an eventually periodic stream, got {type(s).__name__}"
        )
    return s


def make_ep(head: Sequence[Any], cycle: Sequence[Any]) -> EpStream:
    """Build a canonical EpStream from a head and a nonempty cycle"""
    return EpStream(tuple(head), tuple(cycle))


def constant(c: Any) -> EpStream:
    return EpStream((), (to_rational(c),))


def alternating() -> EpStream:
    """(1, 0, 1, 0, ...)"""
    return EpStream((), (Fraction(1), Fraction(0)))


def value_at(s: Stream, t: int) -> Union[Fraction, float]:
    return s.value_at(t)


def add(u: EpStream, v: EpStream) -> EpStream:
    require_ep(u, "add")
    require_ep(v, "add")
    h = max(len(u.head), len(v.head))
    p = math.lcm(u.period, v.period)
    values = [a + b for a, b in zip(u.prefix(h + p), v.prefix(h + p))]
    return EpStream(tuple(values[:h]), tuple(values[h:]))


def scale(u: EpStream, alpha: Any) -> EpStream:
    require_ep(u, "scale")
    alpha = to_rational(alpha, "alpha")
    return EpStream(tuple(alpha * x for x in u.head), tuple(alpha * x for x in u.cycle))


def tail(s: EpStream, T: int) -> EpStream:
    """The stream (u_{T+1}, u_{T+2}, ...)"""
    require_ep(s, "tail")
    if T < 0:
        raise ParameterError(f"tail offset must be >= 0, got {T}")
    h = len(s.head)
    if T <= h:
        return EpStream(s.head[T:], s.cycle)
    r = (T - h) % s.period
    return EpStream((), s.cycle[r:] + s.cycle[:r])


def prepend(values: Sequence[Any], s: EpStream) -> EpStream:
    require_ep(s, "prepend")
    return EpStream(_coerce(tuple(values), "values") + s.head, s.cycle)


def _check_bijection(mapping: Sequence[int], size: int, where: str) -> Tuple[int, ...]:
    mapping = tuple(int(x) for x in mapping)
    if len(mapping) != size or sorted(mapping) != list(range(1, size + 1)):
        raise ParameterError(f"{where}: {list(mapping)} is not a bijection of 1..{size}")
    return mapping


@dataclass(frozen=True)
class FinitePermutation:
    """Bijection of 1..horizon, identity beyond; mapping[t-1] = pi(t)"""

    horizon: int
    mapping: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ParameterError(f"permutation horizon must be >= 1, got {self.horizon}")
        object.__setattr__(
            self, "mapping", _check_bijection(self.mapping, self.horizon, "finite permutation")
        )

    def __call__(self, t: int) -> int:
        return self.mapping[t - 1] if t <= self.horizon else t

    @classmethod
    def identity(cls, horizon: int) -> "FinitePermutation":
        return cls(horizon, tuple(range(1, horizon + 1)))

    @classmethod
    def swap(cls, i: int, j: int) -> "FinitePermutation":
        horizon = max(i, j)
        mapping = list(range(1, horizon + 1))
        mapping[i - 1], mapping[j - 1] = j, i
        return cls(horizon, tuple(mapping))


@dataclass(frozen=True)
class FixedStepPermutation:
    """Blockwise permutation: block m = {k(m-1)+1 .. km} is mapped onto itself.

    blocks[m-1] is the bijection used on block m; every later block uses tail.
    Any permutation with pi({1..kT}) = {1..kT} for all T has this form, since
    the set difference of consecutive such sets is exactly one block.
    """

    step: int
    blocks: Tuple[Tuple[int, ...], ...]
    tail: Tuple[int, ...]

    def __post_init__(self) -> None:
        if self.step < 1:
            raise ParameterError(f"fixed-step permutation step must be >= 1, got {self.step}")
        blocks = tuple(
            _check_bijection(b, self.step, f"block {m + 1}") for m, b in enumerate(self.blocks)
        )
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "tail", _check_bijection(self.tail, self.step, "tail block"))

    def __call__(self, t: int) -> int:
        m, r = divmod(t - 1, self.step)
        sigma = self.blocks[m] if m < len(self.blocks) else self.tail
        return m * self.step + sigma[r]


def apply_finite_permutation(s: EpStream, pi: FinitePermutation) -> EpStream:
    """Coordinate t of the result holds u_{pi(t)}"""
    require_ep(s, "apply_finite_permutation")
    moved = tuple(s.value_at(pi(t)) for t in range(1, pi.horizon + 1))
    rest = tail(s, pi.horizon)
    return EpStream(moved + rest.head, rest.cycle)


def apply_fixed_step_permutation(s: EpStream, pi: FixedStepPermutation) -> EpStream:
    require_ep(s, "apply_fixed_step_permutation")
    k = pi.step
    # From block boundary S on, only the tail bijection acts and the input is periodic
    start = k * max(len(pi.blocks), -(-len(s.head) // k))
    period = math.lcm(k, s.period)
    values = tuple(s.value_at(pi(t)) for t in range(1, start + period + 1))
    return EpStream(values[:start], values[start:])


def replicate_prefix(s: Stream, T: int) -> Stream:
    """[u_1..u_T]_rep: the first T coordinates repeated forever.

    Exact for EpStream. A BoundedStream gives back a BoundedStream whose rule
    reads the original at ((t - 1) mod T) + 1; values are never rounded into
    rationals.
    """
    if T < 1:
        raise ParameterError(f"replication length must be >= 1, got {T}")
    if isinstance(s, EpStream):
        return EpStream((), s.prefix(T))
    if isinstance(s, BoundedStream):
        vector = None
        if s.vector_rule is not None:
            vector = lambda idx: s.vector_rule((idx - 1) % T + 1)  # noqa: E731
        return BoundedStream(
            rule=lambda t: s.rule((t - 1) % T + 1),
            bound=s.bound,
            label=f"{s.label}[1..{T}]_rep",
            vector_rule=vector,
        )
    raise DomainMismatchError(f"replicate_prefix got {type(s).__name__}")


def mean_complete(s: EpStream, T: int) -> EpStream:
    """(u_1, ..., u_T, mu_T, mu_T, ...)"""
    require_ep(s, "mean_complete")
    if T < 1:
        raise ParameterError(f"mean completion length must be >= 1, got {T}")
    head = s.prefix(T)
    h = len(s.head)
    if T <= h:
        total = exact_sum(head)
    else:
        full, rem = divmod(T - h, s.period)
        total = exact_sum(s.head) + full * exact_sum(s.cycle) + exact_sum(s.cycle[:rem])
    return EpStream(head, (total / T,))


def add_indicator(s: EpStream, t: int, alpha: Any) -> EpStream:
    """u + alpha * 1_{t}"""
    require_ep(s, "add_indicator")
    if t < 1:
        raise ParameterError(f"index must be >= 1, got {t}")
    alpha = to_rational(alpha, "alpha")
    n = max(len(s.head), t)
    values = list(s.prefix(n))
    values[t - 1] += alpha
    rest = tail(s, n)
    return EpStream(tuple(values) + rest.head, rest.cycle)


def indicator(t: int, alpha: Any = 1) -> EpStream:
    return add_indicator(constant(0), t, alpha)


def transfer(s: EpStream, i: int, j: int, beta: Any) -> EpStream:
    """Move beta from coordinate j to coordinate i; u_i + u_j is preserved"""
    if i == j:
        raise ParameterError(f"transfer needs two distinct indices, got i = j = {i}")
    beta = to_rational(beta, "beta")
    return add_indicator(add_indicator(s, i, beta), j, -beta)


def as_bounded(s: EpStream, label: Optional[str] = None) -> BoundedStream:
    """Float view of an EpStream for the numerical evaluators"""
    require_ep(s, "as_bounded")
    h = len(s.head)
    head = np.array([float(x) for x in s.head], dtype=np.float64)
    cycle = np.array([float(x) for x in s.cycle], dtype=np.float64)
    bound = max(abs(float(x)) for x in s.values) or 1.0

    def vector(idx: np.ndarray) -> np.ndarray:
        out = cycle[(idx - h - 1) % len(cycle)]
        if h:
            mask = idx <= h
            out[mask] = head[idx[mask] - 1]
        return out

    return BoundedStream(
        rule=lambda t: float(s.value_at(t)),
        bound=bound,
        label=label or repr(s),
        vector_rule=vector,
        spec=stream_to_spec(s),
    )


# Registered bounded generators: name -> factory(params, bound) -> BoundedStream
GeneratorFactory = Callable[[Dict[str, Any], Optional[float]], BoundedStream]
_GENERATORS: Dict[str, GeneratorFactory] = {}


def register_generator(name: str) -> Callable[[GeneratorFactory], GeneratorFactory]:
    """Decorator registering a BoundedStream factory under a spec name"""

    def decorator(factory: GeneratorFactory) -> GeneratorFactory:
        _GENERATORS[name] = factory
        return factory

    return decorator


def generator_names() -> List[str]:
    return sorted(_GENERATORS)


def _check_params(name: str, params: Dict[str, Any], allowed: Sequence[str]) -> None:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise MalformedStreamError(f"generator {name!r}: unknown params {unknown}")


@register_generator("harmonic_shift")
def _harmonic_shift(params: Dict[str, Any], bound: Optional[float]) -> BoundedStream:
    """u_t = c + 1/t; Cesaro limit c"""
    _check_params("harmonic_shift", params, ("c",))
    c = float(params.get("c", 0))
    return BoundedStream(
        rule=lambda t: c + 1.0 / t,
        bound=float(bound) if bound is not None else abs(c) + 1.0,
        label=f"harmonic_shift(c={c:g})",
        vector_rule=lambda idx: c + 1.0 / idx,
    )


@register_generator("doubling_blocks")
def _doubling_blocks(params: Dict[str, Any], bound: Optional[float]) -> BoundedStream:
    """Block m = [2^m, 2^(m+1)) holds m mod 2; running means oscillate in [1/3, 2/3]"""
    _check_params("doubling_blocks", params, ())

    def vector(idx: np.ndarray) -> np.ndarray:
        _, exponent = np.frexp(idx.astype(np.float64))
        return ((exponent - 1) % 2).astype(np.float64)

    return BoundedStream(
        rule=lambda t: float((int(t).bit_length() - 1) % 2),
        bound=float(bound) if bound is not None else 1.0,
        label="doubling_blocks",
        vector_rule=vector,
    )


def builtin_generator(name: str, params: Optional[Dict[str, Any]] = None, bound: Any = None) -> BoundedStream:
    params = dict(params or {})
    if name not in _GENERATORS:
        raise MalformedStreamError(
            f"unknown generator {name!r}; registered: {', '.join(generator_names())}"
        )
    stream = _GENERATORS[name](params, None if bound is None else float(bound))
    spec = {"type": "gen", "name": name, "params": params}
    if bound is not None:
        spec["bound"] = bound
    object.__setattr__(stream, "spec", spec)
    return stream


class EpSpec(BaseModel):
    """{"type": "ep", "head": [...], "cycle": [...]}"""

    model_config = ConfigDict(extra="forbid")

    type: Literal["ep"]
    head: List[Any] = Field(default_factory=list)
    cycle: List[Any]


class GenSpec(BaseModel):
    """{"type": "gen", "name": "<builtin>", "params": {...}, "bound": B}"""

    model_config = ConfigDict(extra="forbid")

    type: Literal["gen"]
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    bound: Optional[Any] = None


def _first_error(where: str, exc: ValidationError) -> MalformedStreamError:
    error = exc.errors()[0]
    loc = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error["loc"])
    return MalformedStreamError(f"{where}{loc}: {error['msg']}")


def parse_stream_spec(obj: Any, where: str = "stream") -> Stream:
    """Turn a decoded JSON spec into a stream; errors carry the position"""
    if not isinstance(obj, dict):
        raise MalformedStreamError(f"{where}: expected a JSON object, got {type(obj).__name__}")
    kind = obj.get("type")
    if kind == "ep":
        try:
            spec = EpSpec.model_validate(obj)
        except ValidationError as e:
            raise _first_error(where, e) from None
        head = tuple(to_rational(x, f"{where}.head[{i}]") for i, x in enumerate(spec.head))
        cycle = tuple(to_rational(x, f"{where}.cycle[{i}]") for i, x in enumerate(spec.cycle))
        if not cycle:
            raise MalformedStreamError(f"{where}.cycle: cycle must be nonempty")
        return EpStream(head, cycle)
    if kind == "gen":
        try:
            spec = GenSpec.model_validate(obj)
        except ValidationError as e:
            raise _first_error(where, e) from None
        bound = None
        if spec.bound is not None:
            try:
                bound = float(spec.bound)
            except (TypeError, ValueError):
                raise MalformedStreamError(f"{where}.bound: not a number: {spec.bound!r}") from None
        try:
            return builtin_generator(spec.name, spec.params, bound)
        except StreamError as e:
            raise MalformedStreamError(f"{where}: {e}") from None
    raise MalformedStreamError(f"{where}.type: expected \"ep\" or \"gen\", got {kind!r}")


def load_stream_specs(source: str) -> List[Stream]:
    """Parse inline JSON or a spec file holding one object or a list of objects"""
    text = source.strip()
    if text.startswith("{") or text.startswith("["):
        origin = "inline"
    else:
        path = Path(source)
        origin = path.name
        try:
            text = path.read_text()
        except OSError as e:
            raise MalformedStreamError(f"{source}: cannot read stream spec file: {e}") from None
    try:
        decoded = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as e:
        raise MalformedStreamError(
            f"{origin}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}"
        ) from None
    if isinstance(decoded, dict):
        return [parse_stream_spec(decoded, origin)]
    if isinstance(decoded, list):
        return [parse_stream_spec(obj, f"{origin}[{i}]") for i, obj in enumerate(decoded)]
    raise MalformedStreamError(f"{origin}: expected an object or a list of objects")


def stream_to_spec(s: Stream) -> Dict[str, Any]:
    if isinstance(s, EpStream):
        return {
            "type": "ep",
            "head": [format_rational(x) for x in s.head],
            "cycle": [format_rational(x) for x in s.cycle],
        }
    if isinstance(s, BoundedStream) and s.spec is not None:
        return _jsonable(s.spec)
    raise MalformedStreamError(f"stream {getattr(s, 'label', s)!r} has no spec form")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, Decimal):
        return str(value)
    return value
