"""Recurrence definitions and exact orbit iteration.

A recurrence is either in product form,

    tau_{n+k} * tau_n = F(tau_{n+1}, ..., tau_{n+k-1}),

or explicit form,

    tau_{n+k} = G(tau_n, ..., tau_{n+k-1}).

The right-hand side is stored as a LaurentPoly over window variables
``v1..v{k-1}`` (product) or ``v0..v{k-1}`` (explicit) plus any parameters
left symbolic.  Orbits run over five exact domains: integer, rational,
laurent, unipoly, series.  A failed step (non-exact division, zero
divisor, a quotient leaving the Laurent ring) stops the orbit and is
recorded, never raised.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .kernel import (
    DivisorZeroToOrder,
    EpsSeries,
    LaurentPoly,
    LpStats,
    NotDivisible,
    Scalar,
    UniPoly,
    dec_str,
    lp_apply,
    lp_exact_div,
    lp_numerator,
    lp_stats,
    parse_laurent,
)

__all__ = [
    "EngineError",
    "UnknownName",
    "BadArity",
    "RecurrenceDef",
    "make_builtin",
    "make_custom",
    "BUILTIN_NAMES",
    "OrbitFailure",
    "Orbit",
    "iterate",
    "NonintegralScan",
    "first_nonintegral",
    "CertificateReport",
    "laurent_certificate",
    "PairProbe",
    "coprimality_probe",
    "Classification",
    "orbit_classify",
    "orbit_to_json_dict",
    "orbit_csv_rows",
]

PRODUCT = "product"
EXPLICIT = "explicit"

DOMAIN_INTEGER = "integer"
DOMAIN_RATIONAL = "rational"
DOMAIN_LAURENT = "laurent"
DOMAIN_UNIPOLY = "unipoly"
DOMAIN_SERIES = "series"

FAIL_NON_EXACT = "NonExactDivision"
FAIL_ZERO_DIVISION = "ZeroDivision"
FAIL_NOT_LAURENT = "NotLaurent"


class EngineError(Exception):
    """Base class for recurrence-engine errors."""


class UnknownName(EngineError):
    """No builtin recurrence under that name."""


class BadArity(EngineError):
    """Parameter set or window length does not fit the recurrence."""


@dataclass(frozen=True)
class RecurrenceDef:
    """A recurrence of fixed order with (possibly symbolic) parameters.

    ``params`` maps parameter names to exact rationals, or None when the
    parameter is symbolic.  Numeric parameters are already folded into the
    coefficients of ``rhs``; symbolic ones appear as extra rhs variables.
    """

    name: str
    order: int
    form: str
    rhs: LaurentPoly
    params: Mapping[str, Fraction | None] = field(default_factory=dict)

    def window_vars(self) -> tuple[str, ...]:
        lo = 1 if self.form == PRODUCT else 0
        return tuple(f"v{i}" for i in range(lo, self.order))

    def symbolic_params(self) -> tuple[str, ...]:
        return tuple(n for n, v in self.params.items() if v is None)

    def describe(self) -> str:
        ps = ", ".join(
            f"{n}={v}" if v is not None else f"{n}=symbolic" for n, v in self.params.items()
        )
        return f"{self.name}({ps})" if ps else self.name


def _coerce_param(name: str, value) -> Fraction | None:
    if value is None:
        return None
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        if value == "symbolic":
            return None
        return Fraction(value)
    raise BadArity(f"parameter {name}={value!r} is not an exact rational or symbolic")


def _build_rhs(window: Sequence[str], symbolic: Sequence[str], build) -> LaurentPoly:
    variables = tuple(window) + tuple(symbolic)
    gens = {name: LaurentPoly.var(variables, name) for name in variables}
    return build(gens, variables)


BUILTIN_NAMES = ("jrec", "nrec", "somos", "somos4", "integ", "linear")


def make_builtin(name: str, params: Mapping[str, object] | None = None) -> RecurrenceDef:
    """Construct a builtin recurrence.

    jrec(J):        tau_{n+3} tau_n = tau_{n+2}^2 + tau_{n+1}^2 + J
    nrec(N):        tau_{n+3} = N tau_{n+2} tau_{n+1} - tau_n
    somos(k):       tau_{n+k} tau_n = sum_j tau_{n+k-j} tau_{n+j}
    somos4(alpha, beta):
                    tau_{n+4} tau_n = alpha tau_{n+3} tau_{n+1} + beta tau_{n+2}^2
    integ(z0, J):   x_{n+2} x_n = x_{n+1}^2 + z0^2 + J
    linear(N, z0):  x_{n+2} = N z0 x_{n+1} - x_n

    Missing parameters stay symbolic; ``somos`` needs a concrete integer k >= 2.
    """
    params = dict(params or {})

    def split(expected: Sequence[str]) -> dict[str, Fraction | None]:
        unknown = set(params) - set(expected)
        if unknown:
            raise BadArity(f"{name} does not take parameters {sorted(unknown)}")
        return {p: _coerce_param(p, params.get(p)) for p in expected}

    if name == "jrec":
        pm = split(["J"])
        sym = [p for p, v in pm.items() if v is None]

        def build(g, _):
            J = g["J"] if pm["J"] is None else pm["J"]
            return g["v2"] ** 2 + g["v1"] ** 2 + J

        rhs = _build_rhs(("v1", "v2"), sym, build)
        return RecurrenceDef("jrec", 3, PRODUCT, rhs, pm)

    if name == "nrec":
        pm = split(["N"])
        sym = [p for p, v in pm.items() if v is None]

        def build(g, _):
            N = g["N"] if pm["N"] is None else pm["N"]
            return N * g["v2"] * g["v1"] - g["v0"]

        rhs = _build_rhs(("v0", "v1", "v2"), sym, build)
        return RecurrenceDef("nrec", 3, EXPLICIT, rhs, pm)

    if name == "somos":
        if "k" not in params:
            raise BadArity("somos needs an integer order parameter k")
        k = params.pop("k")
        if isinstance(k, Fraction) and k.denominator == 1:
            k = int(k)
        if not isinstance(k, int) or k < 2:
            raise BadArity(f"somos order must be an integer >= 2, got {k!r}")
        if params:
            raise BadArity(f"somos does not take parameters {sorted(params)}")

        def build(g, _):
            acc = None
            for j in range(1, k // 2 + 1):
                term = g[f"v{k - j}"] * g[f"v{j}"]
                acc = term if acc is None else acc + term
            return acc

        rhs = _build_rhs(tuple(f"v{i}" for i in range(1, k)), (), build)
        return RecurrenceDef(f"somos{k}", k, PRODUCT, rhs, {})

    if name == "somos4":
        pm = split(["alpha", "beta"])
        sym = [p for p, v in pm.items() if v is None]

        def build(g, _):
            alpha = g["alpha"] if pm["alpha"] is None else pm["alpha"]
            beta = g["beta"] if pm["beta"] is None else pm["beta"]
            return alpha * g["v3"] * g["v1"] + beta * g["v2"] ** 2

        rhs = _build_rhs(("v1", "v2", "v3"), sym, build)
        return RecurrenceDef("somos4", 4, PRODUCT, rhs, pm)

    if name == "integ":
        pm = split(["z0", "J"])
        sym = [p for p, v in pm.items() if v is None]

        def build(g, _):
            z0 = g["z0"] if pm["z0"] is None else pm["z0"]
            J = g["J"] if pm["J"] is None else pm["J"]
            return g["v1"] ** 2 + z0 ** 2 + J

        rhs = _build_rhs(("v1",), sym, build)
        return RecurrenceDef("integ", 2, PRODUCT, rhs, pm)

    if name == "linear":
        pm = split(["N", "z0"])
        sym = [p for p, v in pm.items() if v is None]

        def build(g, _):
            N = g["N"] if pm["N"] is None else pm["N"]
            z0 = g["z0"] if pm["z0"] is None else pm["z0"]
            return N * z0 * g["v1"] - g["v0"]

        rhs = _build_rhs(("v0", "v1"), sym, build)
        return RecurrenceDef("linear", 2, EXPLICIT, rhs, pm)

    raise UnknownName(f"no builtin recurrence named {name!r}")


_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def make_custom(order: int, form: str, rhs_text: str, name: str = "custom") -> RecurrenceDef:
    """Build a recurrence from a right-hand-side expression.

    Window variables are ``v1..v{order-1}`` for product form and
    ``v0..v{order-1}`` for explicit form; any other identifier in the
    expression becomes a symbolic parameter.
    """
    if order < 2:
        raise BadArity("order must be at least 2")
    if form not in (PRODUCT, EXPLICIT):
        raise BadArity(f"form must be {PRODUCT!r} or {EXPLICIT!r}")
    lo = 1 if form == PRODUCT else 0
    window = tuple(f"v{i}" for i in range(lo, order))
    names = set(_IDENT.findall(rhs_text))
    stray = {n for n in names if re.fullmatch(r"v\d+", n) and n not in window}
    if stray:
        raise BadArity(f"window variables {sorted(stray)} out of range for order {order} {form} form")
    symbolic = tuple(sorted(names - set(window)))
    rhs = parse_laurent(rhs_text, window + symbolic)
    return RecurrenceDef(name, order, form, rhs, {p: None for p in symbolic})


# ---------------------------------------------------------------------------
# Orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitFailure:
    index: int
    kind: str


@dataclass
class Orbit:
    recurrence: RecurrenceDef
    domain: str
    values: list
    failure: OrbitFailure | None = None
    detected_period: int | None = None
    direction: str = "forward"

    def __len__(self) -> int:
        return len(self.values)

    def ok(self) -> bool:
        return self.failure is None


def _infer_domain(values: Sequence) -> str:
    if all(isinstance(v, int) for v in values):
        return DOMAIN_INTEGER
    kinds = set()
    for v in values:
        if isinstance(v, (int, Fraction)):
            kinds.add(DOMAIN_RATIONAL)
        elif isinstance(v, LaurentPoly):
            kinds.add(DOMAIN_LAURENT)
        elif isinstance(v, UniPoly):
            kinds.add(DOMAIN_UNIPOLY)
        elif isinstance(v, EpsSeries):
            kinds.add(DOMAIN_SERIES)
        else:
            raise TypeError(f"unsupported orbit value {v!r}")
    if len(kinds) != 1:
        raise TypeError("initial window mixes value domains")
    return kinds.pop()


def _lift(value, domain: str, like):
    """Embed a bare scalar into the orbit's domain."""
    if not isinstance(value, (int, Fraction)):
        return value
    if domain == DOMAIN_INTEGER:
        f = Fraction(value)
        if f.denominator != 1:
            raise BadArity(f"value {value} is not an integer")
        return int(f)
    if domain == DOMAIN_RATIONAL:
        return Fraction(value)
    if domain == DOMAIN_LAURENT:
        return LaurentPoly.const(like.vars, value)
    if domain == DOMAIN_UNIPOLY:
        return UniPoly.const(value, like.var)
    if domain == DOMAIN_SERIES:
        return EpsSeries.from_scalar(value, like.truncation_order)
    raise ValueError(f"unknown domain {domain!r}")


def _to_domain(value, domain: str, like):
    """Close a computed step value into the orbit domain.

    Returns (value, None), or (None, failure_kind) when an integer orbit
    produced a genuine fraction.
    """
    if domain == DOMAIN_INTEGER:
        f = Fraction(value) if not isinstance(value, Fraction) else value
        if f.denominator != 1:
            return None, FAIL_NON_EXACT
        return int(f), None
    if domain == DOMAIN_RATIONAL:
        return Fraction(value) if isinstance(value, int) else value, None
    return _lift(value, domain, like), None


def _exact_div(num, den, domain: str):
    """Domain division; returns (value, None) or (None, failure_kind)."""
    if domain == DOMAIN_INTEGER:
        if den == 0:
            return None, FAIL_ZERO_DIVISION
        q = Fraction(num) / Fraction(den)
        if q.denominator != 1:
            return None, FAIL_NON_EXACT
        return int(q), None
    if domain == DOMAIN_RATIONAL:
        if den == 0:
            return None, FAIL_ZERO_DIVISION
        return Fraction(num) / Fraction(den), None
    if domain == DOMAIN_LAURENT:
        if den.is_zero():
            return None, FAIL_ZERO_DIVISION
        try:
            return lp_exact_div(num, den), None
        except NotDivisible:
            return None, FAIL_NOT_LAURENT
    if domain == DOMAIN_UNIPOLY:
        if den.is_zero():
            return None, FAIL_ZERO_DIVISION
        try:
            return num.exact_div(den), None
        except NotDivisible:
            return None, FAIL_NON_EXACT
    if domain == DOMAIN_SERIES:
        try:
            return num / den, None
        except DivisorZeroToOrder:
            return None, FAIL_ZERO_DIVISION
    raise ValueError(f"unknown domain {domain!r}")


def _param_env(rec: RecurrenceDef, domain: str, like) -> dict[str, object]:
    """Map symbolic parameters to ring elements of the orbit domain."""
    env: dict[str, object] = {}
    for pname in rec.symbolic_params():
        if domain == DOMAIN_LAURENT:
            if pname not in like.vars:
                raise BadArity(
                    f"symbolic parameter {pname!r} is not a variable of the orbit ring {like.vars!r}"
                )
            env[pname] = LaurentPoly.var(like.vars, pname)
        elif domain == DOMAIN_UNIPOLY:
            if pname != like.var:
                raise BadArity(
                    f"symbolic parameter {pname!r} does not match the polynomial variable {like.var!r}"
                )
            env[pname] = UniPoly.gen(like.var)
        else:
            raise BadArity(
                f"symbolic parameter {pname!r} needs a symbolic domain, not {domain}"
            )
    return env


def _explicit_inverse_rhs(rec: RecurrenceDef) -> LaurentPoly:
    """For explicit G = H(v1..v_{k-1}) - v0, the backward step needs H.

    Reversible explicit forms must be linear in v0 with coefficient -1.
    """
    v0 = LaurentPoly.var(rec.rhs.vars, "v0")
    h = rec.rhs + v0
    if any(key[rec.rhs.vars.index("v0")] for key in h.terms):
        raise BadArity(f"{rec.name} is not reversible: rhs is not H - v0")
    return h


def iterate(
    rec: RecurrenceDef,
    init: Sequence,
    steps: int,
    domain: str | None = None,
    direction: str = "forward",
) -> Orbit:
    """Run the recurrence, appending up to ``steps`` values.

    ``init`` is a window of ``order`` consecutive values in natural index
    order, for either direction.  A backward orbit's value list is in
    generation order: reversed initial window first, then successively
    earlier terms.  The orbit stops at the first failing step and records
    the failure instead of raising.
    """
    k = rec.order
    if len(init) != k:
        raise BadArity(f"initial window needs {k} values, got {len(init)}")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if direction not in ("forward", "backward"):
        raise ValueError(f"bad direction {direction!r}")
    values = list(init)
    if domain is None:
        domain = _infer_domain(values)
    if domain == DOMAIN_RATIONAL:
        values = [Fraction(v) if isinstance(v, int) else v for v in values]
    like = values[0]
    penv = _param_env(rec, domain, like)
    backward = direction == "backward"
    if backward:
        values = values[::-1]
        rhs = _explicit_inverse_rhs(rec) if rec.form == EXPLICIT else rec.rhs
    else:
        rhs = rec.rhs

    failure = None
    wnames = rec.window_vars()
    for _ in range(steps):
        window = values[-k:]
        env = dict(penv)
        for name in wnames:
            i = int(name[1:])
            if backward:
                # window holds tau_{j+k-1} .. tau_j in generation order and
                # the new value is tau_{j-1}, so v_i refers to tau_{j-1+i}
                if i == 0:
                    continue
                env[name] = window[k - i]
            else:
                env[name] = window[i]
        rhs_val = lp_apply(rhs, env)
        if rec.form == PRODUCT:
            if domain in (DOMAIN_LAURENT, DOMAIN_UNIPOLY, DOMAIN_SERIES):
                rhs_val = _lift(rhs_val, domain, like)
            nxt, kind = _exact_div(rhs_val, window[0], domain)
        else:
            val = rhs_val - window[0] if backward else rhs_val
            nxt, kind = _to_domain(val, domain, like)
        if kind is not None:
            failure = OrbitFailure(len(values), kind)
            break
        values.append(nxt)
    return Orbit(rec, domain, values, failure, None, direction)


# ---------------------------------------------------------------------------
# Scans and certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonintegralScan:
    first_index: int | None
    failure: OrbitFailure | None
    checked: int


def first_nonintegral(rec: RecurrenceDef, init: Sequence[Scalar], max_steps: int) -> NonintegralScan:
    """Index of the first orbit value with a nontrivial denominator.

    Runs over exact rationals; a zero divisor shows up as the recorded
    failure, not an exception.
    """
    orbit = iterate(rec, [Fraction(v) for v in init], max_steps, domain=DOMAIN_RATIONAL)
    for i, v in enumerate(orbit.values):
        if v.denominator != 1:
            return NonintegralScan(i, orbit.failure, len(orbit.values))
    return NonintegralScan(None, orbit.failure, len(orbit.values))


_RING_LETTERS = "abcdefgh"


def certificate_ring(rec: RecurrenceDef) -> tuple[str, ...]:
    k = rec.order
    if k <= len(_RING_LETTERS):
        letters = tuple(_RING_LETTERS[:k])
    else:
        letters = tuple(f"t{i}" for i in range(k))
    return letters + rec.symbolic_params()


@dataclass
class CertificateReport:
    ok: bool
    failure: OrbitFailure | None
    stats: list[LpStats]
    orbit: Orbit

    def ring_vars(self) -> tuple[str, ...]:
        return self.orbit.values[0].vars


def laurent_certificate(rec: RecurrenceDef, steps: int) -> CertificateReport:
    """Iterate from symbolic initial data; certify every new iterate stays a
    Laurent polynomial with integer coefficients in the initial window."""
    ring = certificate_ring(rec)
    gens = [LaurentPoly.var(ring, ring[i]) for i in range(rec.order)]
    orbit = iterate(rec, gens, steps, domain=DOMAIN_LAURENT)
    stats = [lp_stats(v) for v in orbit.values]
    return CertificateReport(orbit.failure is None, orbit.failure, stats, orbit)


@dataclass(frozen=True)
class PairProbe:
    label: str
    accumulated_gcd: int
    probably_coprime: bool
    trials: int


def _strip_point_content(g: int, m: int) -> int:
    g = abs(g)
    while g > 1:
        d = math.gcd(g, m)
        if d == 1:
            break
        g //= d
    return g


def _probe_pair(f: LaurentPoly, g: LaurentPoly, rng: random.Random, trials: int) -> tuple[int, int]:
    nf, _ = lp_numerator(f)
    ng, _ = lp_numerator(g)
    names = nf.vars
    acc = 0
    done = 0
    for _ in range(trials):
        point = {v: rng.randint(2, 10 ** 6) for v in names}
        m = 1
        for v in point.values():
            m *= v
        fv = _int_eval(nf, point)
        gv = _int_eval(ng, point)
        d = _strip_point_content(math.gcd(fv, gv), m)
        acc = math.gcd(acc, d)
        done += 1
        if acc == 1:
            break
    return acc, done


def _int_eval(f: LaurentPoly, point: Mapping[str, int]) -> int:
    total = 0
    vals = [point[v] for v in f.vars]
    for key, coeff in f.terms.items():
        acc = coeff
        for base, e in zip(vals, key):
            if e:
                acc *= base ** e
        total += acc
    return total


def coprimality_probe(
    values: Sequence[LaurentPoly],
    window: int,
    trials: int = 20,
    seed: int = 0,
    plus_param: str | None = "J",
) -> list[PairProbe]:
    """Randomized coprimality evidence for the trailing iterates.

    For each adjacent pair among the last ``window+1`` values, and for the
    matching (tau_j, tau_{j+1}^2 + J) pairs when the ring has the named
    parameter, evaluate at random integer points, strip prime content
    coming from the points themselves, and accumulate a gcd.  A pair is
    probably coprime when the accumulated gcd reaches 1.  One-sided: a gcd
    above 1 is only evidence, never proof, of a common factor.
    """
    if len(values) < window + 1:
        raise BadArity(f"need at least {window + 1} values, got {len(values)}")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = random.Random(seed)
    start = len(values) - window - 1
    ring = values[0].vars
    jpoly = None
    if plus_param and plus_param in ring:
        jpoly = LaurentPoly.var(ring, plus_param)
    out: list[PairProbe] = []
    for j in range(start, len(values) - 1):
        f, g = values[j], values[j + 1]
        acc, done = _probe_pair(f, g, rng, trials)
        out.append(PairProbe(f"tau_{j},tau_{j + 1}", acc, acc == 1, done))
        if jpoly is not None:
            acc, done = _probe_pair(f, g * g + jpoly, rng, trials)
            out.append(PairProbe(f"tau_{j},tau_{j + 1}^2+{plus_param}", acc, acc == 1, done))
            acc, done = _probe_pair(g, f * f + jpoly, rng, trials)
            out.append(PairProbe(f"tau_{j + 1},tau_{j}^2+{plus_param}", acc, acc == 1, done))
    return out


# ---------------------------------------------------------------------------
# Orbit classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    kind: str  # FixedPoint | Periodic | ZeroHit | Growing | Undetermined
    period: int | None = None
    index: int | None = None


def orbit_classify(rec: RecurrenceDef, init: Sequence[Scalar], max_steps: int) -> Classification:
    """Classify a rational orbit over a finite horizon.

    Periodic(p) needs the state window to recur (p is then minimal for the
    eventual cycle); ZeroHit flags the first zero value of a product-form
    orbit; Growing means strictly increasing |tau| over the tail half.
    Undetermined covers horizons where none of those can be read off.
    """
    k = rec.order
    orbit = iterate(rec, [Fraction(v) for v in init], max_steps, domain=DOMAIN_RATIONAL)
    vals = orbit.values
    if rec.form == PRODUCT:
        for i, v in enumerate(vals):
            if v == 0:
                return Classification("ZeroHit", index=i)
    seen: dict[tuple, int] = {}
    for i in range(len(vals) - k + 1):
        win = tuple(vals[i : i + k])
        if win in seen:
            p = i - seen[win]
            if p == 1:
                return Classification("FixedPoint", period=1)
            return Classification("Periodic", period=p)
        seen[win] = i
    tail = vals[len(vals) // 2 :]
    if len(tail) >= 2 and all(abs(tail[i + 1]) > abs(tail[i]) for i in range(len(tail) - 1)):
        return Classification("Growing")
    return Classification("Undetermined")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _value_str(v) -> str:
    if isinstance(v, int):
        return dec_str(v)
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return dec_str(v.numerator)
        return f"{dec_str(v.numerator)}/{dec_str(v.denominator)}"
    return str(v)


def orbit_to_json_dict(orbit: Orbit) -> dict:
    return {
        "schema": 1,
        "kind": "orbit",
        "recurrence": {
            "name": orbit.recurrence.name,
            "order": orbit.recurrence.order,
            "form": orbit.recurrence.form,
            "params": {
                n: (str(v) if v is not None else "symbolic")
                for n, v in orbit.recurrence.params.items()
            },
        },
        "domain": orbit.domain,
        "direction": orbit.direction,
        "values": [_value_str(v) for v in orbit.values],
        "failure": (
            {"index": orbit.failure.index, "kind": orbit.failure.kind}
            if orbit.failure
            else None
        ),
        "detected_period": orbit.detected_period,
    }


def orbit_csv_rows(orbit: Orbit) -> list[list[str]]:
    rows = [["n", "value"]]
    for i, v in enumerate(orbit.values):
        rows.append([str(i), _value_str(v)])
    return rows
