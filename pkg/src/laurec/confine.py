"""Singularity confinement probe for the product-form recurrence.

Start a window one step before a zero: take tau_n = w, tau_{n+1} = x, and
tau_{n+2} = y with y^2 = -x^2 - J + eps*w, so that the next iterate is
exactly eps.  Running the recurrence in the exact truncated-series domain
then shows whether the singularity at eps -> 0 is confined: the iterate
three steps past the zero has nonnegative valuation, so the orbit passes
through the singular point with finite values and keeps memory of the
initial data.  Everything is exact rational arithmetic; the probe setups
are restricted to rational y_0 = sqrt(-x^2 - J).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .engine import DOMAIN_SERIES, iterate, make_builtin
from .kernel import (
    EpsSeries,
    Scalar,
    TruncationExhausted,
    es_eval,
    es_sqrt,
    rational_sqrt,
)

__all__ = [
    "ConfineError",
    "NonSquareSetup",
    "ProbeConfig",
    "ProbeReport",
    "probe",
    "ContinueReport",
    "continue_past",
    "CrossCheck",
    "cross_check",
    "series_pairs",
    "probe_to_json_dict",
]

VERDICT_CONFINED = "Confined"
VERDICT_NOT_CONFINED = "NotConfined"


class ConfineError(Exception):
    """Base class for confinement-probe errors."""


class NonSquareSetup(ConfineError):
    """-x^2 - J is not a positive rational square, so y_0 is irrational."""


@dataclass(frozen=True)
class ProbeConfig:
    x: Fraction
    j: Fraction
    w: Fraction
    order: int = 8

    @classmethod
    def of(cls, x: Scalar, j: Scalar, w: Scalar, order: int = 8) -> "ProbeConfig":
        return cls(Fraction(x), Fraction(j), Fraction(w), order)


def _y_zero(config: ProbeConfig) -> Fraction:
    target = -config.x * config.x - config.j
    if target <= 0:
        raise NonSquareSetup(f"-x^2 - J = {target} is not positive")
    r = rational_sqrt(target)
    if r is None:
        raise NonSquareSetup(f"-x^2 - J = {target} is not a rational square")
    return abs(r)


@dataclass
class ProbeReport:
    config: ProbeConfig
    y_zero: Fraction
    y_series: EpsSeries
    series: dict[int, EpsSeries]  # offsets 3..6 past the window start
    valuations: dict[int, int]
    leadings: dict[int, Fraction]
    verdict: str
    order_used: int


def _window(config: ProbeConfig, order: int) -> tuple[EpsSeries, EpsSeries, EpsSeries, Fraction]:
    if config.w == 0:
        raise ValueError("w must be nonzero")
    if order < 1:
        raise ValueError("truncation order must be positive")
    y0 = _y_zero(config)
    y_sq = EpsSeries(0, [y0 * y0, config.w] + [Fraction(0)] * (order - 2))
    y = es_sqrt(y_sq)
    w = EpsSeries.from_scalar(config.w, order)
    x = EpsSeries.from_scalar(config.x, order)
    return w, x, y, y0


def _attempt(config: ProbeConfig, order: int, steps: int) -> tuple[list[EpsSeries], EpsSeries, Fraction]:
    w, x, y, y0 = _window(config, order)
    rec = make_builtin("jrec", {"J": config.j})
    orbit = iterate(rec, [w, x, y], steps, domain=DOMAIN_SERIES)
    if orbit.failure is not None:
        raise TruncationExhausted(
            f"series orbit failed at index {orbit.failure.index} ({orbit.failure.kind})"
        )
    vals = orbit.values
    for k in range(3, len(vals)):
        if vals[k].is_zero_to_order():
            raise TruncationExhausted(
                f"iterate {k} is zero to the stored order; no valuation visible"
            )
    t3 = vals[3]
    if not (t3.valuation == 1 and t3.coeffs[0] == 1 and all(c == 0 for c in t3.coeffs[1:])):
        raise ConfineError(f"constructed window must give eps exactly, got {t3}")
    return vals, y, y0


def probe(config: ProbeConfig, retry: bool = True) -> ProbeReport:
    """Run the perturbed window through the recurrence and read valuations.

    The window (w, x, y) makes the third iterate exactly eps (asserted).
    The report carries the series for the next three iterates, their
    valuations and leading coefficients, and the verdict: Confined exactly
    when the iterate after the deep cancellation has valuation >= 0.  When
    the stored order runs out mid-computation the probe retries once at
    doubled order before giving up.
    """
    order = config.order
    try:
        vals, y, y0 = _attempt(config, order, 4)
    except TruncationExhausted:
        if not retry:
            raise
        order = 2 * config.order
        vals, y, y0 = _attempt(config, order, 4)
    series = {k: vals[k] for k in range(3, 7)}
    valuations = {k: s.valuation for k, s in series.items()}
    leadings = {k: s.leading() for k, s in series.items()}
    verdict = VERDICT_CONFINED if valuations[6] >= 0 else VERDICT_NOT_CONFINED
    return ProbeReport(config, y0, y, series, valuations, leadings, verdict, order)


@dataclass
class ContinueReport:
    series: dict[int, EpsSeries]
    valuations: dict[int, int]
    all_nonnegative: bool


def continue_past(config: ProbeConfig, extra_steps: int, retry: bool = True) -> ContinueReport:
    """Iterate beyond the confinement window and watch for new blow-ups.

    Runs the same probe plus ``extra_steps`` further iterates; every
    iterate past the cancellation must have valuation >= 0 for the orbit
    to count as safely continued.
    """
    if extra_steps < 0:
        raise ValueError("extra_steps must be nonnegative")
    order = config.order
    try:
        vals, _, _ = _attempt(config, order, 4 + extra_steps)
    except TruncationExhausted:
        if not retry:
            raise
        order = 2 * config.order
        vals, _, _ = _attempt(config, order, 4 + extra_steps)
    series = {k: vals[k] for k in range(7, len(vals))}
    valuations = {k: s.valuation for k, s in series.items()}
    return ContinueReport(series, valuations, all(v >= 0 for v in valuations.values()))


@dataclass
class CrossCheck:
    eps: Fraction
    tolerance: Fraction
    max_error: Fraction
    ok: bool
    pairs: list[tuple[int, Fraction, Fraction]]


def cross_check(config: ProbeConfig, eps: Scalar, through: int = 6) -> CrossCheck:
    """Specialize eps to a small rational and rerun in the rational domain.

    The rational window uses the truncated series evaluation of y, so the
    two routes share initial data exactly; the orbit values must then
    match the series predictions with error O(eps^2), checked at the
    tolerance 10 * eps^2.
    """
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    rep = probe(config)
    vals, _, _ = _attempt(config, rep.order_used, max(through, 6) - 2)
    y_at = es_eval(rep.y_series, eps)
    rec = make_builtin("jrec", {"J": config.j})
    orbit = iterate(rec, [config.w, config.x, y_at], max(through, 6) - 2, domain="rational")
    tol = 10 * eps * eps
    pairs = []
    worst = Fraction(0)
    for k in range(3, min(len(vals), len(orbit.values), through + 1)):
        predicted = es_eval(vals[k], eps)
        actual = orbit.values[k]
        err = abs(actual - predicted)
        pairs.append((k, actual, predicted))
        if err > worst:
            worst = err
    return CrossCheck(eps, tol, worst, worst <= tol, pairs)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def series_pairs(s: EpsSeries) -> list[tuple[int, str]]:
    """(power, coefficient) pairs of the stored part, coefficients as text."""
    return [
        (s.valuation + i, str(c)) for i, c in enumerate(s.coeffs)
    ]


def probe_to_json_dict(rep: ProbeReport, cont: ContinueReport | None = None) -> dict:
    out = {
        "schema": 1,
        "kind": "confine",
        "config": {
            "x": str(rep.config.x),
            "J": str(rep.config.j),
            "w": str(rep.config.w),
            "order": rep.config.order,
        },
        "order_used": rep.order_used,
        "y_zero": str(rep.y_zero),
        "y_series": series_pairs(rep.y_series),
        "series": {str(k): series_pairs(s) for k, s in rep.series.items()},
        "valuations": {str(k): v for k, v in rep.valuations.items()},
        "leadings": {str(k): str(c) for k, c in rep.leadings.items()},
        "verdict": rep.verdict,
    }
    if cont is not None:
        out["continued"] = {
            "series": {str(k): series_pairs(s) for k, s in cont.series.items()},
            "valuations": {str(k): v for k, v in cont.valuations.items()},
            "all_nonnegative": cont.all_nonnegative,
        }
    return out
