"""Height growth of exact orbits and what it says about integrability.

The logarithmic height of an orbit value separates two regimes: under a
linearizable map the heights grow polynomially in the index, while maps
with positive algebraic entropy push them up exponentially.  The report
tracks three views of the same data: the ratio sequence L_{n+1}/L_n,
whose limit is the growth rate; the window second differences
L_{n+3} - 2 L_{n+2} + L_n, which tend to zero when the heights obey the
same additive law as the degrees; and the slope sequence log(L_n)/n,
whose limit is the entropy.  The degrees of the polynomial orbit follow a
shifted Fibonacci law with the golden mean as growth rate, and the report
checks heights against the exact degree-law bounds.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .engine import DOMAIN_RATIONAL, Orbit, iterate, make_builtin
from .kernel import Scalar, UniPoly, dec_str, up_eval, up_is_monic

__all__ = [
    "GrowthError",
    "TooShort",
    "height",
    "log_height",
    "HeightSeries",
    "height_series",
    "second_differences",
    "GrowthReport",
    "growth_report",
    "GoldenMeanReport",
    "golden_mean",
    "fibonacci",
    "check_bounds",
    "DegreeReport",
    "degree_report",
    "EntropyEstimate",
    "entropy_estimate",
    "growth_csv_rows",
    "growth_to_json_dict",
]

_LN2 = math.log(2)

VERDICT_NONINTEGRABLE = "NonIntegrable"
VERDICT_INTEGRABLE = "DiophantineIntegrable"


class GrowthError(Exception):
    """Base class for growth-analysis errors."""


class TooShort(GrowthError):
    """Not enough data points for the requested analysis."""


def height(v: Scalar) -> int:
    """Naive height max(|numerator|, denominator); height(0) = 1."""
    if isinstance(v, int):
        return max(abs(v), 1)
    f = Fraction(v)
    return max(abs(f.numerator), f.denominator)


def _log_abs(n: int) -> float:
    """Natural log of a positive integer, exact bits only.

    Large integers never pass through a single float conversion: the value
    is split as (top 64 bits) * 2^shift, keeping the relative error near
    machine precision regardless of size.
    """
    bits = n.bit_length()
    if bits <= 512:
        return math.log(n)
    shift = bits - 64
    return math.log(n >> shift) + shift * _LN2


def log_height(v: Scalar) -> float:
    """Logarithmic height log(max(|num|, den)); zero maps to 0.0."""
    return _log_abs(height(v))


@dataclass
class HeightSeries:
    indices: list[int]
    log_values: list[float]
    heights: list[int] | None = None


def height_series(values: Sequence[Scalar], keep_exact: bool = False) -> HeightSeries:
    hs = [height(v) for v in values]
    return HeightSeries(
        list(range(len(values))),
        [_log_abs(h) for h in hs],
        hs if keep_exact else None,
    )


def second_differences(xs: Sequence[float]) -> list[float]:
    """The window differences x_{n+3} - 2 x_{n+2} + x_n for n = 0, 1, ...

    On log heights of a product-form orbit this measures the defect from
    the additive degree law; it decays to zero on confined orbits.
    """
    return [xs[n + 3] - 2 * xs[n + 2] + xs[n] for n in range(len(xs) - 3)]


def _values_of(orbit_or_values) -> list:
    if isinstance(orbit_or_values, Orbit):
        if orbit_or_values.failure is not None:
            raise GrowthError(
                f"orbit has a recorded failure at index {orbit_or_values.failure.index}"
            )
        return list(orbit_or_values.values)
    return list(orbit_or_values)


@dataclass
class GrowthReport:
    log_heights: list[float]
    ratios: list[tuple[int, float]]
    second_diffs: list[float]
    slopes: list[tuple[int, float]]
    s_points: list[tuple[int, float]]
    mid_mean: float | None
    last_mean: float | None
    margin: float
    verdict: str
    lam: float | None
    c_empirical: list[tuple[int, float]]


def growth_report(orbit_or_values, margin: float = 0.5) -> GrowthReport:
    """Classify height growth over a finite orbit.

    The verdict proxy: collect s_n = log(L_n)/log(n) wherever L_n > 0 and
    n >= 2, then compare the mean over the middle third of those points
    with the mean over the last third.  Bounded s means polynomially
    growing heights (DiophantineIntegrable); a rise above ``margin`` means
    exponential height growth (NonIntegrable), and the growth rate lambda
    is then estimated from the last-third ratios L_{n+1}/L_n.  The raw
    sequences always ride along so a caller can judge directly.
    """
    values = _values_of(orbit_or_values)
    if len(values) < 8:
        raise TooShort(f"need at least 8 orbit values, got {len(values)}")
    lh = [log_height(v) for v in values]
    ratios = [
        (n, lh[n + 1] / lh[n]) for n in range(len(lh) - 1) if lh[n] > 0
    ]
    sdiffs = second_differences(lh)
    slopes = [(n, math.log(lh[n]) / n) for n in range(1, len(lh)) if lh[n] > 0]
    s_points = [
        (n, math.log(lh[n]) / math.log(n)) for n in range(2, len(lh)) if lh[n] > 0
    ]
    phi = (1 + math.sqrt(5)) / 2
    c_emp = [(n, lh[n] / phi ** n) for n, _ in s_points[-5:]]
    if len(s_points) < 6:
        if all(height(v) == 1 for v in values):
            # heights stuck at 1: a bounded orbit
            return GrowthReport(
                lh, ratios, sdiffs, slopes, s_points, None, None, margin,
                VERDICT_INTEGRABLE, 1.0, c_emp,
            )
        raise TooShort(f"only {len(s_points)} usable height points")
    third = len(s_points) // 3
    mid = [s for _, s in s_points[third : 2 * third]]
    last = [s for _, s in s_points[2 * third :]]
    mid_mean = statistics.fmean(mid)
    last_mean = statistics.fmean(last)
    if last_mean - mid_mean > margin:
        verdict = VERDICT_NONINTEGRABLE
        tail_n = {n for n, _ in s_points[2 * third :]}
        tail_ratios = [r for n, r in ratios if n + 1 in tail_n or n in tail_n]
        lam = max(statistics.fmean(tail_ratios), 1.0) if tail_ratios else None
    else:
        verdict = VERDICT_INTEGRABLE
        lam = 1.0
    return GrowthReport(
        lh, ratios, sdiffs, slopes, s_points, mid_mean, last_mean, margin,
        verdict, lam, c_emp,
    )


@dataclass(frozen=True)
class GoldenMeanReport:
    characteristic: UniPoly
    linear_factor: UniPoly
    quadratic_factor: UniPoly
    roots: tuple[float, float, float]
    phi: float


def golden_mean(var: str = "x") -> GoldenMeanReport:
    """The cubic behind the degree recurrence d_{n+3} = d_{n+2} + d_{n+1} + 1.

    Folding the constant into the shift gives x^3 - 2x^2 + 1, which factors
    as (x - 1)(x^2 - x - 1); the roots are 1, the golden mean phi, and
    1 - phi = -1/phi.  The factorization is rechecked by multiplication.
    """
    cubic = UniPoly((1, 0, -2, 1), var)
    lin = UniPoly((-1, 1), var)
    quad = UniPoly((-1, -1, 1), var)
    if lin * quad != cubic:
        raise GrowthError("factor recheck failed for the degree cubic")
    phi = (1 + math.sqrt(5)) / 2
    return GoldenMeanReport(cubic, lin, quad, (1.0, phi, 1 - phi), phi)


def fibonacci(n: int) -> int:
    """f_0 = 0, f_1 = 1 convention."""
    if n < 0:
        raise ValueError("negative index")
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def check_bounds(n_value: Scalar, n_range: Iterable[int]) -> dict[int, bool]:
    """Strict sandwich (N-1)^(f_n - 1) < p_n(N) < N^(f_n - 1), exactly.

    The values p_n(N) come from the explicit recurrence run in the exact
    rational domain from (1, 1, 1); the powers are computed exactly too.
    Index 3 sits on the boundary (equality on the left), so the range must
    start at 4 or later.
    """
    n_value = Fraction(n_value)
    if n_value <= 2:
        raise ValueError("the sandwich needs N > 2")
    ns = sorted(set(n_range))
    if not ns:
        return {}
    if ns[0] < 4:
        raise ValueError("bounds hold strictly only from index 4")
    rec = make_builtin("nrec", {"N": n_value})
    orbit = iterate(rec, [1, 1, 1], ns[-1] - 2, domain=DOMAIN_RATIONAL)
    out: dict[int, bool] = {}
    for n in ns:
        e = fibonacci(n) - 1
        v = orbit.values[n]
        out[n] = (n_value - 1) ** e < v < n_value ** e
    return out


@dataclass
class DegreeReport:
    degrees: list[int]
    fib_reference: list[int]
    monic_flags: list[bool]
    additive_law_ok: bool
    fibonacci_law_ok: bool
    special_periods: dict[int, int | None]
    all_one_at_two: bool
    sign_pattern_ok: bool


def _minimal_period(seq: Sequence) -> int | None:
    n = len(seq)
    for p in range(1, n):
        if n - p < 3:
            break
        if all(seq[i + p] == seq[i] for i in range(n - p)):
            return p
    return None


def degree_report(polys: Sequence[UniPoly]) -> DegreeReport:
    """Laws satisfied by the polynomial orbit from (1, 1, 1).

    Checks d_n = f_n - 1 for n >= 1 and the additive law
    d_{n+3} = d_{n+2} + d_{n+1} + 1 throughout, monicity of every iterate,
    the periodic value sequences at N in {-1, 0, 1, 2}, and the sign
    pattern: values at indices divisible by 3 are negative for N <= -2.
    """
    degs = []
    for p in polys:
        d = p.degree()
        degs.append(int(d) if d != float("-inf") else 0)
    fib_ref = [fibonacci(n) for n in range(len(polys))]
    monic = [up_is_monic(p) for p in polys]
    additive = all(
        degs[n + 3] == degs[n + 2] + degs[n + 1] + 1 for n in range(len(degs) - 3)
    )
    fib_ok = all(degs[n] == fib_ref[n] - 1 for n in range(1, len(degs)))
    periods: dict[int, int | None] = {}
    for v in (-1, 0, 1, 2):
        seq = [up_eval(p, v) for p in polys]
        periods[v] = _minimal_period(seq)
    all_one = all(up_eval(p, 2) == 1 for p in polys)
    sign_ok = all(
        up_eval(polys[n], nv) < 0
        for nv in (-2, -3)
        for n in range(3, len(polys), 3)
    )
    return DegreeReport(
        degs, fib_ref, monic, additive, fib_ok, periods, all_one, sign_ok
    )


@dataclass(frozen=True)
class EntropyEstimate:
    slope: float
    window: tuple[int, int]
    points: int


def entropy_estimate(ys: Sequence[float], start: int, stop: int | None = None) -> EntropyEstimate:
    """Least-squares slope of log(y_n) against n over [start, stop).

    For exponentially growing heights or degrees the slope estimates the
    algebraic entropy, here the log of the golden mean.
    """
    stop = len(ys) if stop is None else stop
    xs = [n for n in range(start, stop) if ys[n] > 0]
    if len(xs) < 10:
        raise TooShort(f"need at least 10 positive points, got {len(xs)}")
    lys = [math.log(ys[n]) for n in xs]
    fit = statistics.linear_regression(xs, lys)
    return EntropyEstimate(fit.slope, (start, stop), len(xs))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.12g}"


def growth_csv_rows(orbit_or_values, margin: float = 0.5) -> list[list[str]]:
    values = _values_of(orbit_or_values)
    rep = growth_report(values, margin)
    series = height_series(values, keep_exact=True)
    ratio_at = dict(rep.ratios)
    slope_at = dict(rep.slopes)
    rows = [["n", "H", "lambda", "ratio", "second_diff", "slope"]]
    for n in range(len(values)):
        sd = rep.second_diffs[n] if n < len(rep.second_diffs) else None
        rows.append(
            [
                str(n),
                dec_str(series.heights[n]),
                _fmt(series.log_values[n]),
                _fmt(ratio_at.get(n)),
                _fmt(sd),
                _fmt(slope_at.get(n)),
            ]
        )
    return rows


def growth_to_json_dict(orbit_or_values, margin: float = 0.5) -> dict:
    values = _values_of(orbit_or_values)
    rep = growth_report(values, margin)
    series = height_series(values, keep_exact=True)
    return {
        "schema": 1,
        "kind": "growth",
        "count": len(values),
        "verdict": rep.verdict,
        "lambda": rep.lam,
        "margin": rep.margin,
        "mid_mean": rep.mid_mean,
        "last_mean": rep.last_mean,
        "H": [dec_str(h) for h in series.heights],
        "log_heights": rep.log_heights,
        "ratios": [[n, r] for n, r in rep.ratios],
        "second_diffs": rep.second_diffs,
        "slopes": [[n, s] for n, s in rep.slopes],
        "s_points": [[n, s] for n, s in rep.s_points],
        "c_empirical": [[n, c] for n, c in rep.c_empirical],
    }
