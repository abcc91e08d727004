"""The cubic surface x^2 + y^2 + z^2 + J = N x y z and its maps.

Orbits of the third-order explicit recurrence live on level sets of this
surface: consecutive triples (tau_n, tau_{n+1}, tau_{n+2}) all satisfy the
same equation.  This module checks membership, computes the two conserved
quantities, applies the coordinate Vieta involutions and the shift map,
and handles the fixed-z reduction to an order-two recurrence.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .engine import DOMAIN_RATIONAL, iterate, make_builtin
from .kernel import LaurentPoly, Scalar, rational_sqrt

__all__ = [
    "SurfaceError",
    "SeedOffSurface",
    "ZeroCoordinate",
    "FormMismatch",
    "SurfaceParams",
    "surface_residual",
    "on_surface",
    "surface_singular",
    "invariant_n",
    "invariant_j",
    "vieta",
    "vieta_division",
    "vieta_checked",
    "shift_step",
    "TripleRun",
    "generate_triples",
    "DegenerateCheck",
    "degenerate_check",
    "FixedZFamily",
    "fixed_z_family",
    "triples_csv_rows",
    "triples_to_json_dict",
]


class SurfaceError(Exception):
    """Base class for surface-level errors."""


class SeedOffSurface(SurfaceError):
    """Seed triple does not satisfy the surface equation."""


class ZeroCoordinate(SurfaceError):
    """A coordinate needed as a divisor is zero."""


class FormMismatch(SurfaceError):
    """Subtraction and division forms of the same map disagree."""


@dataclass(frozen=True)
class SurfaceParams:
    n: Fraction
    j: Fraction

    @classmethod
    def of(cls, n: Scalar, j: Scalar) -> "SurfaceParams":
        return cls(Fraction(n), Fraction(j))


def _triple(t: Sequence[Scalar]) -> tuple[Fraction, Fraction, Fraction]:
    if len(t) != 3:
        raise ValueError(f"a triple needs 3 coordinates, got {len(t)}")
    x, y, z = (Fraction(c) for c in t)
    return x, y, z


def surface_residual(triple: Sequence[Scalar], params: SurfaceParams) -> Fraction:
    """x^2 + y^2 + z^2 + J - N x y z; zero exactly on the surface."""
    x, y, z = _triple(triple)
    return x * x + y * y + z * z + params.j - params.n * x * y * z


def on_surface(triple: Sequence[Scalar], params: SurfaceParams) -> bool:
    return surface_residual(triple, params) == 0


def surface_singular(params: SurfaceParams) -> bool:
    """True when the surface has a singular point.

    That happens for J = 0 (the origin) and, for N != 0, for J = -4/N^2
    (the four symmetric points with |coordinates| 2/|N|).
    """
    if params.j == 0:
        return True
    return params.n != 0 and params.j == Fraction(-4) / (params.n * params.n)


def invariant_n(triple: Sequence[Scalar], j: Scalar | None = None):
    """The conserved ratio (x^2 + y^2 + z^2 + J) / (x y z).

    With ``j`` numeric the result is a Fraction; with ``j`` omitted it is a
    degree-one polynomial in the variable J.
    """
    x, y, z = _triple(triple)
    p = x * y * z
    if p == 0:
        raise ZeroCoordinate("invariant needs all three coordinates nonzero")
    s = x * x + y * y + z * z
    if j is None:
        jv = LaurentPoly.var(("J",), "J")
        return (jv + s) * (Fraction(1) / p)
    return (s + Fraction(j)) / p


def invariant_j(triple: Sequence[Scalar], n: Scalar) -> Fraction:
    """The conserved level N x y z - x^2 - y^2 - z^2."""
    x, y, z = _triple(triple)
    return Fraction(n) * x * y * z - x * x - y * y - z * z


def vieta(triple: Sequence[Scalar], n: Scalar, index: int = 2) -> tuple[Fraction, Fraction, Fraction]:
    """Flip one coordinate to the other root of its quadratic.

    The surface equation is a quadratic in each coordinate; the two roots
    sum to N times the product of the other two, so the flip is
    t -> N * (others product) - t.  An involution on every input.
    """
    t = list(_triple(triple))
    if index not in (0, 1, 2):
        raise ValueError("index must be 0, 1 or 2")
    others = [t[i] for i in range(3) if i != index]
    t[index] = Fraction(n) * others[0] * others[1] - t[index]
    return tuple(t)


def vieta_division(triple: Sequence[Scalar], j: Scalar, index: int = 2) -> tuple[Fraction, Fraction, Fraction]:
    """The same flip computed as (sum of other squares + J) / old coordinate.

    The two root formulas agree exactly on the surface; off it they differ,
    so this form doubles as a membership check.
    """
    t = list(_triple(triple))
    if index not in (0, 1, 2):
        raise ValueError("index must be 0, 1 or 2")
    if t[index] == 0:
        raise ZeroCoordinate("division form needs a nonzero coordinate to flip")
    others = [t[i] for i in range(3) if i != index]
    t[index] = (others[0] ** 2 + others[1] ** 2 + Fraction(j)) / t[index]
    return tuple(t)


def vieta_checked(
    triple: Sequence[Scalar], params: SurfaceParams, index: int = 2
) -> tuple[Fraction, Fraction, Fraction]:
    """Apply the flip by both formulas and insist they agree."""
    sub = vieta(triple, params.n, index)
    t = _triple(triple)
    if t[index] != 0:
        div = vieta_division(triple, params.j, index)
        if sub != div:
            raise FormMismatch(
                f"flip at index {index} disagrees: subtraction {sub[index]} vs division {div[index]}"
            )
    return sub


def shift_step(triple: Sequence[Scalar], n: Scalar) -> tuple[Fraction, Fraction, Fraction]:
    """(tau_k, tau_{k+1}, tau_{k+2}) -> (tau_{k+1}, tau_{k+2}, tau_{k+3})."""
    x, y, z = _triple(triple)
    return (y, z, Fraction(n) * z * y - x)


@dataclass
class TripleRun:
    params: SurfaceParams
    triples: list[tuple[Fraction, Fraction, Fraction]]
    verdict: str  # "Ok" | "Periodic" | "FatalDegenerate"
    period: int | None = None
    degenerate_index: int | None = None


def generate_triples(seed: Sequence[Scalar], params: SurfaceParams, count: int) -> TripleRun:
    """Walk the shift map from a seed triple on the surface.

    Produces up to ``count`` triples (seed included).  Stops early when the
    walk revisits a triple (verdict Periodic with the cycle length) or hits
    a triple with two or more zero coordinates, from which the walk decays
    to the zero triple (verdict FatalDegenerate).
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    t = _triple(seed)
    if not on_surface(t, params):
        raise SeedOffSurface(f"residual {surface_residual(t, params)} != 0 at {t}")
    triples = [t]
    seen = {t: 0}
    verdict = "Ok"
    period = None
    degenerate_index = None
    if sum(1 for c in t if c == 0) >= 2:
        return TripleRun(params, triples, "FatalDegenerate", None, 0)
    for i in range(1, count):
        t = shift_step(t, params.n)
        if t in seen:
            verdict = "Periodic"
            period = i - seen[t]
            break
        triples.append(t)
        seen[t] = i
        if sum(1 for c in t if c == 0) >= 2:
            verdict = "FatalDegenerate"
            degenerate_index = i
            break
    return TripleRun(params, triples, verdict, period, degenerate_index)


@dataclass(frozen=True)
class DegenerateCheck:
    possible: bool
    witness: tuple[Fraction, Fraction, Fraction] | None


def degenerate_check(j: Scalar) -> DegenerateCheck:
    """Does the surface contain a rational point with two zero coordinates?

    Such a point is (0, r, 0) with r^2 = -J, and the shift map sends it to
    the all-zero triple, so it exists exactly when -J is a rational square.
    """
    r = rational_sqrt(-Fraction(j))
    if r is None:
        return DegenerateCheck(False, None)
    return DegenerateCheck(True, (Fraction(0), r, Fraction(0)))


@dataclass
class FixedZFamily:
    z0: Fraction
    params: SurfaceParams
    triples: list[tuple[Fraction, Fraction, Fraction]]
    bounded: bool


def fixed_z_family(
    x0: Scalar, x1: Scalar, z0: Scalar, n: Scalar, count: int
) -> FixedZFamily:
    """Slice the surface along z = z0 and walk the induced order-two map.

    The slice carries x_{k+2} = N z0 x_{k+1} - x_k, equivalently the
    product form x_{k+2} x_k = x_{k+1}^2 + z0^2 + J with J read off from
    the seed.  Both forms are iterated and must agree step by step; the
    product route is skipped only while a zero value blocks its division.
    Emits (x_k, x_{k+1}, z0) triples, each a surface point.  ``bounded``
    records whether the linear map is elliptic, (N z0)^2 < 4, which traps
    the slice orbit on a bounded conic.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    x0, x1, z0, n = Fraction(x0), Fraction(x1), Fraction(z0), Fraction(n)
    j = n * x0 * x1 * z0 - x0 * x0 - x1 * x1 - z0 * z0
    params = SurfaceParams(n, j)
    steps = max(count - 1, 0)  # x_0 .. x_count gives count triples
    lin = make_builtin("linear", {"N": n, "z0": z0})
    xs = iterate(lin, [x0, x1], steps, domain=DOMAIN_RATIONAL).values
    prod = make_builtin("integ", {"z0": z0, "J": j})
    alt = iterate(prod, [x0, x1], steps, domain=DOMAIN_RATIONAL)
    for k in range(len(alt.values)):
        if xs[k] != alt.values[k]:
            raise FormMismatch(
                f"slice forms disagree at step {k}: linear {xs[k]} vs product {alt.values[k]}"
            )
    triples = [(xs[k], xs[k + 1], z0) for k in range(count)]
    bounded = (n * z0) ** 2 < 4
    return FixedZFamily(z0, params, triples, bounded)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def triples_csv_rows(run: TripleRun) -> list[list[str]]:
    rows = [["n", "x", "y", "z", "residual"]]
    for i, t in enumerate(run.triples):
        r = surface_residual(t, run.params)
        rows.append([str(i), str(t[0]), str(t[1]), str(t[2]), str(r)])
    return rows


def triples_to_json_dict(run: TripleRun) -> dict:
    return {
        "schema": 1,
        "kind": "triples",
        "params": {"N": str(run.params.n), "J": str(run.params.j)},
        "verdict": run.verdict,
        "period": run.period,
        "degenerate_index": run.degenerate_index,
        "triples": [[str(c) for c in t] for t in run.triples],
        "residuals": [str(surface_residual(t, run.params)) for t in run.triples],
    }
