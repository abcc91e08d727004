"""Exact arithmetic kernel.

Three value types, all exact (nothing here ever rounds through a float):

* ``LaurentPoly`` -- sparse multivariate Laurent polynomials.  Terms are a
  dict from exponent vectors (tuples of signed ints, one slot per variable)
  to nonzero integer or Fraction coefficients.  The zero polynomial is the
  empty dict.
* ``UniPoly`` -- dense univariate polynomials, coefficients ascending.
* ``EpsSeries`` -- truncated power series in a formal parameter ``e`` with
  Fraction coefficients and explicit bookkeeping of how far the expansion
  is known.

Multiplication and exact division of large Laurent polynomials pack
exponent vectors into single integers (fixed-width fields) so that
monomial products become integer additions; division runs lead-term
reduction against a max-heap of remainder monomials.
"""

from __future__ import annotations

import heapq
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Scalar = Union[int, Fraction]

__all__ = [
    "dec_str",
    "KernelError",
    "NotDivisible",
    "ZeroSubstitution",
    "DivisorZeroToOrder",
    "NonSquareLeadingCoefficient",
    "TruncationExhausted",
    "ParseError",
    "LaurentPoly",
    "LpStats",
    "lp_mul",
    "lp_exact_div",
    "lp_eval",
    "lp_apply",
    "lp_stats",
    "lp_numerator",
    "parse_laurent",
    "UniPoly",
    "MINUS_INFINITY",
    "up_eval",
    "up_degree",
    "up_is_monic",
    "parse_unipoly",
    "EpsSeries",
    "es_mul",
    "es_div",
    "es_sqrt",
    "es_eval",
    "parse_series",
    "rational_sqrt",
]


class KernelError(Exception):
    """Base class for exact-kernel failures."""


class NotDivisible(KernelError):
    """Exact division failed: the quotient does not exist in the ring."""


class ZeroSubstitution(KernelError):
    """Zero was substituted where a negative exponent occurs."""


class DivisorZeroToOrder(KernelError):
    """Series division by a series with no known nonzero coefficient."""


class NonSquareLeadingCoefficient(KernelError):
    """Series square root needs an even valuation and a square leading term."""


class TruncationExhausted(KernelError):
    """A series operation needs more terms than the stored truncation holds."""


class ParseError(KernelError):
    """Malformed polynomial or series text."""


def dec_str(n: int) -> str:
    """Decimal string of an integer of any size.

    Interpreters cap implicit int-to-decimal conversion; orbit values blow
    past that cap quickly, so the guard is raised as needed.
    """
    try:
        limit = sys.get_int_max_str_digits()
    except AttributeError:
        return str(n)
    if limit:
        need = int(n.bit_length() * 0.30103) + 16
        if need > limit:
            sys.set_int_max_str_digits(need)
    return str(n)


def _norm_scalar(c: Scalar) -> Scalar:
    if isinstance(c, Fraction) and c.denominator == 1:
        return int(c)
    return c


def rational_sqrt(x: Scalar) -> Fraction | None:
    """Exact square root of a rational, or None when it is not a square."""
    x = Fraction(x)
    if x < 0:
        return None
    rn = math.isqrt(x.numerator)
    rd = math.isqrt(x.denominator)
    if rn * rn != x.numerator or rd * rd != x.denominator:
        return None
    return Fraction(rn, rd)


# ---------------------------------------------------------------------------
# Laurent polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LpStats:
    term_count: int
    denominator: tuple[int, ...]  # exponent of each variable in the monomial denominator
    max_degree: tuple[int, ...]  # largest exponent per variable


class LaurentPoly:
    """Sparse Laurent polynomial over named variables.

    ``terms`` maps exponent tuples to nonzero coefficients.  Canonical form:
    no zero coefficients are stored and integer-valued Fractions are stored
    as ints.  Term order for display is graded lexicographic, largest first.
    """

    __slots__ = ("vars", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[tuple[int, ...], Scalar] | None = None):
        self.vars = tuple(variables)
        clean: dict[tuple[int, ...], Scalar] = {}
        if terms:
            nv = len(self.vars)
            for key, coeff in terms.items():
                key = tuple(key)
                if len(key) != nv:
                    raise ValueError(f"exponent vector {key!r} does not match variables {self.vars!r}")
                coeff = _norm_scalar(coeff)
                if coeff:
                    clean[key] = clean.get(key, 0) + coeff
                    if not clean[key]:
                        del clean[key]
        self.terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, variables: Sequence[str]) -> "LaurentPoly":
        return cls(variables, {})

    @classmethod
    def const(cls, variables: Sequence[str], c: Scalar) -> "LaurentPoly":
        v = tuple(variables)
        if not c:
            return cls(v, {})
        return cls(v, {(0,) * len(v): c})

    @classmethod
    def var(cls, variables: Sequence[str], name: str, power: int = 1) -> "LaurentPoly":
        v = tuple(variables)
        i = v.index(name)
        key = tuple(power if j == i else 0 for j in range(len(v)))
        return cls(v, {key: 1})

    @classmethod
    def generators(cls, variables: Sequence[str]) -> list["LaurentPoly"]:
        return [cls.var(variables, name) for name in variables]

    # -- structure ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def constant_value(self) -> Scalar | None:
        """The scalar value if this polynomial is constant, else None."""
        if not self.terms:
            return 0
        if len(self.terms) == 1:
            key, coeff = next(iter(self.terms.items()))
            if not any(key):
                return coeff
        return None

    def _require_same_ring(self, other: "LaurentPoly") -> None:
        if self.vars != other.vars:
            raise ValueError(f"mixed variable sets: {self.vars!r} vs {other.vars!r}")

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(self.vars, other)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        self._require_same_ring(other)
        terms = dict(self.terms)
        for key, coeff in other.terms.items():
            acc = terms.get(key, 0) + coeff
            if acc:
                terms[key] = _norm_scalar(acc)
            else:
                terms.pop(key, None)
        out = LaurentPoly.zero(self.vars)
        out.terms = terms
        return out

    __radd__ = __add__

    def __neg__(self):
        out = LaurentPoly.zero(self.vars)
        out.terms = {key: -coeff for key, coeff in self.terms.items()}
        return out

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = LaurentPoly.const(self.vars, other)
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = _norm_scalar(other)
            if not other:
                return LaurentPoly.zero(self.vars)
            out = LaurentPoly.zero(self.vars)
            out.terms = {key: _norm_scalar(coeff * other) for key, coeff in self.terms.items()}
            return out
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        self._require_same_ring(other)
        return _lp_mul_packed(self, other)

    __rmul__ = __mul__

    def __pow__(self, exp: int):
        if not isinstance(exp, int):
            return NotImplemented
        if exp == 1:
            return self
        if exp == 0:
            return LaurentPoly.const(self.vars, 1)
        if exp < 0:
            mono = self._as_monomial()
            if mono is None:
                raise NotDivisible("negative power of a non-monomial Laurent polynomial")
            key, coeff = mono
            if isinstance(coeff, int) and coeff * coeff != 1:
                raise NotDivisible(f"negative power of monomial with coefficient {coeff}")
            newkey = tuple(e * exp for e in key)
            newcoeff = Fraction(1) / Fraction(coeff) ** (-exp)
            out = LaurentPoly.zero(self.vars)
            out.terms = {newkey: _norm_scalar(newcoeff)}
            return out
        result = LaurentPoly.const(self.vars, 1)
        base = self
        while exp:
            if exp & 1:
                result = result * base
            exp >>= 1
            if exp:
                base = base * base
        return result

    def _as_monomial(self) -> tuple[tuple[int, ...], Scalar] | None:
        if len(self.terms) != 1:
            return None
        return next(iter(self.terms.items()))

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.constant_value() == other
        if not isinstance(other, LaurentPoly):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.vars, frozenset(self.terms.items())))

    # -- display ------------------------------------------------------------

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Scalar]]:
        """Terms in canonical order: graded lex, largest first."""
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]), reverse=True)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts: list[str] = []
        for key, coeff in self.sorted_terms():
            mono = "*".join(
                v if e == 1 else f"{v}^{e}" for v, e in zip(self.vars, key) if e
            )
            mag = abs(coeff) if isinstance(coeff, int) else abs(Fraction(coeff))
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{mag}*{mono}"
            else:
                body = str(mag)
            if not parts:
                parts.append(f"-{body}" if coeff < 0 else body)
            else:
                parts.append(f"{' - ' if coeff < 0 else ' + '}{body}")
        return "".join(parts)

    def __repr__(self) -> str:
        return f"LaurentPoly({self.vars!r}, {str(self)!r})"


def _shift_to_nonneg(terms: dict[tuple[int, ...], Scalar], nvars: int) -> tuple[tuple[int, ...], dict[tuple[int, ...], Scalar]]:
    """Factor out the per-variable minimum exponent; returned terms are >= 0."""
    if not terms:
        return (0,) * nvars, {}
    mins = [None] * nvars
    for key in terms:
        for i, e in enumerate(key):
            if mins[i] is None or e < mins[i]:
                mins[i] = e
    mins = tuple(m if m is not None else 0 for m in mins)
    if not any(mins):
        return mins, terms
    shifted = {tuple(e - m for e, m in zip(key, mins)): c for key, c in terms.items()}
    return mins, shifted


def _pack_width(*term_dicts: dict[tuple[int, ...], Scalar]) -> int:
    """Field width (bits) so products of packed keys cannot carry between fields."""
    top = 1
    for terms in term_dicts:
        for key in terms:
            for e in key:
                if e > top:
                    top = e
    # fields of a product are sums of two operand fields
    return (2 * top + 1).bit_length() + 1


def _pack(terms: dict[tuple[int, ...], Scalar], nvars: int, width: int) -> dict[int, Scalar]:
    packed: dict[int, Scalar] = {}
    for key, coeff in terms.items():
        k = 0
        for e in key:
            k = (k << width) | e
        packed[k] = coeff
    return packed


def _unpack_key(k: int, nvars: int, width: int) -> tuple[int, ...]:
    mask = (1 << width) - 1
    out = [0] * nvars
    for i in range(nvars - 1, -1, -1):
        out[i] = k & mask
        k >>= width
    return tuple(out)


def _lp_mul_packed(f: LaurentPoly, g: LaurentPoly) -> LaurentPoly:
    if not f.terms or not g.terms:
        return LaurentPoly.zero(f.vars)
    nv = len(f.vars)
    fmin, fterms = _shift_to_nonneg(f.terms, nv)
    if f.terms is g.terms or f == g:
        gmin, gterms = fmin, fterms
        square = True
    else:
        gmin, gterms = _shift_to_nonneg(g.terms, nv)
        square = False
    width = _pack_width(fterms, gterms)
    fp = _pack(fterms, nv, width)
    gp = fp if square else _pack(gterms, nv, width)
    acc: dict[int, Scalar] = {}
    get = acc.get
    if square:
        items = list(fp.items())
        n = len(items)
        for i in range(n):
            ki, ci = items[i]
            kk = ki + ki
            acc[kk] = get(kk, 0) + ci * ci
            twice = ci + ci
            for j in range(i + 1, n):
                kj, cj = items[j]
                kk = ki + kj
                acc[kk] = get(kk, 0) + twice * cj
    else:
        gitems = list(gp.items())
        for ki, ci in fp.items():
            for kj, cj in gitems:
                kk = ki + kj
                acc[kk] = get(kk, 0) + ci * cj
    offset = tuple(a + b for a, b in zip(fmin, gmin))
    terms: dict[tuple[int, ...], Scalar] = {}
    for k, coeff in acc.items():
        if coeff:
            key = _unpack_key(k, nv, width)
            terms[tuple(e + o for e, o in zip(key, offset))] = _norm_scalar(coeff)
    out = LaurentPoly.zero(f.vars)
    out.terms = terms
    return out


def lp_mul(f: LaurentPoly, g: LaurentPoly) -> LaurentPoly:
    return f * g


def lp_exact_div(f: LaurentPoly, g: LaurentPoly) -> LaurentPoly:
    """Quotient f/g when it exists in the Laurent ring, else NotDivisible.

    When both operands have integer coefficients the quotient must too
    (division is over Z, which is what a Laurent-property certificate
    needs); with any Fraction coefficient, division runs over Q.
    """
    f._require_same_ring(g)
    if g.is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    if f.is_zero():
        return LaurentPoly.zero(f.vars)
    nv = len(f.vars)
    fmin, fterms = _shift_to_nonneg(f.terms, nv)
    gmin, gterms = _shift_to_nonneg(g.terms, nv)
    over_z = all(isinstance(c, int) for c in f.terms.values()) and all(
        isinstance(c, int) for c in g.terms.values()
    )
    width = _pack_width(fterms, gterms)
    mask = (1 << width) - 1
    R = _pack(fterms, nv, width)
    G = _pack(gterms, nv, width)
    glead = max(G)
    glc = G[glead]
    gitems = list(G.items())
    glead_fields = _unpack_key(glead, nv, width)
    heap = [-k for k in R]
    heapq.heapify(heap)
    Q: dict[int, Scalar] = {}
    while True:
        lead = None
        while heap:
            cand = -heap[0]
            if cand in R:
                lead = cand
                break
            heapq.heappop(heap)
        if lead is None:
            break
        rc = R[lead]
        qk = lead - glead
        if qk < 0:
            raise NotDivisible("remainder lead term below divisor lead term")
        lead_fields = _unpack_key(lead, nv, width)
        if any(a < b for a, b in zip(lead_fields, glead_fields)):
            raise NotDivisible("divisor lead monomial does not divide remainder lead")
        if over_z:
            qc, rem = divmod(rc, glc)
            if rem:
                raise NotDivisible("coefficient not divisible over the integers")
        else:
            qc = Fraction(rc) / Fraction(glc)
        Q[qk] = qc
        for gk, gc in gitems:
            kk = qk + gk
            acc = R.get(kk, 0) - qc * gc
            if acc:
                if kk not in R:
                    heapq.heappush(heap, -kk)
                R[kk] = acc
            else:
                R.pop(kk, None)
    offset = tuple(a - b for a, b in zip(fmin, gmin))
    terms = {
        tuple(e + o for e, o in zip(_unpack_key(k, nv, width), offset)): _norm_scalar(c)
        for k, c in Q.items()
    }
    out = LaurentPoly.zero(f.vars)
    out.terms = terms
    return out


def lp_eval(f: LaurentPoly, point: Mapping[str, Scalar]) -> Fraction:
    """Evaluate at exact rational values for every variable."""
    vals = []
    for name in f.vars:
        if name not in point:
            raise KeyError(f"no value for variable {name!r}")
        vals.append(Fraction(point[name]))
    total = Fraction(0)
    for key, coeff in f.terms.items():
        acc = Fraction(coeff)
        for base, e in zip(vals, key):
            if e:
                if base == 0 and e < 0:
                    raise ZeroSubstitution(f"zero substituted at negative exponent {e}")
                acc *= base ** e
        total += acc
    return total


def lp_apply(f: LaurentPoly, env: Mapping[str, object]):
    """Evaluate with arbitrary ring values (ints, Fractions, polynomials,
    series) supporting +, * and ** for the exponents that occur."""
    total = None
    const: Scalar = 0
    for key, coeff in f.sorted_terms():
        if not any(key):
            const = const + coeff
            continue
        acc = None
        for name, e in zip(f.vars, key):
            if not e:
                continue
            factor = env[name] ** e
            acc = factor if acc is None else acc * factor
        term = acc * coeff if coeff != 1 else acc
        total = term if total is None else total + term
    if total is None:
        return const
    if const:
        total = total + const
    return total


def lp_stats(f: LaurentPoly) -> LpStats:
    nv = len(f.vars)
    if not f.terms:
        return LpStats(0, (0,) * nv, (0,) * nv)
    mins = [0] * nv
    maxs = [None] * nv
    for key in f.terms:
        for i, e in enumerate(key):
            if e < mins[i]:
                mins[i] = e
            if maxs[i] is None or e > maxs[i]:
                maxs[i] = e
    denom = tuple(-m if m < 0 else 0 for m in mins)
    return LpStats(len(f.terms), denom, tuple(maxs))


def lp_numerator(f: LaurentPoly) -> tuple[LaurentPoly, tuple[int, ...]]:
    """Split off the monomial denominator: f = numerator / prod(var^denom)."""
    stats = lp_stats(f)
    denom = stats.denominator
    if not any(denom):
        return f, denom
    shifted = {tuple(e + d for e, d in zip(key, denom)): c for key, c in f.terms.items()}
    out = LaurentPoly.zero(f.vars)
    out.terms = shifted
    return out, denom


# ---------------------------------------------------------------------------
# Text form (shared tokenizer for all three types)
# ---------------------------------------------------------------------------


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens: list[tuple[str, str]] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("int", text[i:j]))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j]))
            i = j
        elif ch in "+-*/^()":
            tokens.append((ch, ch))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r} at position {i}")
    return tokens


class _TermParser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def take(self, kind: str | None = None) -> tuple[str, str]:
        if self.pos >= len(self.tokens):
            raise ParseError("unexpected end of input")
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}")
        self.pos += 1
        return tok

    def signed_int(self) -> int:
        sign = 1
        while self.peek() in ("+", "-"):
            if self.take()[0] == "-":
                sign = -sign
        return sign * int(self.take("int")[1])

    def terms(self) -> Iterable[tuple[Fraction, list[tuple[str, int]]]]:
        """Yield (coefficient, [(name, exponent), ...]) per additive term."""
        first = True
        while self.pos < len(self.tokens):
            sign = 1
            saw_sign = False
            while self.peek() in ("+", "-"):
                saw_sign = True
                if self.take()[0] == "-":
                    sign = -sign
            if not first and not saw_sign:
                raise ParseError("terms must be joined by '+' or '-'")
            first = False
            coeff = Fraction(sign)
            factors: list[tuple[str, int]] = []
            saw_factor = False
            while True:
                kind = self.peek()
                if kind == "int":
                    num = int(self.take()[1])
                    if self.peek() == "/":
                        self.take()
                        den = int(self.take("int")[1])
                        if den == 0:
                            raise ParseError("zero denominator")
                        coeff *= Fraction(num, den)
                    else:
                        coeff *= num
                    saw_factor = True
                elif kind == "name":
                    name = self.take()[1]
                    exp = 1
                    if self.peek() == "^":
                        self.take()
                        exp = self.signed_int()
                    factors.append((name, exp))
                    saw_factor = True
                else:
                    raise ParseError(f"expected a coefficient or variable, found {self.tokens[self.pos][1]!r}"
                                     if self.pos < len(self.tokens) else "dangling sign")
                if self.peek() == "*":
                    self.take()
                    continue
                break
            if not saw_factor:
                raise ParseError("empty term")
            yield coeff, factors


def parse_laurent(text: str, variables: Sequence[str]) -> LaurentPoly:
    """Parse the canonical text form, e.g. ``-2*a^-1*b^3 + J``."""
    variables = tuple(variables)
    text = text.strip()
    if text == "0":
        return LaurentPoly.zero(variables)
    index = {name: i for i, name in enumerate(variables)}
    terms: dict[tuple[int, ...], Scalar] = {}
    for coeff, factors in _TermParser(text).terms():
        exps = [0] * len(variables)
        for name, e in factors:
            if name not in index:
                raise ParseError(f"unknown variable {name!r}")
            exps[index[name]] += e
        key = tuple(exps)
        acc = terms.get(key, 0) + coeff
        if acc:
            terms[key] = acc
        else:
            terms.pop(key, None)
    return LaurentPoly(variables, terms)


# ---------------------------------------------------------------------------
# Dense univariate polynomials
# ---------------------------------------------------------------------------

MINUS_INFINITY = float("-inf")

_KRONECKER_CUTOFF = 48


def _kron_mul(p: Sequence[int], q: Sequence[int]) -> list[int]:
    """Multiply integer coefficient lists via packed big-int multiplication."""
    maxp = max(abs(c) for c in p)
    maxq = max(abs(c) for c in q)
    bound = maxp * maxq * min(len(p), len(q))
    stride = ((bound.bit_length() + 3) + 7) // 8 * 8
    nb = stride // 8
    zero = bytes(nb)

    def pack(xs: Sequence[int], positive: bool) -> int:
        chunks = []
        for x in xs:
            if positive:
                chunks.append(x.to_bytes(nb, "little") if x > 0 else zero)
            else:
                chunks.append((-x).to_bytes(nb, "little") if x < 0 else zero)
        return int.from_bytes(b"".join(chunks), "little")

    pp, pn = pack(p, True), pack(p, False)
    qp, qn = pack(q, True), pack(q, False)
    same = pp * qp + pn * qn
    cross = pp * qn + pn * qp
    length = len(p) + len(q) - 1
    sb = same.to_bytes(length * nb + nb, "little")
    cb = cross.to_bytes(length * nb + nb, "little")
    out = []
    for i in range(length):
        lo = i * nb
        hi = lo + nb
        out.append(int.from_bytes(sb[lo:hi], "little") - int.from_bytes(cb[lo:hi], "little"))
    return out


class UniPoly:
    """Dense univariate polynomial; ``coeffs[i]`` is the coefficient of x^i."""

    __slots__ = ("var", "coeffs")

    def __init__(self, coeffs: Sequence[Scalar], var: str = "N"):
        cs = [_norm_scalar(c) for c in coeffs]
        while cs and not cs[-1]:
            cs.pop()
        self.coeffs = tuple(cs)
        self.var = var

    @classmethod
    def zero(cls, var: str = "N") -> "UniPoly":
        return cls((), var)

    @classmethod
    def const(cls, c: Scalar, var: str = "N") -> "UniPoly":
        return cls((c,), var)

    @classmethod
    def gen(cls, var: str = "N") -> "UniPoly":
        return cls((0, 1), var)

    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self):
        return len(self.coeffs) - 1 if self.coeffs else MINUS_INFINITY

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1

    def _require_same_var(self, other: "UniPoly") -> None:
        if self.var != other.var:
            raise ValueError(f"mixed variables {self.var!r} vs {other.var!r}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = UniPoly.const(other, self.var)
        if not isinstance(other, UniPoly):
            return NotImplemented
        self._require_same_var(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return UniPoly(out, self.var)

    __radd__ = __add__

    def __neg__(self):
        return UniPoly([-c for c in self.coeffs], self.var)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = UniPoly.const(other, self.var)
        if not isinstance(other, UniPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return UniPoly.zero(self.var)
            return UniPoly([c * other for c in self.coeffs], self.var)
        if not isinstance(other, UniPoly):
            return NotImplemented
        self._require_same_var(other)
        p, q = self.coeffs, other.coeffs
        if not p or not q:
            return UniPoly.zero(self.var)
        if (
            len(p) >= _KRONECKER_CUTOFF
            and len(q) >= _KRONECKER_CUTOFF
            and all(isinstance(c, int) for c in p)
            and all(isinstance(c, int) for c in q)
        ):
            return UniPoly(_kron_mul(p, q), self.var)
        out = [0] * (len(p) + len(q) - 1)
        for i, pi in enumerate(p):
            if pi:
                for j, qj in enumerate(q):
                    if qj:
                        out[i + j] += pi * qj
        return UniPoly(out, self.var)

    __rmul__ = __mul__

    def __pow__(self, exp: int):
        if not isinstance(exp, int) or exp < 0:
            return NotImplemented
        result = UniPoly.const(1, self.var)
        base = self
        while exp:
            if exp & 1:
                result = result * base
            exp >>= 1
            if exp:
                base = base * base
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.coeffs == () if not other else self.coeffs == (_norm_scalar(other),)
        if not isinstance(other, UniPoly):
            return NotImplemented
        return self.var == other.var and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.var, self.coeffs))

    def exact_div(self, other: "UniPoly") -> "UniPoly":
        """Exact quotient; NotDivisible when a remainder would be left."""
        self._require_same_var(other)
        if other.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        if self.is_zero():
            return UniPoly.zero(self.var)
        over_z = all(isinstance(c, int) for c in self.coeffs) and all(
            isinstance(c, int) for c in other.coeffs
        )
        rem = list(self.coeffs)
        div = other.coeffs
        dn = len(div)
        lead = div[-1]
        if len(rem) < dn:
            raise NotDivisible("degree of dividend below divisor")
        qlen = len(rem) - dn + 1
        quot: list[Scalar] = [0] * qlen
        for i in range(qlen - 1, -1, -1):
            top = rem[i + dn - 1]
            if not top:
                continue
            if over_z:
                qc, r = divmod(top, lead)
                if r:
                    raise NotDivisible("coefficient not divisible over the integers")
            else:
                qc = Fraction(top) / Fraction(lead)
            quot[i] = qc
            for j, dc in enumerate(div):
                rem[i + j] -= qc * dc
        if any(rem):
            raise NotDivisible("nonzero remainder")
        return UniPoly(quot, self.var)

    def eval(self, x: Scalar) -> Scalar:
        acc: Scalar = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return _norm_scalar(acc) if isinstance(acc, Fraction) else acc

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for e in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[e]
            if not c:
                continue
            if e == 0:
                body = str(abs(c))
            elif e == 1:
                body = self.var if abs(c) == 1 else f"{abs(c)}*{self.var}"
            else:
                body = f"{self.var}^{e}" if abs(c) == 1 else f"{abs(c)}*{self.var}^{e}"
            if not parts:
                parts.append(f"-{body}" if c < 0 else body)
            else:
                parts.append(f"{' - ' if c < 0 else ' + '}{body}")
        return "".join(parts)

    def __repr__(self) -> str:
        return f"UniPoly({str(self)!r})"


def up_eval(p: UniPoly, x: Scalar) -> Scalar:
    return p.eval(x)


def up_degree(p: UniPoly):
    return p.degree()


def up_is_monic(p: UniPoly) -> bool:
    return p.is_monic()


def parse_unipoly(text: str, var: str = "N") -> UniPoly:
    lp = parse_laurent(text, (var,))
    coeffs: list[Scalar] = []
    for (e,), c in lp.terms.items():
        if e < 0:
            raise ParseError("negative exponent in a univariate polynomial")
        while len(coeffs) <= e:
            coeffs.append(0)
        coeffs[e] = c
    return UniPoly(coeffs, var)


# ---------------------------------------------------------------------------
# Truncated series in a formal parameter
# ---------------------------------------------------------------------------


class EpsSeries:
    """Truncated series sum(coeffs[i] * e**(valuation+i)) + O(e**bound).

    ``bound`` (= valuation + len(coeffs)) is the first power whose
    coefficient is unknown.  Normal form keeps coeffs[0] nonzero, except a
    series that is zero to its stored order, kept as a single zero
    coefficient.  Operations propagate the bound honestly and never invent
    precision.
    """

    __slots__ = ("valuation", "coeffs")

    def __init__(self, valuation: int, coeffs: Sequence[Scalar]):
        cs = [Fraction(c) for c in coeffs]
        if not cs:
            raise ValueError("a series needs at least one stored coefficient")
        bound = valuation + len(cs)
        while cs and cs[0] == 0:
            cs.pop(0)
            valuation += 1
        if not cs:
            valuation = bound - 1
            cs = [Fraction(0)]
        self.valuation = valuation
        self.coeffs = tuple(cs)

    @classmethod
    def from_scalar(cls, c: Scalar, order: int) -> "EpsSeries":
        """Embed an exact rational, known through e**(order-1)."""
        if order < 1:
            raise ValueError("order must be at least 1")
        return cls(0, [Fraction(c)] + [Fraction(0)] * (order - 1))

    @classmethod
    def epsilon(cls, order: int) -> "EpsSeries":
        if order < 1:
            raise ValueError("order must be at least 1")
        return cls(1, [Fraction(1)] + [Fraction(0)] * (order - 1))

    @property
    def bound(self) -> int:
        return self.valuation + len(self.coeffs)

    @property
    def truncation_order(self) -> int:
        return len(self.coeffs)

    def is_zero_to_order(self) -> bool:
        return self.coeffs[0] == 0

    def leading(self) -> Fraction:
        if self.is_zero_to_order():
            raise TruncationExhausted("no nonzero coefficient within the stored order")
        return self.coeffs[0]

    def coeff(self, power: int) -> Fraction:
        """Coefficient of e**power; TruncationExhausted past the bound."""
        if power >= self.bound:
            raise TruncationExhausted(f"coefficient of e^{power} is beyond the stored bound e^{self.bound}")
        if power < self.valuation:
            return Fraction(0)
        return self.coeffs[power - self.valuation]

    def _coeff_in_range(self, power: int) -> Fraction:
        if self.is_zero_to_order() or power < self.valuation:
            return Fraction(0)
        i = power - self.valuation
        return self.coeffs[i] if i < len(self.coeffs) else Fraction(0)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return self
            bound = self.bound
            if bound <= 0:
                # the constant sits at e^0, beyond everything stored here
                return self
            v = min(0, self.valuation)
            coeffs = [self._coeff_in_range(p) for p in range(v, bound)]
            coeffs[0 - v] += Fraction(other)
            return EpsSeries(v, coeffs)
        if not isinstance(other, EpsSeries):
            return NotImplemented
        bound = min(self.bound, other.bound)
        v = min(self.valuation, other.valuation)
        if bound <= v:
            v = bound - 1
        coeffs = [self._coeff_in_range(p) + other._coeff_in_range(p) for p in range(v, bound)]
        return EpsSeries(v, coeffs)

    __radd__ = __add__

    def __neg__(self):
        out = EpsSeries.__new__(EpsSeries)
        out.valuation = self.valuation
        out.coeffs = tuple(-c for c in self.coeffs)
        return out

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            return self + (-other)
        if not isinstance(other, EpsSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return EpsSeries(self.bound - 1, [0])
            out = EpsSeries.__new__(EpsSeries)
            out.valuation = self.valuation
            out.coeffs = tuple(c * other for c in self.coeffs)
            return out
        if not isinstance(other, EpsSeries):
            return NotImplemented
        bound = min(self.bound + other.valuation, other.bound + self.valuation)
        v = self.valuation + other.valuation
        k = bound - v
        a, b = self.coeffs, other.coeffs
        coeffs = [Fraction(0)] * k
        for i, ai in enumerate(a):
            if not ai or i >= k:
                continue
            top = min(len(b), k - i)
            for j in range(top):
                if b[j]:
                    coeffs[i + j] += ai * b[j]
        return EpsSeries(v, coeffs)

    __rmul__ = __mul__

    def inverse(self) -> "EpsSeries":
        if self.is_zero_to_order():
            raise DivisorZeroToOrder("inverting a series with no known nonzero coefficient")
        k = len(self.coeffs)
        a = self.coeffs
        inv = [Fraction(0)] * k
        inv[0] = 1 / a[0]
        for i in range(1, k):
            s = Fraction(0)
            for j in range(1, i + 1):
                if a[j]:
                    s += a[j] * inv[i - j]
            inv[i] = -s / a[0]
        return EpsSeries(-self.valuation, inv)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division of a series by zero")
            return self * (Fraction(1) / Fraction(other))
        if not isinstance(other, EpsSeries):
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.inverse() * other
        return NotImplemented

    def __pow__(self, exp: int):
        if not isinstance(exp, int):
            return NotImplemented
        if exp < 0:
            return self.inverse() ** (-exp)
        if exp == 0:
            return EpsSeries.from_scalar(1, len(self.coeffs))
        result = self
        for _ in range(exp - 1):
            result = result * self
        return result

    def sqrt(self) -> "EpsSeries":
        """Square root when the valuation is even and the leading
        coefficient is the square of a rational."""
        if self.is_zero_to_order():
            raise TruncationExhausted("square root of a series with no known leading term")
        if self.valuation % 2:
            raise NonSquareLeadingCoefficient(f"odd valuation {self.valuation}")
        r0 = rational_sqrt(self.coeffs[0])
        if r0 is None:
            raise NonSquareLeadingCoefficient(f"leading coefficient {self.coeffs[0]} is not a rational square")
        k = len(self.coeffs)
        a = self.coeffs
        r = [Fraction(0)] * k
        r[0] = r0
        for i in range(1, k):
            s = Fraction(0)
            for j in range(1, i):
                s += r[j] * r[i - j]
            r[i] = (a[i] - s) / (2 * r0)
        return EpsSeries(self.valuation // 2, r)

    def __eq__(self, other):
        if not isinstance(other, EpsSeries):
            return NotImplemented
        return (
            self.valuation == other.valuation
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.valuation, self.coeffs))

    def eval_at(self, eps: Scalar) -> Fraction:
        eps = Fraction(eps)
        if eps == 0 and self.valuation < 0:
            raise ZeroSubstitution("evaluating a pole at zero")
        return sum((c * eps ** (self.valuation + i) for i, c in enumerate(self.coeffs)), Fraction(0))

    def __str__(self) -> str:
        parts: list[str] = []
        for i, c in enumerate(self.coeffs):
            if not c:
                continue
            p = self.valuation + i
            if p == 0:
                body = str(abs(c))
            elif p == 1:
                body = "e" if abs(c) == 1 else f"{abs(c)}*e"
            else:
                body = f"e^{p}" if abs(c) == 1 else f"{abs(c)}*e^{p}"
            if not parts:
                parts.append(f"-{body}" if c < 0 else body)
            else:
                parts.append(f"{' - ' if c < 0 else ' + '}{body}")
        tail = f"O(e^{self.bound})"
        if not parts:
            return tail
        return "".join(parts) + " + " + tail

    def __repr__(self) -> str:
        return f"EpsSeries({str(self)!r})"


def es_mul(s: EpsSeries, t: EpsSeries) -> EpsSeries:
    return s * t


def es_div(s: EpsSeries, t: EpsSeries) -> EpsSeries:
    return s / t


def es_sqrt(s: EpsSeries) -> EpsSeries:
    return s.sqrt()


def es_eval(s: EpsSeries, eps: Scalar) -> Fraction:
    return s.eval_at(eps)


def parse_series(text: str) -> EpsSeries:
    """Parse the series text form, e.g. ``4 + 1/8*e - 1/512*e^2 + O(e^3)``."""
    text = text.strip()
    bound = None
    at = text.rfind("O(")
    if at >= 0:
        inner = text[at:]
        if not inner.endswith(")"):
            raise ParseError("unterminated O(...)")
        spec = inner[2:-1].strip()
        if spec == "e":
            bound = 1
        else:
            if not spec.startswith("e^"):
                raise ParseError(f"malformed order term {inner!r}")
            bound = int(spec[2:])
        text = text[:at].rstrip()
        if text.endswith("+"):
            text = text[:-1].rstrip()
        elif text.endswith("-"):
            raise ParseError("O(...) cannot be subtracted")
    if bound is None:
        raise ParseError("series text needs a trailing O(e^k) order term")
    if not text:
        return EpsSeries(bound - 1, [0])
    lp = parse_laurent(text, ("e",))
    if not lp.terms:
        return EpsSeries(bound - 1, [0])
    powers = sorted(e for (e,) in lp.terms)
    v = powers[0]
    if powers[-1] >= bound:
        raise ParseError("coefficient at or beyond the stated order")
    coeffs = [Fraction(0)] * (bound - v)
    for (e,), c in lp.terms.items():
        coeffs[e - v] = Fraction(c)
    return EpsSeries(v, coeffs)
