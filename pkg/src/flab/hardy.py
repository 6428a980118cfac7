"""Symbolic Hardy-field expressions ``sum c * t**a * (log t)**b``.

Coefficients are exact: a rational times at most one constant from a fixed
set, so irrationality is decided syntactically.  Exponents are exact
rationals.  The module provides canonical forms, exact differentiation,
growth comparison by leading terms, the five-way classification of the
sequence ``a(n) mod 1``, and evaluation of ``{a(n)}`` in extended precision
(mpmath for single points, double-double kernels for whole ranges).
"""

from __future__ import annotations

import math
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from typing import Iterable, Optional

import mpmath
import numpy as np

from . import kernels
from .errors import GrowthTooLarge, ParseError, PrecisionInsufficient, Undecidable

D_MAX = 8
T0 = 2.0
DEFAULT_PRECISION = 128
FRAC_TOLERANCE = 1e-10
# relative error of one double-double kernel evaluation, with margin
DD_REL_ERR = 2.0**-96

KAPPAS = ("sqrt2", "sqrt3", "sqrt5", "phi", "pi", "euler_e")
_SQUARE_OF = {"sqrt2": 2, "sqrt3": 3, "sqrt5": 5}
_PARSE_CONSTS = {"sqrt2": "sqrt2", "sqrt3": "sqrt3", "sqrt5": "sqrt5", "phi": "phi", "pi": "pi", "e": "euler_e"}
_PRINT_CONSTS = {v: k for k, v in _PARSE_CONSTS.items()}

_local = threading.local()


def mp_context(prec: int) -> mpmath.ctx_mp.MPContext:
    """A thread-private mpmath context at ``prec`` bits."""
    ctxs = getattr(_local, "ctxs", None)
    if ctxs is None:
        ctxs = _local.ctxs = {}
    ctx = ctxs.get(prec)
    if ctx is None:
        ctx = ctxs[prec] = mpmath.MPContext()
        ctx.prec = prec
    return ctx


def _kappa_mp(ctx, kappa):
    if kappa == "sqrt2":
        return ctx.sqrt(2)
    if kappa == "sqrt3":
        return ctx.sqrt(3)
    if kappa == "sqrt5":
        return ctx.sqrt(5)
    if kappa == "phi":
        return (1 + ctx.sqrt(5)) / 2
    if kappa == "pi":
        return +ctx.pi
    if kappa == "euler_e":
        return ctx.e ** 1
    raise ValueError(f"unknown constant {kappa!r}")


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not x.is_integer():
            raise Undecidable(f"float {x!r} is not an exact rational; pass a Fraction or string")
        return Fraction(int(x))
    raise TypeError(f"cannot read {x!r} as an exact rational")


def _frac_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# coefficients and terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExactCoefficient:
    """``q`` or ``q * kappa`` for a named irrational constant ``kappa``."""

    q: Fraction
    kappa: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "q", _as_fraction(self.q))
        if self.kappa is not None and self.kappa not in KAPPAS:
            raise ValueError(f"unknown constant {self.kappa!r}; expected one of {KAPPAS}")

    @classmethod
    def of(cls, x) -> "ExactCoefficient":
        """Coerce ints, Fractions, and strings such as ``"3/2*sqrt2"``."""
        if isinstance(x, ExactCoefficient):
            return x
        if isinstance(x, str):
            return parse_coefficient(x)
        return cls(_as_fraction(x))

    @property
    def is_rational(self) -> bool:
        return self.kappa is None or self.q == 0

    @property
    def sign(self) -> int:
        return (self.q > 0) - (self.q < 0)

    def mp(self, ctx):
        if self.kappa is None:
            return ctx.mpf(self.q.numerator) / self.q.denominator
        return ctx.mpf(self.q.numerator) / self.q.denominator * _kappa_mp(ctx, self.kappa)

    @cached_property
    def dd(self) -> tuple:
        ctx = mp_context(240)
        v = self.mp(ctx)
        hi = float(v)
        return hi, float(v - hi)

    def __float__(self):
        return float(self.mp(mp_context(80)))

    def __neg__(self):
        return ExactCoefficient(-self.q, self.kappa)

    def __mul__(self, other):
        if not isinstance(other, ExactCoefficient):
            return ExactCoefficient(self.q * _as_fraction(other), self.kappa)
        if other.kappa is None:
            return ExactCoefficient(self.q * other.q, self.kappa)
        if self.kappa is None:
            return ExactCoefficient(self.q * other.q, other.kappa)
        if self.kappa == other.kappa and self.kappa in _SQUARE_OF:
            return ExactCoefficient(self.q * other.q * _SQUARE_OF[self.kappa])
        raise Undecidable(f"product {self} * {other} is outside the coefficient forms")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = ExactCoefficient.of(other)
        if other.q == 0:
            raise ZeroDivisionError("division by zero coefficient")
        if other.kappa is None:
            return ExactCoefficient(self.q / other.q, self.kappa)
        if self.kappa == other.kappa:
            return ExactCoefficient(self.q / other.q)
        if self.kappa is None and other.kappa in _SQUARE_OF:
            # q / (p sqrt m) = q sqrt m / (p m)
            return ExactCoefficient(self.q / (other.q * _SQUARE_OF[other.kappa]), other.kappa)
        raise Undecidable(f"ratio {self} / {other} is outside the coefficient forms")

    def __str__(self):
        if self.kappa is None:
            return _frac_text(self.q)
        name = _PRINT_CONSTS[self.kappa]
        if self.q == 1:
            return name
        if self.q == -1:
            return f"-{name}"
        return f"{_frac_text(self.q)}*{name}"


@dataclass(frozen=True)
class Term:
    coef: ExactCoefficient
    a: Fraction
    b: Fraction

    def __str__(self):
        parts = []
        if self.a != 0:
            parts.append("t" if self.a == 1 else f"t^{_exp_text(self.a)}")
        if self.b != 0:
            parts.append("log(t)" if self.b == 1 else f"log(t)^{_exp_text(self.b)}")
        c = str(self.coef)
        if not parts:
            return c
        if self.coef.q == 1 and self.coef.kappa is None:
            return "*".join(parts)
        if self.coef.q == -1 and self.coef.kappa is None:
            return "-" + "*".join(parts)
        return "*".join([c] + parts)


def _exp_text(q: Fraction) -> str:
    if q.denominator == 1 and q >= 0:
        return str(q.numerator)
    return f"({_frac_text(q)})"


# ---------------------------------------------------------------------------
# expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HardyExpr:
    """Canonical sum of terms, strictly decreasing in ``(a, b)``.

    Build instances with :func:`canonicalize` or :func:`parse`; the
    constructor does not re-validate.
    """

    terms: tuple = ()
    t0: float = T0
    d_max: int = D_MAX

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def lead(self) -> Term:
        if not self.terms:
            raise ValueError("zero expression has no leading term")
        return self.terms[0]

    @property
    def n_start(self) -> int:
        return max(2, math.ceil(self.t0))

    def _rebuild(self, raw) -> "HardyExpr":
        return canonicalize(raw, t0=self.t0, d_max=self.d_max)

    def _raw(self):
        return [(t.coef, t.a, t.b) for t in self.terms]

    def __add__(self, other: "HardyExpr") -> "HardyExpr":
        return self._rebuild(self._raw() + other._raw())

    def __neg__(self) -> "HardyExpr":
        return HardyExpr(tuple(Term(-t.coef, t.a, t.b) for t in self.terms), self.t0, self.d_max)

    def __sub__(self, other: "HardyExpr") -> "HardyExpr":
        return self + (-other)

    def scale(self, c) -> "HardyExpr":
        """Multiply every coefficient by ``c`` (rational or ExactCoefficient)."""
        c = ExactCoefficient.of(c)
        return self._rebuild([(t.coef * c, t.a, t.b) for t in self.terms])

    def times_power(self, k) -> "HardyExpr":
        """Multiply by ``t**k``."""
        k = _as_fraction(k)
        return self._rebuild([(t.coef, t.a + k, t.b) for t in self.terms])

    def derivative(self, order: int = 1) -> "HardyExpr":
        return derivative(self, order)

    def __str__(self):
        if not self.terms:
            return "0"
        out = str(self.terms[0])
        for t in self.terms[1:]:
            s = str(t)
            out += f" - {s[1:]}" if s.startswith("-") else f" + {s}"
        return out

    # -- numerics -----------------------------------------------------------

    @cached_property
    def packed(self) -> tuple:
        """Term data laid out for :func:`flab.kernels.hardy_dd`."""
        n = len(self.terms)
        ch, cl = np.zeros(n), np.zeros(n)
        ah, al, bh, bl = np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n)
        tk, tp, lk, lb = (np.zeros(n, dtype=np.int64) for _ in range(4))
        ctx = mp_context(240)
        need_log = False
        for i, t in enumerate(self.terms):
            ch[i], cl[i] = t.coef.dd
            if t.a == 0:
                tk[i] = kernels.T_NONE
            elif t.a.denominator == 1 and abs(t.a) <= 16:
                tk[i], tp[i] = kernels.T_INT, t.a.numerator
            elif t.a.denominator == 2 and abs(t.a) <= 16:
                tk[i], tp[i] = kernels.T_HALF, t.a.numerator
            else:
                tk[i] = kernels.T_GEN
                v = ctx.mpf(t.a.numerator) / t.a.denominator
                ah[i] = float(v)
                al[i] = float(v - ah[i])
                need_log = True
            if t.b == 0:
                lk[i] = kernels.L_NONE
            elif t.b.denominator == 1 and abs(t.b) <= 16:
                lk[i], lb[i] = kernels.L_INT, t.b.numerator
                need_log = True
            else:
                lk[i] = kernels.L_GEN
                v = ctx.mpf(t.b.numerator) / t.b.denominator
                bh[i] = float(v)
                bl[i] = float(v - bh[i])
                need_log = True
        return ch, cl, tk, tp, ah, al, lk, lb, bh, bl, need_log

    def value_dd(self, n) -> tuple:
        """Double-double values ``a(n)`` for an integer array ``n``.

        Raises PrecisionInsufficient when the magnitude leaves no room for
        ``1e-10`` absolute accuracy of the fractional part.
        """
        n = np.asarray(n)
        xs = n.astype(np.float64)
        if xs.size and (xs.min() < self.t0 or xs.max() >= 2.0**53):
            raise ValueError("vectorized evaluation needs t0 <= n < 2**53")
        h, lo = kernels.hardy_dd(xs, self.packed)
        if h.size:
            scale = float(np.max(np.abs(h)))
            if not np.isfinite(scale) or scale * DD_REL_ERR * max(len(self.terms), 1) * 8 > FRAC_TOLERANCE:
                raise PrecisionInsufficient(
                    f"|a(n)| up to {scale:.3g} exceeds double-double range for {self}")
        return h, lo

    def frac_array(self, n, scale: Optional[ExactCoefficient] = None) -> np.ndarray:
        """``{a(n) * scale}`` as float64 for an integer array ``n``."""
        h, lo = self.value_dd(n)
        if scale is None:
            return kernels.frac_scaled(h, lo)
        sh, sl = ExactCoefficient.of(scale).dd
        if abs(sh) * float(np.max(np.abs(h), initial=0.0)) * DD_REL_ERR * 8 > FRAC_TOLERANCE:
            raise PrecisionInsufficient("scaled values exceed double-double range")
        return kernels.frac_scaled(h, lo, sh, sl)

    def float_values(self, n) -> np.ndarray:
        """``a(n)`` rounded to float64 (no mod-1 reduction)."""
        h, lo = kernels.hardy_dd(np.asarray(n, dtype=np.float64), self.packed)
        return h + lo


# ---------------------------------------------------------------------------
# canonical form and calculus
# ---------------------------------------------------------------------------


def canonicalize(raw_terms: Iterable, t0: float = T0, d_max: int = D_MAX) -> HardyExpr:
    """Build a canonical :class:`HardyExpr` from ``(coef, a, b)`` triples.

    Like terms are merged, zero terms dropped, and the rest sorted by
    decreasing ``(a, b)``.  Merging coefficients with different constants is
    refused (Undecidable) since the sum has no exact representation here.
    """
    if t0 < 2:
        raise ValueError("t0 must be >= 2")
    acc: dict = {}
    for item in raw_terms:
        if isinstance(item, Term):
            coef, a, b = item.coef, item.a, item.b
        else:
            coef, a, b = item
        coef = ExactCoefficient.of(coef)
        a, b = _as_fraction(a), _as_fraction(b)
        if coef.q == 0:
            continue
        prev = acc.get((a, b))
        if prev is None:
            acc[(a, b)] = coef
        elif prev.kappa == coef.kappa:
            acc[(a, b)] = ExactCoefficient(prev.q + coef.q, prev.kappa)
        else:
            raise Undecidable(f"cannot merge {prev} and {coef} into one exact coefficient")
    terms = tuple(Term(c, a, b) for (a, b), c in sorted(acc.items(), key=lambda kv: kv[0], reverse=True)
                  if c.q != 0)
    if terms and terms[0].a >= d_max:
        raise GrowthTooLarge(f"leading exponent {terms[0].a} >= D_max={d_max}")
    return HardyExpr(terms, float(t0), d_max)


def derivative(e: HardyExpr, order: int = 1) -> HardyExpr:
    """Exact ``order``-th derivative, term by term."""
    if order < 0 or order > e.d_max + 2:
        raise ValueError(f"order must be in [0, {e.d_max + 2}]")
    for _ in range(order):
        raw = []
        for t in e.terms:
            if t.a != 0:
                raw.append((t.coef * t.a, t.a - 1, t.b))
            if t.b != 0:
                raw.append((t.coef * t.b, t.a - 1, t.b - 1))
        e = canonicalize(raw, t0=e.t0, d_max=e.d_max)
    return e


@dataclass(frozen=True)
class GrowthRelation:
    """Outcome of :func:`growth_compare`.

    ``relation`` is ``"precedes"``, ``"similar"`` or ``"dominates"``.  For
    ``similar``, ``limit`` is the exact ratio of leading coefficients when it
    has an exact form, and ``limit_value`` is always its float value.
    """

    relation: str
    limit: Optional[ExactCoefficient] = None
    limit_value: Optional[float] = None


def growth_compare(e1: HardyExpr, e2: HardyExpr) -> GrowthRelation:
    if e1.is_zero or e2.is_zero:
        raise ValueError("growth comparison needs nonzero expressions")
    l1, l2 = e1.lead, e2.lead
    if (l1.a, l1.b) < (l2.a, l2.b):
        return GrowthRelation("precedes")
    if (l1.a, l1.b) > (l2.a, l2.b):
        return GrowthRelation("dominates")
    value = float(l1.coef.mp(mp_context(80)) / l2.coef.mp(mp_context(80)))
    try:
        limit = l1.coef / l2.coef
    except Undecidable:
        limit = None
    return GrowthRelation("similar", limit, value)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Case I-V of the statistical behaviour of ``a(n) mod 1``.

    For case V, ``poly_part`` holds the stripped rational polynomial,
    ``modulus`` the lcm of its denominators, ``d`` its degree, and ``inner``
    the classification of what remains (None when only a decaying tail is
    left).
    """

    case_id: str
    d: int
    alpha: Optional[ExactCoefficient] = None
    poly_part: Optional[HardyExpr] = None
    modulus: Optional[int] = None
    inner: Optional["Classification"] = None
    remainder: Optional[HardyExpr] = field(default=None, compare=False)

    def as_dict(self) -> dict:
        out = {"case": self.case_id, "d": self.d}
        if self.alpha is not None:
            out["alpha"] = str(self.alpha)
        if self.poly_part is not None:
            out["poly_part"] = str(self.poly_part)
            out["modulus"] = self.modulus
            out["inner"] = self.inner.as_dict() if self.inner is not None else None
        return out


def _is_tail(t: Term) -> bool:
    return t.a < 0 or (t.a == 0 and t.b < 0)


def classify(e: HardyExpr) -> Classification:
    if e.is_zero or _is_tail(e.lead):
        raise ValueError("classification needs a non-decaying leading term")
    poly = []
    base = None
    rest = list(e.terms)
    while rest:
        t = rest[0]
        a, b = t.a, t.b
        if _is_tail(t):
            break
        remainder = HardyExpr(tuple(rest), e.t0, e.d_max)
        if a.denominator != 1:
            base = Classification("I", math.floor(a), remainder=remainder)
        elif b > 1:
            base = Classification("I", int(a), remainder=remainder)
        elif b == 1:
            base = Classification("II", int(a), remainder=remainder)
        elif 0 < b < 1:
            base = Classification("III", int(a), remainder=remainder)
        elif b < 0:
            base = Classification("I", int(a) - 1, remainder=remainder)
        elif not t.coef.is_rational:
            base = Classification("IV", int(a), alpha=t.coef, remainder=remainder)
        else:
            poly.append(t)
            rest.pop(0)
            continue
        break
    if not poly:
        return base
    poly_expr = HardyExpr(tuple(poly), e.t0, e.d_max)
    modulus = reduce(math.lcm, (t.coef.q.denominator for t in poly), 1)
    return Classification("V", int(poly[0].a), poly_part=poly_expr, modulus=modulus, inner=base,
                          remainder=HardyExpr(tuple(rest), e.t0, e.d_max))


# ---------------------------------------------------------------------------
# extended-precision evaluation
# ---------------------------------------------------------------------------

_OPS_PER_TERM = 10


def _iroot(x: int, k: int) -> int:
    """Floor of the k-th root of a non-negative integer."""
    if x < 2:
        return x
    r = int(round(math.exp(math.log(x) / k))) if x.bit_length() < 1000 else 1 << (x.bit_length() // k + 1)
    while True:
        nr = ((k - 1) * r + x // r ** (k - 1)) // k
        if nr >= r:
            break
        r = nr
    while r**k > x:
        r -= 1
    while (r + 1) ** k <= x:
        r += 1
    return r


def _exact_term(t: Term, n: int) -> Optional[Fraction]:
    """Exact value of a term at integer ``n`` if it is rational, else None."""
    if t.b != 0 or not t.coef.is_rational:
        return None
    if t.a == 0:
        return t.coef.q
    p, q = t.a.numerator, t.a.denominator
    if q > 1 and n.bit_length() * abs(p) > 20000:
        return None
    base = n ** abs(p)
    if q > 1:
        r = _iroot(base, q)
        if r**q != base:
            return None
        base = r
    return t.coef.q * (Fraction(base) if p > 0 else Fraction(1, base))


def _eval_parts(e: HardyExpr, n: int, prec: int):
    """Split ``a(n)`` into an exact rational part and an mpf part with error."""
    ctx = mp_context(prec)
    exact = Fraction(0)
    approx = ctx.mpf(0)
    mag = ctx.mpf(0)
    n_inexact = 0
    nn = ctx.mpf(n)
    logn = None
    for t in e.terms:
        v = _exact_term(t, n)
        if v is not None:
            exact += v
            continue
        n_inexact += 1
        val = t.coef.mp(ctx)
        if t.a != 0:
            p, q = t.a.numerator, t.a.denominator
            val *= ctx.root(nn ** p, q) if q > 1 else nn ** p
        if t.b != 0:
            if logn is None:
                logn = ctx.log(nn)
            bp, bq = t.b.numerator, t.b.denominator
            val *= ctx.root(logn ** bp, bq) if bq > 1 else logn ** bp
        approx += val
        mag += abs(val)
    err = 0.0
    if n_inexact:
        err = float(mag) * 2.0 ** (1 - prec) * n_inexact * _OPS_PER_TERM
    return exact, approx, err, ctx


def eval_mp(e: HardyExpr, n: int, precision_bits: int = DEFAULT_PRECISION):
    """``(value, err_bound)`` of ``a(n)`` as an mpf at ``precision_bits``."""
    exact, approx, err, ctx = _eval_parts(e, n, precision_bits)
    return approx + ctx.mpf(exact.numerator) / exact.denominator, err


def eval_frac(e: HardyExpr, n: int, precision_bits: int = DEFAULT_PRECISION):
    """``({a(n)}, err_bound)`` computed at ``precision_bits`` of working precision.

    Terms with a rational value at ``n`` (e.g. ``t**(3/2)`` at a perfect
    square) are summed exactly and contribute no error.
    """
    n = int(n)
    if n < e.n_start:
        raise ValueError(f"n={n} is below the domain start {e.n_start}")
    if precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")
    exact, approx, err, ctx = _eval_parts(e, n, precision_bits)
    if err > FRAC_TOLERANCE:
        raise PrecisionInsufficient(
            f"error bound {err:.3g} at {precision_bits} bits; raise precision_bits")
    ex_frac = exact - math.floor(exact)
    if err == 0:
        return float(ex_frac), 0.0
    v = approx + ctx.mpf(ex_frac.numerator) / ex_frac.denominator
    f = v - ctx.floor(v)
    return float(f) % 1.0, err


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str):
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, name, sym = m.groups()
        if num is not None:
            out.append(("num", num, m.start(1)))
        elif name is not None:
            out.append(("name", name, m.start(2)))
        else:
            out.append(("sym", sym, m.start(3)))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, kind=None, value=None):
        if self.i >= len(self.toks):
            return None
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            return None
        if value is not None and tok[1] != value:
            return None
        return tok

    def take(self, kind=None, value=None):
        tok = self.peek(kind, value)
        if tok is None:
            where = self.toks[self.i][2] if self.i < len(self.toks) else len(self.text)
            want = value or kind or "token"
            raise ParseError(f"expected {want!r} at column {where + 1} in {self.text!r}")
        self.i += 1
        return tok

    def signed_int(self):
        neg = self.peek("sym", "-") is not None
        if neg:
            self.take()
        v = int(self.take("num")[1])
        return -v if neg else v

    def rat(self):
        num = self.signed_int()
        if self.peek("sym", "/"):
            self.take()
            den = int(self.take("num")[1])
            if den == 0:
                raise ParseError(f"zero denominator in {self.text!r}")
            return Fraction(num, den)
        return Fraction(num)

    def exponent(self):
        if self.peek("sym", "("):
            self.take()
            v = self.rat()
            self.take("sym", ")")
            return v
        return Fraction(int(self.take("num")[1]))

    def term(self, sign):
        q = Fraction(sign)
        kappa = None
        a = Fraction(0)
        b = Fraction(0)
        seen_coef = seen_const = seen_factor = False
        while True:
            tok = self.peek()
            if tok is None:
                raise ParseError(f"unexpected end of {self.text!r}")
            kind, val, _ = tok
            if kind == "num" or (kind == "sym" and val == "(" and not seen_factor):
                if seen_coef or seen_const or seen_factor:
                    raise ParseError(f"rational coefficient must come first in {self.text!r}")
                if kind == "sym":
                    self.take()
                    q *= self.rat()
                    self.take("sym", ")")
                else:
                    q *= self.rat()
                seen_coef = True
            elif kind == "name" and val in _PARSE_CONSTS:
                if seen_const or seen_factor:
                    raise ParseError(f"misplaced constant {val!r} in {self.text!r}")
                kappa = _PARSE_CONSTS[val]
                self.take()
                seen_const = True
            elif kind == "name" and val == "t":
                self.take()
                a += self.exponent() if self.peek("sym", "^") and self.take() else 1
                seen_factor = True
            elif kind == "name" and val == "log":
                self.take()
                self.take("sym", "(")
                self.take("name", "t")
                self.take("sym", ")")
                b += self.exponent() if self.peek("sym", "^") and self.take() else 1
                seen_factor = True
            else:
                raise ParseError(f"unexpected {val!r} at column {tok[2] + 1} in {self.text!r}")
            if self.peek("sym", "*"):
                self.take()
                continue
            return (ExactCoefficient(q, kappa), a, b)

    def expr(self):
        terms = []
        sign = 1
        if self.peek("sym", "-"):
            self.take()
            sign = -1
        terms.append(self.term(sign))
        while self.i < len(self.toks):
            tok = self.take("sym")
            if tok[1] not in "+-":
                raise ParseError(f"unexpected {tok[1]!r} at column {tok[2] + 1} in {self.text!r}")
            terms.append(self.term(1 if tok[1] == "+" else -1))
        return terms


def parse(text: str, t0: float = T0, d_max: int = D_MAX) -> HardyExpr:
    """Parse the expression mini-language, e.g. ``"sqrt2*t^2 + t^(3/2)"``.

    Fractional exponents must be parenthesized; ``t^3/2`` is rejected.
    """
    if not text or not text.strip():
        raise ParseError("empty expression")
    return canonicalize(_Parser(text).expr(), t0=t0, d_max=d_max)


def parse_coefficient(text: str) -> ExactCoefficient:
    """Parse ``rat``, ``const`` or ``rat*const`` (e.g. ``"3/2*sqrt2"``)."""
    p = _Parser(text)
    coef, a, b = p.term(1)
    if a != 0 or b != 0 or p.i != len(p.toks):
        raise ParseError(f"{text!r} is not a coefficient")
    return coef


def as_expr(x) -> HardyExpr:
    """Accept a HardyExpr or expression text."""
    return x if isinstance(x, HardyExpr) else parse(x)
