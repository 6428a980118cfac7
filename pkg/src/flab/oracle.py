"""Closed-form correlation predictions from the unipotent torus model.

For a classified sequence ``e(a(n))`` of degree ``d`` with limit measure
``lambda`` (the law of ``{a^(d)(n) / d!}``), a correlation query with shifts
``n_j`` and signs ``k_j`` has limit

    0                    unless  sum_j k_j n_j**i = 0  for i < d,
    lambda_hat(l_d)      with    l_d = sum_j k_j n_j**d   otherwise.

The model ``X_d = (T^{d+1}, lambda' x Haar, S_d)`` with the unipotent map
``S_d(y_0, ..., y_d) = (y_0, y_1 + y_0, ..., y_d + y_{d-1})`` gives the same
numbers through binomial coefficients ``c_i = sum_j k_j C(n_j, i)``; since
``c_d = l_d / d!`` the two agree once ``lambda'`` is the pushforward of
``lambda`` under ``t -> d! t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional, Sequence

import mpmath
import numpy as np

from . import kernels
from .correlation import CorrelationQuery
from .errors import FourierOutOfRange, NonIntegerFrequency
from .hardy import D_MAX, Classification, ExactCoefficient, mp_context

MEASURE_PREC = 192
MATCH_TOL = 1e-12
_DIGIT_BITS = 26


def _to_mp(ctx, x):
    if isinstance(x, ExactCoefficient):
        return x.mp(ctx)
    if isinstance(x, Fraction):
        return ctx.mpf(x.numerator) / x.denominator
    if isinstance(x, int):
        return ctx.mpf(x)
    if isinstance(x, str):
        return ExactCoefficient.of(x).mp(ctx)
    return ctx.mpf(x)


def _e_of_frac(ctx, x) -> complex:
    """``e(x)`` for an mpf ``x``, reduced mod 1 before rounding to float."""
    f = float(x - ctx.floor(x))
    return complex(kernels.expi(np.array([f]))[0])


# ---------------------------------------------------------------------------
# measures on the circle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasureSpec:
    """A probability measure on ``T`` given by its Fourier transform.

    ``kind`` is ``"uniform"``, ``"point_mass"`` (at ``alpha``, kept exact or
    at 192 bits) or ``"fourier_table"`` (``table[k]`` for ``0 <= k <= K``;
    negative ``k`` by conjugation).
    """

    kind: str
    alpha: object = None
    table: Optional[Dict[int, complex]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("uniform", "point_mass", "fourier_table"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "point_mass" and self.alpha is None:
            raise ValueError("point mass needs alpha")
        if self.kind == "fourier_table":
            tab = {int(k): complex(v) for k, v in (self.table or {}).items()}
            if abs(tab.get(0, 1.0) - 1.0) > 1e-12:
                raise ValueError("lambda_hat(0) must be 1")
            tab[0] = 1.0 + 0j
            for k, v in list(tab.items()):
                if abs(v) > 1 + 1e-12:
                    raise ValueError(f"|lambda_hat({k})| > 1")
                if k < 0:
                    pos = tab.get(-k)
                    if pos is not None and abs(pos - v.conjugate()) > 1e-12:
                        raise ValueError(f"lambda_hat({k}) is not conj(lambda_hat({-k}))")
                    tab.setdefault(-k, v.conjugate())
                    del tab[k]
            object.__setattr__(self, "table", tab)

    @classmethod
    def uniform(cls) -> "MeasureSpec":
        return cls("uniform")

    @classmethod
    def point_mass(cls, alpha) -> "MeasureSpec":
        if isinstance(alpha, str):
            alpha = ExactCoefficient.of(alpha)
        return cls("point_mass", alpha)

    @classmethod
    def fourier_table(cls, table: Dict[int, complex]) -> "MeasureSpec":
        return cls("fourier_table", table=dict(table))

    @property
    def K(self) -> Optional[int]:
        return max(self.table) if self.kind == "fourier_table" else None

    def alpha_mp(self, ctx):
        return _to_mp(ctx, self.alpha)

    def hat(self, k) -> complex:
        """``lambda_hat(k) = int e(k t) d lambda(t)`` for integer ``k``;
        point masses also accept rational ``k``."""
        if self.kind == "uniform":
            return 1.0 + 0j if k == 0 else 0j
        if self.kind == "point_mass":
            ctx = mp_context(MEASURE_PREC)
            kk = Fraction(k)
            return _e_of_frac(ctx, ctx.mpf(kk.numerator) / kk.denominator * self.alpha_mp(ctx))
        if Fraction(k).denominator != 1:
            raise NonIntegerFrequency(f"frequency {k} is not an integer")
        k = int(k)
        if abs(k) > self.K:
            raise FourierOutOfRange(f"|k|={abs(k)} exceeds table size K={self.K}")
        v = self.table[abs(k)]
        return v if k >= 0 else v.conjugate()

    def pushforward(self, m: int) -> "MeasureSpec":
        """Image under ``t -> m t mod 1`` for a positive integer ``m``."""
        m = int(m)
        if m < 1:
            raise ValueError("pushforward factor must be a positive integer")
        if m == 1 or self.kind == "uniform":
            return self
        if self.kind == "point_mass":
            a = self.alpha
            if isinstance(a, ExactCoefficient):
                return MeasureSpec.point_mass(a * m)
            if isinstance(a, (Fraction, int)):
                return MeasureSpec.point_mass(a * m)
            ctx = mp_context(MEASURE_PREC)
            return MeasureSpec.point_mass(_to_mp(ctx, a) * m)
        return MeasureSpec.fourier_table({k: self.table[k * m] for k in range(self.K // m + 1)})

    def as_dict(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform"}
        if self.kind == "point_mass":
            ctx = mp_context(MEASURE_PREC)
            a = self.alpha_mp(ctx)
            return {"kind": "point_mass", "alpha": str(self.alpha) if isinstance(self.alpha, ExactCoefficient)
                    else mpmath.nstr(a, 40), "alpha_value": float(a)}
        return {"kind": "fourier_table",
                "table": {str(k): [v.real, v.imag] for k, v in sorted(self.table.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "MeasureSpec":
        kind = d["kind"]
        if kind == "uniform":
            return cls.uniform()
        if kind == "point_mass":
            a = d["alpha"]
            try:
                return cls.point_mass(ExactCoefficient.of(a) if isinstance(a, (str, int)) else a)
            except ValueError:
                return cls.point_mass(mp_context(MEASURE_PREC).mpf(a))
        return cls.fourier_table({int(k): complex(*v) for k, v in d["table"].items()})


def default_lambda(cls: Classification) -> MeasureSpec:
    """The limit measure fixed by the classification alone (cases I and IV)."""
    if cls.case_id == "I":
        return MeasureSpec.uniform()
    if cls.case_id == "IV":
        return MeasureSpec.point_mass(cls.alpha)
    raise ValueError(f"case {cls.case_id} has no a-priori limit measure; measure it (measures module)")


@dataclass(frozen=True)
class UnipotentModel:
    d: int
    lam: MeasureSpec

    def __post_init__(self):
        if not 0 <= self.d <= D_MAX:
            raise ValueError(f"d must be in [0, {D_MAX}]")


# ---------------------------------------------------------------------------
# vanishing conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionResult:
    vanishes: bool
    value: Optional[object]  # l_d (int) or c_d (Fraction); None unless vanishing

    def __iter__(self):
        return iter((self.vanishes, self.value))


def _factors(q: CorrelationQuery):
    q = q.folded()
    return list(zip(q.shifts, q.signs))


def _pow(n: int, i: int) -> int:
    return 1 if i == 0 else n**i  # 0**0 = 1


def power_sum_condition(q: CorrelationQuery, d: int) -> ConditionResult:
    """Whether ``sum k_j n_j**i = 0`` for ``i < d``; then ``l_d = sum k_j n_j**d``."""
    if d < 0:
        raise ValueError("d must be >= 0")
    fs = _factors(q)
    vanishes = all(sum(k * _pow(n, i) for n, k in fs) == 0 for i in range(d))
    return ConditionResult(vanishes, sum(k * _pow(n, d) for n, k in fs) if vanishes else None)


def binom(n: int, i: int) -> Fraction:
    """``C(n, i) = n (n-1) ... (n-i+1) / i!`` for any integer ``n``."""
    num = 1
    for j in range(i):
        num *= n - j
    return Fraction(num, math.factorial(i))


def binom_condition(q: CorrelationQuery, d: int) -> ConditionResult:
    """Whether ``c_i = sum k_j C(n_j, i) = 0`` for ``i < d``; then ``c_d``."""
    if d < 0:
        raise ValueError("d must be >= 0")
    fs = _factors(q)
    vanishes = all(sum(k * binom(n, i) for n, k in fs) == 0 for i in range(d))
    return ConditionResult(vanishes, sum((k * binom(n, d) for n, k in fs), Fraction(0)) if vanishes else None)


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------


def _check_case(cls: Classification):
    if cls.case_id not in ("I", "II", "III", "IV"):
        raise ValueError(f"predictions need case I-IV, got {cls.case_id}; "
                         "reduce case V to progressions b(rn + k) first")


def predict_correlation(cls: Classification, lam: MeasureSpec, q: CorrelationQuery) -> complex:
    """``lambda_hat(l_d)`` if the power sums below ``d`` vanish, else 0."""
    _check_case(cls)
    cond = power_sum_condition(q, cls.d)
    if not cond.vanishes:
        return 0j
    return lam.hat(cond.value)


def _binom_digits(n: np.ndarray, i: int, ndig: int):
    """Sign and base-2**26 digits of ``C(n, i)`` for an int64 array ``n``."""
    vals = [int(binom(int(x), i)) for x in n.ravel()]
    sign = np.array([-1.0 if v < 0 else 1.0 for v in vals]).reshape(n.shape)
    digits = np.zeros((ndig,) + n.shape)
    mask = (1 << _DIGIT_BITS) - 1
    flat = [abs(v) for v in vals]
    for j in range(ndig):
        shift = _DIGIT_BITS * j
        digits[j] = np.array([(v >> shift) & mask for v in flat], dtype=np.float64).reshape(n.shape)
    return sign, digits


class UnipotentPhase:
    """``n -> {sum_k m_k x_k(n)}`` for the orbit ``x(n) = S_d^n y``.

    Coordinates are ``x_k(n) = sum_i C(n, i) y_{k-i}``.  The phase is
    ``sum_i C(n, i) Y_i`` with ``Y_i = sum_k m_k y_{k-i}``; every integer
    ``C(n, i)`` is split into 26-bit digits ``c_j`` and multiplied against
    ``{2**(26 j) Y_i}`` precomputed in extended precision, so the phase is
    exact up to double-double rounding however large ``n`` is.
    """

    def __init__(self, y: Sequence, freqs: Optional[Sequence[int]] = None, max_abs_n: int = 10**9):
        d = len(y) - 1
        if d < 0 or d > D_MAX:
            raise ValueError(f"need 1..{D_MAX + 1} coordinates")
        freqs = list(freqs) if freqs is not None else [0] * d + [1]
        if len(freqs) != d + 1:
            raise ValueError("one frequency per coordinate is required")
        self.d = d
        self.max_abs_n = int(max_abs_n)
        top = max(1, int(binom(self.max_abs_n + d, d)))
        self.ndig = max(1, -(-top.bit_length() // _DIGIT_BITS))
        ctx = mp_context(_DIGIT_BITS * self.ndig + 160)
        ys = [_to_mp(ctx, v) for v in y]
        self.tables = []  # per i: (hi, lo) arrays over digits
        for i in range(d + 1):
            Y = sum((freqs[k] * ys[k - i] for k in range(i, d + 1)), ctx.mpf(0))
            hs, ls = [], []
            for j in range(self.ndig):
                z = Y * ctx.mpf(2) ** (_DIGIT_BITS * j)
                z = z - ctx.floor(z)
                h = float(z)
                hs.append(h)
                ls.append(float(z - h))
            self.tables.append((np.array(hs), np.array(ls)))

    def frac(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        if n.size and int(np.max(np.abs(n))) > self.max_abs_n:
            raise ValueError(f"|n| exceeds {self.max_abs_n}")
        total = np.zeros(n.shape)
        for i in range(self.d + 1):
            hs, ls = self.tables[i]
            if i == 0:
                part = np.full(n.shape, hs[0] + ls[0])
            else:
                sign, digits = _binom_digits(n, i, self.ndig)
                part = np.zeros(n.shape)
                for j in range(self.ndig):
                    part += kernels.int_times_dd_frac(digits[j].ravel(), hs[j], ls[j]).reshape(n.shape)
                part = sign * part
            total = total + part
        total = total - np.floor(total)
        return total - (total >= 1.0)

    def __call__(self, n) -> np.ndarray:
        return kernels.expi(self.frac(n))


def unipotent_orbit_phase(model: UnipotentModel, y: Sequence, n: int) -> complex:
    """``e(sum_i C(n, i) y_{d-i})``, the top coordinate of ``S_d^n y``."""
    if len(y) != model.d + 1:
        raise ValueError(f"y must have {model.d + 1} coordinates")
    ph = UnipotentPhase(y, max_abs_n=max(abs(int(n)), 1))
    return complex(ph(np.array([int(n)]))[0])


def unipotent_expected_correlation(model: UnipotentModel, q: CorrelationQuery) -> complex:
    """``int e(c_d y_0) d lambda(y_0)`` if ``c_i = 0`` for ``i < d``, else 0."""
    cond = binom_condition(q, model.d)
    if not cond.vanishes:
        return 0j
    c = cond.value
    lam = model.lam
    if lam.kind == "uniform":
        return 1.0 + 0j if c == 0 else 0j
    if lam.kind == "fourier_table" and c.denominator != 1:
        raise NonIntegerFrequency(f"c_d = {c} is not an integer")
    return lam.hat(c)


@dataclass(frozen=True)
class Reconciliation:
    power_sum: complex
    unipotent: complex
    match: bool


def model_reconciliation(cls: Classification, lam: MeasureSpec, q: CorrelationQuery) -> Reconciliation:
    """Compare the power-sum prediction with the unipotent-model integral.

    The model measure is the pushforward of ``lam`` under ``t -> d! t``.
    """
    _check_case(cls)
    a = predict_correlation(cls, lam, q)
    model = UnipotentModel(cls.d, lam.pushforward(math.factorial(cls.d)))
    b = unipotent_expected_correlation(model, q)
    return Reconciliation(a, b, abs(a - b) <= MATCH_TOL)


def prediction_record(cls: Classification, lam: MeasureSpec, q: CorrelationQuery) -> dict:
    """JSON-ready record of one prediction."""
    p = power_sum_condition(q, cls.d)
    b = binom_condition(q, cls.d)
    v = predict_correlation(cls, lam, q)
    return {
        "case": cls.case_id,
        "d": cls.d,
        "lambda": lam.as_dict(),
        "query": q.as_dict(),
        "value_re": v.real,
        "value_im": v.imag,
        "vanishes": p.vanishes,
        "l_d": p.value,
        "c_d": None if b.value is None else str(b.value),
    }
