"""Torus systems, sampling times and weights used by the experiments.

Orbits are computed in closed form: a rotation by ``alpha`` at time ``m`` is
``{y + m alpha}`` (one double-double product), a unipotent orbit uses
binomial coefficients.  Times such as ``[a(n)]`` and ``[n alpha + beta]`` are
exact integers: the double-double floor is accepted when the fractional part
is clear of the integers by more than the evaluation error, and settled in
extended precision otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import FloorUndecidable, NotIncreasing, PrecisionInsufficient
from .hardy import DEFAULT_PRECISION, ExactCoefficient, HardyExpr, as_expr, eval_mp, mp_context, parse
from .oracle import UnipotentPhase

MAX_FLOOR_BITS = 512
_FLOOR_MARGIN = 2.0**-80  # relative; well above the double-double error model
_EXACT_INT = 2.0**53


def as_real(x) -> ExactCoefficient:
    """Exact coefficient from text (``"sqrt2"``, ``"3/2*pi"``), numbers, or floats
    (taken at their exact binary value)."""
    if isinstance(x, ExactCoefficient):
        return x
    if isinstance(x, float):
        return ExactCoefficient(Fraction(x))
    return ExactCoefficient.of(x)


def _real_text(c: ExactCoefficient) -> str:
    return str(c)


# ---------------------------------------------------------------------------
# exact floors
# ---------------------------------------------------------------------------


def floor_time(a, n: int, precision_bits: int = DEFAULT_PRECISION) -> int:
    """``[a(n)]`` exactly, raising precision up to 512 bits when needed."""
    a = as_expr(a)
    n = int(n)
    prec = max(64, int(precision_bits))
    while True:
        try:
            v, err = eval_mp(a, n, prec)
        except PrecisionInsufficient:
            v, err = None, None
        if v is not None:
            ctx = mp_context(prec)
            fl = ctx.floor(v)
            f = v - fl
            if err == 0 or (f > err and 1 - f > err):
                return int(fl)
        if prec >= MAX_FLOOR_BITS:
            raise FloorUndecidable(f"cannot decide [a({n})] for a = {a} at {prec} bits")
        prec = min(2 * prec, MAX_FLOOR_BITS)


class FloorTime:
    """``n -> [a(n)]`` as exact integer-valued float64 (values below ``2**53``)."""

    def __init__(self, a):
        self.expr = as_expr(a)

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        h, l = self.expr.value_dd(n)
        fl = np.floor(h)
        f = (h - fl) + l
        fl = fl + np.floor(f)
        f = f - np.floor(f)
        if fl.size and np.max(np.abs(fl)) >= _EXACT_INT:
            raise PrecisionInsufficient("floor values exceed 2**53")
        tol = np.maximum(np.abs(h), 1.0) * _FLOOR_MARGIN
        unsure = np.nonzero((f < tol) | (1.0 - f < tol))[0]
        for i in unsure:
            fl[i] = floor_time(self.expr, int(n[i]))
        return fl

    def __repr__(self):
        return f"FloorTime({self.expr})"


class IdentityTime:
    def __call__(self, n) -> np.ndarray:
        return np.asarray(n, dtype=np.float64)

    def __repr__(self):
        return "IdentityTime()"


class BeattyTime:
    """``n -> [n alpha + beta]`` for ``alpha >= 1``."""

    def __init__(self, alpha, beta=0):
        self.alpha = as_real(alpha)
        self.beta = as_real(beta)
        if self.alpha.mp(mp_context(128)) < 1:
            raise NotIncreasing(f"alpha = {self.alpha} < 1 gives a non-increasing sequence")

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        ah, al = self.alpha.dd
        bh, bl = self.beta.dd
        ph, pl = _dd_mul_d_arr(ah, al, n.astype(np.float64))
        ph, pl = _dd_add_arr(ph, pl, bh, bl)
        fl = np.floor(ph)
        f = (ph - fl) + pl
        fl = fl + np.floor(f)
        f = f - np.floor(f)
        tol = np.maximum(np.abs(ph), 1.0) * _FLOOR_MARGIN
        for i in np.nonzero((f < tol) | (1.0 - f < tol))[0]:
            fl[i] = beatty(self.alpha, self.beta, int(n[i]))
        return fl

    def __repr__(self):
        return f"BeattyTime({self.alpha}, {self.beta})"


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _two_prod(a, b):
    p = a * b
    c = 134217729.0 * a
    ah = c - (c - a)
    al = a - ah
    c = 134217729.0 * b
    bh = c - (c - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_mul_d_arr(ah, al, b):
    p, e = _two_prod(ah, b)
    e = e + al * b
    s = p + e
    return s, e - (s - p)


def _dd_add_arr(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    e = e + t
    s2 = s + e
    e = e - (s2 - s)
    e = e + f
    s3 = s2 + e
    return s3, e - (s3 - s2)


def beatty(alpha, beta, n: int) -> int:
    """``[n alpha + beta]`` exactly; ``alpha < 1`` raises NotIncreasing."""
    alpha, beta = as_real(alpha), as_real(beta)
    n = int(n)
    prec = 128
    while True:
        ctx = mp_context(prec)
        a = alpha.mp(ctx)
        if a < 1:
            raise NotIncreasing(f"alpha = {alpha} < 1 gives a non-increasing sequence")
        if alpha.is_rational and beta.is_rational:
            return int((n * alpha.q + beta.q) // 1)
        v = n * a + beta.mp(ctx)
        fl = ctx.floor(v)
        f = v - fl
        tol = abs(v) * ctx.mpf(2) ** (8 - prec) + ctx.mpf(2) ** (8 - prec)
        if f > tol and 1 - f > tol:
            return int(fl)
        if prec >= MAX_FLOOR_BITS:
            raise FloorUndecidable(f"cannot decide [{n}*{alpha} + {beta}]")
        prec *= 2


def bernoulli_weight(seed: int, n) -> np.ndarray:
    """Counter-based ±1 weight (splitmix64 finalizer, sign from the top bit)."""
    scalar = np.isscalar(n)
    n = np.asarray(n, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + n * np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    out = np.where((z >> np.uint64(63)) == 0, 1.0, -1.0)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# torus systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusSystem:
    """``rotation`` (``alpha``, point ``y``), ``product`` of systems, or
    ``unipotent`` (degree ``d`` model started at ``y``)."""

    kind: str
    alpha: Optional[ExactCoefficient] = None
    y: tuple = ()
    parts: tuple = ()
    d: int = 0

    @classmethod
    def rotation(cls, alpha, y=0) -> "TorusSystem":
        return cls("rotation", as_real(alpha), (as_real(y),))

    @classmethod
    def product(cls, parts: Sequence["TorusSystem"]) -> "TorusSystem":
        return cls("product", parts=tuple(parts))

    @classmethod
    def unipotent(cls, d: int, y: Sequence) -> "TorusSystem":
        if len(y) != d + 1:
            raise ValueError("unipotent system needs d + 1 coordinates")
        return cls("unipotent", y=tuple(as_real(v) for v in y), d=int(d))

    @property
    def dim(self) -> int:
        if self.kind == "rotation":
            return 1
        if self.kind == "unipotent":
            return self.d + 1
        return sum(p.dim for p in self.parts)

    def as_dict(self) -> dict:
        if self.kind == "rotation":
            return {"kind": "rotation", "alpha": _real_text(self.alpha), "y": _real_text(self.y[0])}
        if self.kind == "unipotent":
            return {"kind": "unipotent", "d": self.d, "y": [_real_text(v) for v in self.y]}
        return {"kind": "product", "parts": [p.as_dict() for p in self.parts]}

    @classmethod
    def from_dict(cls, d: dict) -> "TorusSystem":
        kind = d["kind"]
        if kind == "rotation":
            return cls.rotation(d["alpha"], d.get("y", 0))
        if kind == "unipotent":
            return cls.unipotent(d["d"], d["y"])
        if kind == "product":
            return cls.product([cls.from_dict(p) for p in d["parts"]])
        raise ValueError(f"unknown system kind {kind!r}")


class OrbitSample:
    """``n -> e(sum_i m_i x_i)`` where ``x = S^{time(n)} y``."""

    def __init__(self, sys: TorusSystem, time, freqs: Sequence[int]):
        freqs = [int(m) for m in freqs]
        if len(freqs) != sys.dim:
            raise ValueError(f"need {sys.dim} frequencies, got {len(freqs)}")
        self.sys, self.time, self.freqs = sys, time, freqs
        self._parts = []
        self._collect(sys, freqs)

    def _collect(self, sys, freqs):
        if sys.kind == "rotation":
            m = freqs[0]
            if m:
                # e(m (y + t alpha)) = e(t (m alpha) + m y)
                self._parts.append(("rot", (sys.alpha * m).dd, (sys.y[0] * m).dd))
        elif sys.kind == "unipotent":
            if any(freqs):
                self._parts.append(("uni", UnipotentPhase(sys.y, freqs), None))
        else:
            i = 0
            for p in sys.parts:
                self._collect(p, freqs[i:i + p.dim])
                i += p.dim

    def frac(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        t = self.time(n) if self.time is not None else n.astype(np.float64)
        t = np.asarray(t, dtype=np.float64)
        total = np.zeros(n.shape)
        for kind, a, b in self._parts:
            if kind == "rot":
                total = total + kernels.int_times_dd_frac(t, a[0], a[1], b[0], b[1])
            else:
                total = total + a.frac(t.astype(np.int64))
        total = total - np.floor(total)
        return total - (total >= 1.0)

    def __call__(self, n) -> np.ndarray:
        return kernels.expi(self.frac(n))


def orbit_sample(sys: TorusSystem, time, freqs: Sequence[int]) -> OrbitSample:
    """The sampled observable ``n -> e(m . S^{time(n)} y)``.

    ``time`` is ``None`` (identity), a HardyExpr or expression text (meaning
    ``[a(n)]``), or any callable returning exact integers as float64/int64.
    """
    if time is None:
        time = IdentityTime()
    elif isinstance(time, (HardyExpr, str)):
        time = FloorTime(time)
    return OrbitSample(sys, time, freqs)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightSpec:
    """Bounded weight sequences ``w(n)`` (unimodular or ±1)."""

    kind: str
    alpha: Optional[ExactCoefficient] = None
    interval: tuple = ()
    seed: int = 0
    expr: Optional[HardyExpr] = field(default=None)

    KINDS = ("one", "exp_linear", "exp_quadratic", "riemann_sample", "bernoulli", "floor_power")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def one(cls):
        return cls("one")

    @classmethod
    def exp_linear(cls, alpha):
        return cls("exp_linear", alpha=as_real(alpha))

    @classmethod
    def exp_quadratic(cls, beta):
        return cls("exp_quadratic", alpha=as_real(beta))

    @classmethod
    def riemann_sample(cls, alpha, u, v):
        u, v = Fraction(u), Fraction(v)
        if not 0 <= u < v <= 1:
            raise ValueError("riemann_sample needs 0 <= u < v <= 1")
        return cls("riemann_sample", alpha=as_real(alpha), interval=(u, v))

    @classmethod
    def bernoulli(cls, seed: int):
        return cls("bernoulli", seed=int(seed))

    @classmethod
    def floor_power(cls, a, alpha):
        return cls("floor_power", alpha=as_real(alpha), expr=as_expr(a))

    def __call__(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=np.int64)
        k = self.kind
        if k == "one":
            return np.ones(n.shape, dtype=np.complex128)
        if k == "bernoulli":
            return bernoulli_weight(self.seed, n).astype(np.complex128)
        if k == "floor_power":
            return orbit_sample(TorusSystem.rotation(self.alpha), self.expr, [1])(n)
        ah, al = self.alpha.dd
        if k == "exp_linear":
            return kernels.expi(kernels.int_times_dd_frac(n.astype(np.float64), ah, al))
        if k == "exp_quadratic":
            sq = n.astype(np.float64) ** 2
            if sq.size and sq.max() >= _EXACT_INT:
                raise PrecisionInsufficient("n**2 exceeds 2**53")
            return kernels.expi(kernels.int_times_dd_frac(sq, ah, al))
        # riemann_sample: 2 * 1_[u, v)({n alpha}) - 1
        x = kernels.int_times_dd_frac(n.astype(np.float64), ah, al)
        u, v = (float(t) for t in self.interval)
        return np.where((x >= u) & (x < v), 1.0, -1.0).astype(np.complex128)

    def as_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("exp_linear", "riemann_sample", "floor_power"):
            d["alpha"] = _real_text(self.alpha)
        if self.kind == "exp_quadratic":
            d["beta"] = _real_text(self.alpha)
        if self.kind == "riemann_sample":
            d["interval"] = [str(self.interval[0]), str(self.interval[1])]
        if self.kind == "bernoulli":
            d["seed"] = self.seed
        if self.kind == "floor_power":
            d["expr"] = str(self.expr)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSpec":
        k = d["kind"]
        if k == "one":
            return cls.one()
        if k == "exp_linear":
            return cls.exp_linear(d["alpha"])
        if k == "exp_quadratic":
            return cls.exp_quadratic(d.get("beta", d.get("alpha")))
        if k == "riemann_sample":
            u, v = d["interval"]
            return cls.riemann_sample(d["alpha"], Fraction(str(u)), Fraction(str(v)))
        if k == "bernoulli":
            return cls.bernoulli(d.get("seed", 0))
        if k == "floor_power":
            return cls.floor_power(parse(d["expr"]), d["alpha"])
        raise ValueError(f"unknown weight kind {k!r}")
