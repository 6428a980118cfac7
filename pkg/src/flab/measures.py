"""Empirical measures of sequences mod 1 and their limit behaviour.

Two routes build an :class:`EmpiricalMeasureT`:

* the *sample* route counts ``{x(n)}`` for every ``n`` up to ``N`` (block
  parallel, deterministic), with Fourier coefficients summed from the raw
  samples;
* the *monotone* route handles an eventually increasing Hardy expression
  ``c`` at checkpoints far beyond any sample loop (case-III checkpoints are
  doubly exponential).  Bin counts are exact: the number of ``n <= N`` with
  ``c(n) < x`` is read off the inverse function, found by Newton's method in
  ``u = log t`` and settled as an integer in extended precision.  Fourier
  coefficients come from the Euler-Maclaurin comparison of the sum with
  ``int e(k c(t)) dt``; the reported error bound is ``(1 + TV) / total``
  where TV is the total variation of ``e(k c(t))``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from ._parallel import pmap
from .averaging import AveragingScheme, block_layout, chunked, tree_reduce
from .errors import FourierOutOfRange, SearchBudgetExceeded
from .hardy import HardyExpr, as_expr, classify, derivative, mp_context

DEFAULT_BINS = 1024
DEFAULT_K = 16
MAX_BINS = 2**16
MAX_K = 64
DEFAULT_BUDGET = 10**9
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)
_TAIL_V = 80.0


@dataclass(frozen=True)
class EmpiricalMeasureT:
    """Histogram over ``[0, 1)`` plus Fourier coefficients ``k = 1..K``.

    ``fourier[k - 1]`` holds ``lambda_hat(k)``; negative frequencies follow
    by conjugation.  ``fourier_err`` bounds the error of every coefficient
    (0 for the sample route up to rounding).
    """

    bins: np.ndarray
    total: int
    fourier: np.ndarray
    route: str = "samples"
    fourier_err: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def B(self) -> int:
        return int(self.bins.size)

    @property
    def K(self) -> int:
        return int(self.fourier.size)

    def masses(self) -> np.ndarray:
        return self.bins / self.total

    def hat(self, k: int) -> complex:
        k = int(k)
        if k == 0:
            return 1.0 + 0j
        if abs(k) > self.K:
            raise FourierOutOfRange(f"|k|={abs(k)} exceeds K={self.K}")
        v = complex(self.fourier[abs(k) - 1])
        return v if k > 0 else v.conjugate()

    def hat_from_bins(self, k: int) -> complex:
        centers = (np.arange(self.B) + 0.5) / self.B
        return complex(np.sum(self.bins * kernels.expi(k * centers)) / self.total)

    def merge(self, other: "EmpiricalMeasureT") -> "EmpiricalMeasureT":
        """The measure of the union of two disjoint sample ranges."""
        if other.B != self.B or other.K != self.K:
            raise ValueError("cannot merge measures with different B or K")
        total = self.total + other.total
        four = (self.fourier * self.total + other.fourier * other.total) / total
        return EmpiricalMeasureT(self.bins + other.bins, total, four, self.route,
                                 max(self.fourier_err, other.fourier_err))

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "mass"])
        for i, m in enumerate(self.masses()):
            w.writerow([repr(i / self.B), repr(float(m))])
        return buf.getvalue()

    def fourier_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "re", "im", "abs"])
        for k in range(1, self.K + 1):
            v = self.hat(k)
            w.writerow([k, repr(v.real), repr(v.imag), repr(abs(v))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# sample route
# ---------------------------------------------------------------------------


def _frac_values(source, lo: int, hi: int) -> np.ndarray:
    n = np.arange(lo, hi, dtype=np.int64)
    if isinstance(source, HardyExpr):
        return source.frac_array(n)
    fn = getattr(source, "frac", source)
    v = np.asarray(fn(n), dtype=np.float64)
    return v - np.floor(v)


def _check_bk(B: int, K: int):
    if B < 1 or B > MAX_BINS or B & (B - 1):
        raise ValueError(f"B must be a power of two <= {MAX_BINS}")
    if not 1 <= K <= MAX_K:
        raise ValueError(f"K must be in [1, {MAX_K}]")


def build_empirical_measure(source, scheme: AveragingScheme, B: int = DEFAULT_BINS,
                            K: int = DEFAULT_K) -> List[Tuple[int, EmpiricalMeasureT]]:
    """Measures of ``{x(n)}``, ``n_start <= n <= N``, at every checkpoint.

    ``source`` is a HardyExpr, an object with ``frac(n)``, or a callable
    returning reals (reduced mod 1 here).
    """
    _check_bk(B, K)
    n_start = scheme.n_start
    lo, hi, counts = block_layout(n_start, [n + 1 for n in scheme.checkpoints])
    nb = lo.size
    hist = np.zeros((nb, B), dtype=np.int64)
    sums = [np.zeros((K, nb)) for _ in range(4)]

    def work(chunk):
        i0, i1 = chunk
        base = int(lo[i0])
        x = _frac_values(source, base, int(hi[i1 - 1]))
        idx = np.minimum((x * B).astype(np.int64), B - 1)
        llo, lhi = lo[i0:i1] - base, hi[i0:i1] - base
        for b in range(i1 - i0):
            hist[i0 + b] = np.bincount(idx[llo[b]:lhi[b]], minlength=B)
        z = kernels.expi(x)
        zk = z
        for k in range(K):
            if k:
                zk = zk * z
            parts = (kernels.block_sums(np.ascontiguousarray(zk.real), llo, lhi)
                     + kernels.block_sums(np.ascontiguousarray(zk.imag), llo, lhi))
            for arr, part in zip(sums, parts):
                arr[k, i0:i1] = part

    pmap(work, chunked(lo, hi))
    cum = np.cumsum(hist, axis=0)
    out = []
    for n, k in zip(scheme.checkpoints, counts):
        total = n - n_start + 1
        sr, er = tree_reduce(sums[0][:, :k], sums[1][:, :k])
        si, ei = tree_reduce(sums[2][:, :k], sums[3][:, :k])
        four = ((sr + er) + 1j * (si + ei)) / total
        out.append((n, EmpiricalMeasureT(cum[k - 1].copy(), total, four, "samples",
                                         meta={"N": n, "n_start": n_start})))
    return out


# ---------------------------------------------------------------------------
# monotone route
# ---------------------------------------------------------------------------


class _Inverse:
    """Evaluation and inversion of an increasing expression in ``u = log t``."""

    def __init__(self, c: HardyExpr):
        self.c = c
        self.terms = [(t.coef, t.a, t.b) for t in c.terms]
        self._cache = {}

    def _consts(self, ctx):
        key = ctx.prec
        cache = self._cache.get(key)
        if cache is None:
            cache = self._cache[key] = [
                (coef.mp(ctx), ctx.mpf(a.numerator) / a.denominator, ctx.mpf(b.numerator) / b.denominator,
                 a != 0, b != 0)
                for coef, a, b in self.terms]
        return cache

    def G(self, ctx, u):
        s = ctx.mpf(0)
        for cv, A, Bq, has_a, has_b in self._consts(ctx):
            v = cv
            if has_a:
                v = v * ctx.exp(A * u)
            if has_b:
                v = v * ctx.power(u, Bq)
            s += v
        return s

    def G_dG(self, ctx, u):
        """``G(u)`` and ``G'(u)`` together."""
        s = ctx.mpf(0)
        ds = ctx.mpf(0)
        for cv, A, Bq, has_a, has_b in self._consts(ctx):
            v = cv
            if has_a:
                v = v * ctx.exp(A * u)
            if has_b:
                p = ctx.power(u, Bq)
                s += v * p
                ds += v * (A * p + Bq * p / u)
            else:
                s += v
                ds += v * A
        return s, ds

    def dG(self, ctx, u):
        return self.G_dG(ctx, u)[1]

    def at_int(self, n: int):
        """``c(n)`` with enough precision to separate neighbouring integers."""
        ctx = mp_context(max(128, int(n).bit_length() + 96))
        return self.G(ctx, ctx.log(ctx.mpf(n)))

    def solve_u(self, x, u0: float, prec: int):
        """``u`` with ``G(u) = x``: Newton to 64 bits from ``u0``, then one
        step per precision doubling (quadratic convergence) and a final
        confirming step."""
        ctx = mp_context(64)
        u = ctx.mpf(u0)
        for _ in range(100):
            g, dg = self.G_dG(ctx, u)
            step = (g - x) / dg
            u -= step
            if abs(step) <= abs(u) * ctx.mpf(2) ** -56:
                break
        else:
            raise ArithmeticError(f"Newton failed to converge for {self.c} = {x}")
        p = 64
        while p < prec:
            p = min(2 * p, prec)
            ctx = mp_context(p)
            u = ctx.mpf(u)
            g, dg = self.G_dG(ctx, u)
            u -= (g - x) / dg
        g, dg = self.G_dG(ctx, u)
        u -= (g - x) / dg
        return u, ctx

    def first_at_least(self, x: Fraction, n0: int, n_hi: int, u_guess: float, evals: list,
                       bracketed: bool = False) -> int:
        """Smallest integer ``n`` in ``[n0, n_hi + 1]`` with ``c(n) >= x``.

        ``bracketed`` asserts ``c(n0) < x <= c(n_hi)`` (skips two checks).
        """
        xf = x
        if not bracketed:
            if self.at_int(n0) >= _mpq(n0, xf):
                return n0
            if self.at_int(n_hi) < _mpq(n_hi, xf):
                return n_hi + 1
        prec = n_hi.bit_length() + 96
        u, ctx = self.solve_u(_mpq(n_hi, xf), u_guess, prec)
        evals[0] += 1
        t = ctx.exp(u)
        cand = int(ctx.ceil(t))
        frac_dist = abs(t - ctx.nint(t))
        if frac_dist < ctx.mpf(2) ** -20:
            # settle the integer exactly
            while cand > n0 and self.at_int(cand - 1) >= _mpq(cand - 1, xf):
                cand -= 1
            while self.at_int(cand) < _mpq(cand, xf):
                cand += 1
        return max(n0, min(cand, n_hi + 1))


def _mpq(n: int, q: Fraction):
    ctx = mp_context(max(128, int(n).bit_length() + 96))
    return ctx.mpf(q.numerator) / q.denominator


def _check_increasing(inv: _Inverse, u_lo: float, u_hi: float):
    ctx = mp_context(64)
    grid = np.unique(np.concatenate([np.linspace(u_lo, min(u_hi, u_lo + 20), 400),
                                     np.geomspace(max(u_lo, 1e-3), max(u_hi, u_lo + 1e-3), 200)]))
    for u in grid:
        if u < u_lo or u > u_hi:
            continue
        if inv.dG(ctx, ctx.mpf(float(u))) <= 0:
            raise ValueError(f"{inv.c} is not increasing on [t0, N] (c' <= 0 near log t = {u:.4g})")


def monotone_measure(c, N: int, B: int = DEFAULT_BINS, K: int = DEFAULT_K,
                     n_start: int = 2) -> EmpiricalMeasureT:
    """Measure of ``{c(n)}``, ``n_start <= n <= N``, for increasing ``c``."""
    _check_bk(B, K)
    c = as_expr(c)
    N = int(N)
    inv = _Inverse(c)
    ctx = mp_context(max(128, N.bit_length() + 96))
    L = ctx.log(ctx.mpf(N))
    u0 = math.log(n_start)
    _check_increasing(inv, u0, float(L))
    total = N - n_start + 1
    c0 = inv.at_int(n_start)
    cN = inv.at_int(N)
    j0, j1 = int(mp_context(64).floor(c0)), int(mp_context(64).floor(cN))
    evals = [0]
    # F(x) = #{n : c(n) < x}, on the grid j + i/B
    grid_first = {}
    u_guess = u0
    for j in range(j0, j1 + 1):
        for i in range(B + 1):
            x = Fraction(j) + Fraction(i, B)
            if (j, i) in grid_first:
                continue
            if _mpq(n_start, x) <= c0:
                first = n_start
            elif _mpq(N, x) > cN:
                first = N + 1
            else:
                first = inv.first_at_least(x, n_start, N, u_guess, evals, bracketed=True)
                u_guess = math.log(first) if first < 2**1000 else float(mp_context(64).log(first))
            grid_first[(j, i)] = first
            if i == B:
                grid_first[(j + 1, 0)] = first
    bins = np.zeros(B, dtype=object)
    for j in range(j0, j1 + 1):
        for i in range(B):
            bins[i] += grid_first[(j, i + 1)] - grid_first[(j, i)]
    assert sum(bins) == total
    four, err = _monotone_fourier(inv, n_start, N, K, float(L), float(cN - c0))
    return EmpiricalMeasureT(bins, total, four, "monotone", err,
                             meta={"N": N, "n_start": n_start, "log_N": float(L), "inversions": evals[0]})


def _monotone_fourier(inv: _Inverse, n0: int, N: int, K: int, L: float, c_range: float):
    """``(1/total) sum_n e(k c(n))`` via ``e^L int_0^V e(k G(L - v)) e^{-v} dv``."""
    total = N - n0 + 1
    V = min(L - math.log(n0), _TAIL_V)
    edges = np.linspace(0.0, V, int(math.ceil(V)) * 2 + 1)
    ctx = mp_context(128)
    Lm = ctx.log(ctx.mpf(N))
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * _GL_NODES + 0.5 * (b + a))
        weights.append(0.5 * (b - a) * _GL_WEIGHTS)
    v = np.concatenate(nodes)
    w = np.concatenate(weights) * np.exp(-v)
    phase = np.array([float(inv.G(ctx, Lm - ctx.mpf(float(vv))) % 1) for vv in v])
    # e^L / total, exact enough in mp
    scale = float(ctx.exp(Lm) / total)
    four = np.empty(K, dtype=np.complex128)
    for k in range(1, K + 1):
        four[k - 1] = scale * np.sum(w * kernels.expi((k * phase) % 1.0))
    tail = math.exp(-V) if V < L - math.log(n0) else 0.0
    tv = 2 * math.pi * K * c_range
    err = float((1.0 + tv) / ctx.mpf(total)) + tail * scale + 1e-12
    return four, err


# ---------------------------------------------------------------------------
# derivative measures and tests
# ---------------------------------------------------------------------------


def derivative_sequence(a) -> Tuple[HardyExpr, int]:
    """``(c, d)`` with ``c = a^(d) / d!`` for the classified degree ``d``."""
    a = as_expr(a)
    cls = classify(a)
    if cls.case_id not in ("I", "II", "III", "IV"):
        raise ValueError(f"lambda_from_expr needs case I-IV, got {cls.case_id}")
    d = cls.d
    return derivative(a, d).scale(Fraction(1, math.factorial(d))), d


def lambda_from_expr(a, scheme, B: int = DEFAULT_BINS, K: int = DEFAULT_K,
                     n_start: int = 2) -> List[Tuple[int, EmpiricalMeasureT]]:
    """Measures of ``{a^(d)(n) / d!}`` at each checkpoint.

    ``scheme`` is an AveragingScheme (sample route) or a list of checkpoints;
    checkpoints beyond ``10**9`` use the monotone route.
    """
    c, _ = derivative_sequence(a)
    if isinstance(scheme, AveragingScheme):
        return build_empirical_measure(c, scheme, B, K)
    cps = [int(n) for n in scheme]
    if all(n <= 10**9 for n in cps):
        return build_empirical_measure(c, AveragingScheme.subsequence(cps, n_start), B, K)
    return [(n, monotone_measure(c, n, B, K, n_start)) for n in cps]


@dataclass(frozen=True)
class TestOutcome:
    passed: bool
    worst: object
    value: float

    def __iter__(self):
        return iter((self.passed, self.worst, self.value))


def uniformity_test(m: EmpiricalMeasureT, K: int, tol: float) -> TestOutcome:
    """Pass iff ``max_{1 <= |k| <= K} |lambda_hat(k)| <= tol``."""
    vals = [abs(m.hat(k)) for k in range(1, K + 1)]
    k = int(np.argmax(vals)) + 1
    return TestOutcome(vals[k - 1] <= tol, k, vals[k - 1])


def concentration_test(m: EmpiricalMeasureT, alpha: float, window: float) -> float:
    """Mass of the bins whose centres lie within ``window`` of ``alpha`` mod 1."""
    centers = (np.arange(m.B) + 0.5) / m.B
    dist = np.abs((centers - alpha + 0.5) % 1.0 - 0.5)
    return float(sum(int(b) for b, inside in zip(m.bins, dist < window) if inside) / m.total)


def density_bound_check(m: EmpiricalMeasureT, C: float) -> TestOutcome:
    """Pass iff every dyadic interval of length ``>= 8/B`` has mass ``<= C |I|``.

    ``worst`` is ``(lo, hi, mass)`` of the interval with the largest
    mass-to-length ratio; ``value`` is that ratio.
    """
    masses = np.array([float(b) for b in m.bins]) / m.total
    B = m.B
    best = (0.0, 1.0, 1.0)
    ratio = 0.0
    width = min(8, B)
    while width <= B:
        sums = masses.reshape(B // width, width).sum(axis=1)
        i = int(np.argmax(sums))
        r = sums[i] / (width / B)
        if r > ratio:
            ratio = r
            best = (i * width / B, (i + 1) * width / B, float(sums[i]))
        width *= 2
    return TestOutcome(ratio <= C, best, float(ratio))


def find_checkpoint_times(c, alpha: float, eps: float, count: int, budget: int = DEFAULT_BUDGET,
                          n_start: int = 2, max_bits: int = 1 << 16) -> List[int]:
    """First-entry times of ``{c(N)}`` into ``(alpha - eps, alpha + eps)``.

    One time per excursion: for each integer level ``j`` the smallest
    ``N >= n_start`` with ``c(N) > j + alpha - eps``, kept if ``c(N)`` is still
    below ``j + alpha + eps``.  For a constant ``c`` inside the window every
    ``N`` is a hit and the first ``count`` integers are returned.
    """
    c = as_expr(c)
    alpha = float(alpha) % 1.0
    if count < 1:
        return []
    lo_off, hi_off = Fraction(alpha - eps), Fraction(alpha + eps)
    if c.is_zero or all(t.a == 0 and t.b == 0 for t in c.terms):
        val = c.terms[0].coef if not c.is_zero else None
        f = 0.0 if val is None else float(val.mp(mp_context(128)) % 1)
        dist = abs((f - alpha + 0.5) % 1.0 - 0.5)
        if dist < eps:
            return list(range(n_start, n_start + count))
        raise SearchBudgetExceeded(f"constant {{c}} = {f} never enters the window")
    lead = c.lead
    if lead.coef.sign <= 0 or (lead.a, lead.b) <= (0, 0):
        raise ValueError(f"{c} is not eventually increasing and unbounded")
    inv = _Inverse(c)
    evals = 0
    out: List[int] = []
    c0 = inv.at_int(n_start)
    j = int(math.floor(float(c0) - float(lo_off)))
    u_guess = math.log(n_start)
    ctx64 = mp_context(64)
    while len(out) < count:
        x_lo = Fraction(j) + lo_off
        x_hi = Fraction(j) + hi_off
        j += 1
        if _mpq(n_start, x_hi) <= c0:
            continue
        if _mpq(n_start, x_lo) <= c0:
            cand = n_start
        else:
            # locate u in double precision first to size the working precision
            ctx = mp_context(64)
            u, _ = inv.solve_u(float(x_lo), u_guess, 64)
            evals += 60
            bits = int(float(u) / math.log(2)) + 4
            if bits > max_bits:
                raise SearchBudgetExceeded(f"hit {len(out) + 1} lies beyond 2**{max_bits}")
            hi_bound = 1 << bits
            cand = inv.first_at_least(x_lo, n_start, hi_bound, float(u), [0])
            u_guess = float(ctx64.log(cand))
        evals += 3
        if evals > budget:
            raise SearchBudgetExceeded(f"budget of {budget} evaluations exhausted")
        val = inv.at_int(cand)
        ctx = mp_context(max(128, cand.bit_length() + 96))
        if val < ctx.mpf(x_hi.numerator) / x_hi.denominator:
            out.append(cand)
    return out
