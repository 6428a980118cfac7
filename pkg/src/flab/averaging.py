"""Cesàro and weighted averages over checkpoint schemes, finite differences.

All sums run over ``n = n_start, n_start + 1, ...`` in blocks of 4096
indices anchored at ``n_start`` and additionally cut at every checkpoint.
Each block is summed with compensated arithmetic; the block results are then
combined, per checkpoint, by a pairwise tree whose shape depends only on the
number of blocks.  Blocks are independent, so they are computed in parallel
and the result does not depend on the thread count.

A *source* is any callable taking an int64 array of indices and returning
a float or complex array of the same length; it must be a pure function of
``n``.  Sources may also offer ``range(lo, hi)`` for contiguous ranges.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import kernels
from ._parallel import pmap
from .errors import BadWeight
from .hardy import D_MAX, ExactCoefficient, HardyExpr, as_expr, derivative

BLOCK = 4096
CHUNK_BLOCKS = 64
MIN_CHECKPOINT = 10
MAX_N = 10**9
DEFAULT_FIRST = 2**10


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


def source_values(source, lo: int, hi: int) -> np.ndarray:
    """Values of ``source`` at ``n = lo .. hi - 1``."""
    rng = getattr(source, "range", None)
    if rng is not None:
        return rng(lo, hi)
    return np.asarray(source(np.arange(lo, hi, dtype=np.int64)))


@dataclass(frozen=True)
class PhaseSource:
    """``n -> e(scale * a(n))`` with the phase reduced mod 1 in double-double."""

    expr: HardyExpr
    scale: Optional[ExactCoefficient] = None

    def frac(self, n) -> np.ndarray:
        return self.expr.frac_array(n, self.scale)

    def __call__(self, n) -> np.ndarray:
        return kernels.expi(self.frac(n))

    def range(self, lo, hi):
        return self(np.arange(lo, hi, dtype=np.int64))


@dataclass(frozen=True)
class LinearPhase:
    """``n -> e(n * alpha + beta)`` with ``alpha`` exact."""

    alpha: ExactCoefficient
    beta: ExactCoefficient = ExactCoefficient(0)

    def frac(self, n) -> np.ndarray:
        ah, al = ExactCoefficient.of(self.alpha).dd
        bh, bl = ExactCoefficient.of(self.beta).dd
        return kernels.int_times_dd_frac(np.asarray(n, dtype=np.float64), ah, al, bh, bl)

    def __call__(self, n) -> np.ndarray:
        return kernels.expi(self.frac(n))


@dataclass(frozen=True)
class ConstantSource:
    value: complex = 1.0

    def __call__(self, n) -> np.ndarray:
        return np.full(np.shape(n), self.value, dtype=np.complex128)


# ---------------------------------------------------------------------------
# schemes and series
# ---------------------------------------------------------------------------


def powers_of(gamma: float, n_max: int, first: int = DEFAULT_FIRST) -> list:
    """Checkpoints ``ceil(gamma**k) >= first`` up to ``n_max``, plus ``n_max``."""
    if not gamma > 1:
        raise ValueError("powers_of needs gamma > 1")
    out = []
    k = math.ceil(math.log(first) / math.log(gamma) - 1e-12)
    while True:
        v = math.ceil(gamma**k - 1e-9)
        if v > n_max:
            break
        if v >= first and (not out or v > out[-1]):
            out.append(v)
        k += 1
    if not out or out[-1] != n_max:
        out.append(int(n_max))
    return out


@dataclass(frozen=True)
class AveragingScheme:
    """Where averages are reported.

    ``kind`` is ``"full"`` (averages over ``[n_start, N]`` at each
    checkpoint), ``"subsequence"`` (the same over the ladder ``M_k``), or
    ``"weighted"`` (the ``E^w`` average with weight ``weight``).
    """

    kind: str
    checkpoints: tuple
    n_start: int = 2
    weight: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("full", "subsequence", "weighted"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        cps = tuple(int(c) for c in self.checkpoints)
        object.__setattr__(self, "checkpoints", cps)
        if not cps:
            raise ValueError("a scheme needs at least one checkpoint")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError("checkpoints must be strictly increasing")
        if cps[0] < MIN_CHECKPOINT:
            raise ValueError(f"checkpoints must be >= {MIN_CHECKPOINT}")
        if cps[0] < self.n_start:
            raise ValueError(f"checkpoint {cps[0]} is below n_start={self.n_start}")
        if cps[-1] > MAX_N:
            raise ValueError(f"N_max must be <= {MAX_N}")
        if self.kind == "weighted" and self.weight is None:
            raise ValueError("weighted scheme needs a weight")

    @classmethod
    def full(cls, n_max: int, gamma: float = 2.0, checkpoints: Optional[Sequence[int]] = None,
             n_start: int = 2) -> "AveragingScheme":
        cps = list(checkpoints) if checkpoints is not None else powers_of(gamma, n_max)
        if checkpoints is None and n_max < DEFAULT_FIRST:
            cps = [n_max]
        return cls("full", tuple(cps), n_start)

    @classmethod
    def subsequence(cls, ms: Sequence[int], n_start: int = 2) -> "AveragingScheme":
        return cls("subsequence", tuple(ms), n_start)

    @classmethod
    def weighted(cls, w, n_max: int, gamma: float = 2.0, checkpoints: Optional[Sequence[int]] = None,
                 n_start: int = 2) -> "AveragingScheme":
        cps = list(checkpoints) if checkpoints is not None else (
            powers_of(gamma, n_max) if n_max >= DEFAULT_FIRST else [n_max])
        return cls("weighted", tuple(cps), n_start, weight=w)

    @property
    def n_max(self) -> int:
        return self.checkpoints[-1]


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class ComplexSeries:
    """Averages at checkpoints; ``samples[k]`` terms entered ``values[k]``."""

    N: tuple
    values: tuple
    samples: tuple
    n_start: int = 2

    @property
    def final(self) -> complex:
        return self.values[-1]

    def at(self, n: int) -> complex:
        return self.values[self.N.index(n)]

    def rows(self):
        for n, v, c in zip(self.N, self.values, self.samples):
            yield n, v.real, v.imag, abs(v), c

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "re", "im", "abs", "samples"])
        for n, re, im, ab, c in self.rows():
            w.writerow([n, _fmt(re), _fmt(im), _fmt(ab), c])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="ascii") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, n_start: int = 2) -> "ComplexSeries":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(tuple(int(r["N"]) for r in rows),
                   tuple(complex(float(r["re"]), float(r["im"])) for r in rows),
                   tuple(int(r["samples"]) for r in rows), n_start)


# ---------------------------------------------------------------------------
# deterministic block reduction
# ---------------------------------------------------------------------------


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    e = e + t
    s2 = s + e
    e = e - (s2 - s)
    e = e + f
    s3 = s2 + e
    return s3, e - (s3 - s2)


def tree_reduce(s: np.ndarray, e: np.ndarray) -> tuple:
    """Pairwise double-double sum of block results along the last axis.

    The tree shape depends only on the number of blocks.  Returns floats for
    1-D input and arrays (one entry per row) for 2-D input.
    """
    s = np.asarray(s, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if s.shape[-1] == 0:
        z = np.zeros(s.shape[:-1])
        return (0.0, 0.0) if s.ndim == 1 else (z, z.copy())
    while s.shape[-1] > 1:
        if s.shape[-1] % 2:
            pad = [(0, 0)] * (s.ndim - 1) + [(0, 1)]
            s = np.pad(s, pad)
            e = np.pad(e, pad)
        s, e = _dd_add(s[..., 0::2], e[..., 0::2], s[..., 1::2], e[..., 1::2])
    if s.ndim == 1:
        return float(s[0]), float(e[0])
    return s[..., 0], e[..., 0]


def block_layout(n_start: int, ends: Sequence[int]) -> tuple:
    """Blocks ``[lo, hi)`` on the 4096-grid from ``n_start``, cut at ``ends``.

    Returns ``(lo, hi, counts)`` where ``counts[k]`` is the number of
    leading blocks covering ``[n_start, ends[k])``.
    """
    ends = [int(x) for x in ends]
    if any(x <= n_start for x in ends):
        raise ValueError("every range end must exceed n_start")
    last = max(ends)
    grid = list(range(n_start, last, BLOCK)) + [last]
    cuts = sorted(set(grid) | set(ends))
    lo = np.array(cuts[:-1], dtype=np.int64)
    hi = np.array(cuts[1:], dtype=np.int64)
    counts = [int(np.searchsorted(hi, x, side="right")) for x in ends]
    return lo, hi, counts


def chunked(lo: np.ndarray, hi: np.ndarray):
    """Group consecutive blocks into work chunks ``(first, last)``."""
    return [(i, min(i + CHUNK_BLOCKS, lo.size)) for i in range(0, lo.size, CHUNK_BLOCKS)]


def parallel_block_sums(values: Callable, lo: np.ndarray, hi: np.ndarray, is_complex: bool = True):
    """Compensated per-block sums of ``values(lo_n, hi_n)``.

    Returns ``(sr, er)`` or ``(sr, er, si, ei)`` arrays over blocks.
    """
    nb = lo.size
    out = [np.zeros(nb) for _ in range(4 if is_complex else 2)]

    def work(chunk):
        i0, i1 = chunk
        base = int(lo[i0])
        v = values(base, int(hi[i1 - 1]))
        llo, lhi = lo[i0:i1] - base, hi[i0:i1] - base
        if is_complex:
            v = np.asarray(v, dtype=np.complex128)
            return (i0, i1, kernels.block_sums(np.ascontiguousarray(v.real), llo, lhi)
                    + kernels.block_sums(np.ascontiguousarray(v.imag), llo, lhi))
        return i0, i1, kernels.block_sums(np.asarray(v, dtype=np.float64), llo, lhi)

    for i0, i1, parts in pmap(work, chunked(lo, hi)):
        for arr, part in zip(out, parts):
            arr[i0:i1] = part
    return tuple(out)


def _prefix_sums(parts, counts):
    res = []
    for k in counts:
        vals = [tree_reduce(parts[j][:k], parts[j + 1][:k]) for j in range(0, len(parts), 2)]
        res.append(vals)
    return res


def range_sums(values: Callable, n_start: int, ends: Sequence[int], is_complex: bool = True):
    """Sums of ``values`` over ``[n_start, end)`` for each end, as dd pairs.

    ``values(lo, hi)`` must return the terms for ``n = lo .. hi - 1``.
    Returns, per end, ``[(s, e)]`` (real) or ``[(s, e), (s, e)]`` (re, im).
    """
    lo, hi, counts = block_layout(n_start, ends)
    parts = parallel_block_sums(values, lo, hi, is_complex)
    return _prefix_sums(parts, counts)


# ---------------------------------------------------------------------------
# averages
# ---------------------------------------------------------------------------


def _complex_of(pairs) -> complex:
    (sr, er), (si, ei) = pairs
    return complex(sr + er, si + ei)


def cesaro_average(source, scheme: AveragingScheme) -> ComplexSeries:
    """Means ``(1/|I|) sum_{n in I} source(n)`` with ``I = [n_start, N]``."""
    if scheme.kind == "weighted":
        return weighted_series(source, scheme.weight, scheme)
    ends = [n + 1 for n in scheme.checkpoints]
    sums = range_sums(lambda lo, hi: source_values(source, lo, hi), scheme.n_start, ends)
    vals, counts = [], []
    for n, pair in zip(scheme.checkpoints, sums):
        c = n - scheme.n_start + 1
        (sr, er), (si, ei) = pair
        vals.append(complex((sr + er) / c, (si + ei) / c))
        counts.append(c)
    return ComplexSeries(scheme.checkpoints, tuple(vals), tuple(counts), scheme.n_start)


# -- weights -----------------------------------------------------------------


class Weight:
    """A weight ``w`` evaluated in double-double: ``w.dd(n) -> (hi, lo)``."""

    def dd(self, n):  # pragma: no cover - interface
        raise NotImplementedError

    def value(self, n: int) -> float:
        h, lo = self.dd(np.array([n], dtype=np.int64))
        return float(h[0] + lo[0])

    def increments(self, lo: int, hi: int) -> np.ndarray:
        """``w(n + 1) - w(n)`` for ``n = lo .. hi - 1``."""
        h, l = self.dd(np.arange(lo, hi + 1, dtype=np.int64))
        dh, dl = _dd_add(h[1:], l[1:], -h[:-1], -l[:-1])
        return dh + dl


class ExprWeight(Weight):
    def __init__(self, expr: HardyExpr):
        self.expr = expr

    def dd(self, n):
        return self.expr.value_dd(n)

    def __repr__(self):
        return f"ExprWeight({self.expr})"


class DifferenceWeight(Weight):
    """``w(n) = |Delta_r^d a(n)|`` for a Hardy expression ``a``."""

    def __init__(self, expr: HardyExpr, r: int, d: int):
        self.expr, self.r, self.d = expr, int(r), int(d)
        self._diff = finite_difference(expr, r, d)

    def dd(self, n):
        h, l = self._diff.dd(n)
        neg = h < 0
        return np.where(neg, -h, h), np.where(neg, -l, l)

    def __repr__(self):
        return f"DifferenceWeight({self.expr}, r={self.r}, d={self.d})"


def check_weight_expr(w: HardyExpr) -> None:
    """BadWeight unless ``w`` is eventually increasing and unbounded."""
    if w.is_zero:
        raise BadWeight("zero weight")
    lead = w.lead
    if lead.coef.sign <= 0:
        raise BadWeight(f"weight {w} is eventually decreasing (negative leading coefficient)")
    if (lead.a, lead.b) <= (0, 0):
        raise BadWeight(f"weight {w} is bounded")
    if derivative(w, 1).lead.coef.sign <= 0:  # pragma: no cover - implied by the above
        raise BadWeight(f"weight {w} is not eventually increasing")


def as_weight(w) -> Weight:
    if isinstance(w, Weight):
        return w
    expr = as_expr(w)
    check_weight_expr(expr)
    return ExprWeight(expr)


def weighted_series(source, w, scheme: AveragingScheme) -> ComplexSeries:
    """``E^w`` averages ``(1/w(N)) sum_{n_start <= n < N} (w(n+1) - w(n)) source(n)``."""
    weight = as_weight(w)

    def values(lo, hi):
        return source_values(source, lo, hi) * weight.increments(lo, hi)

    sums = range_sums(values, scheme.n_start, scheme.checkpoints)
    vals, counts = [], []
    for n, pair in zip(scheme.checkpoints, sums):
        wn = weight.value(n)
        if not wn > 0:
            raise BadWeight(f"w({n}) = {wn} is not positive")
        (sr, er), (si, ei) = pair
        vals.append(complex((sr + er) / wn, (si + ei) / wn))
        counts.append(n - scheme.n_start)
    return ComplexSeries(scheme.checkpoints, tuple(vals), tuple(counts), scheme.n_start)


def weighted_average(source, w, N: int, n_start: int = 2) -> complex:
    """The single weighted mean ``E^w`` at ``N``."""
    return weighted_series(source, w, AveragingScheme.weighted(w, N, checkpoints=[N], n_start=n_start)).final


# -- finite differences ------------------------------------------------------


class FiniteDifference:
    """``n -> sum_j (-1)**(i-j) C(i,j) a(n + j r)``.

    For a HardyExpr the combination is formed in double-double, otherwise in
    float64 on the values the callable returns.
    """

    def __init__(self, source, r: int, i: int):
        if r < 1:
            raise ValueError("r must be positive")
        if i < 0 or i > D_MAX:
            raise ValueError(f"i must be in [0, {D_MAX}]")
        self.source, self.r, self.i = source, int(r), int(i)
        self.coefs = [(-1) ** (i - j) * math.comb(i, j) for j in range(i + 1)]

    def dd(self, n):
        if not isinstance(self.source, HardyExpr):
            v = self(n)
            return v, np.zeros_like(v)
        n = np.asarray(n, dtype=np.int64)
        sh = np.zeros(n.shape)
        sl = np.zeros(n.shape)
        for j, c in enumerate(self.coefs):
            h, l = self.source.value_dd(n + j * self.r)
            sh, sl = _dd_add(sh, sl, h * c, l * c)  # c is a small integer: exact
        return sh, sl

    def __call__(self, n):
        if isinstance(self.source, HardyExpr):
            h, l = self.dd(n)
            return h + l
        n = np.asarray(n, dtype=np.int64)
        out = np.zeros(n.shape)
        for j, c in enumerate(self.coefs):
            out = out + c * np.asarray(self.source(n + j * self.r), dtype=np.float64)
        return out


def finite_difference(source, r: int, i: int) -> FiniteDifference:
    if isinstance(source, str):
        source = as_expr(source)
    return FiniteDifference(source, r, i)


@dataclass(frozen=True)
class PartialSummationResult:
    weighted: complex
    cesaro: complex
    deviation: float


def partial_summation_check(source, a: Union[HardyExpr, str], d: int, r: int, N: int,
                            n_start: int = 2) -> PartialSummationResult:
    """Compare ``E^w`` with ``w = |Delta_r^d a|`` against the Cesàro mean."""
    a = as_expr(a)
    growth = derivative(a, d)
    if growth.is_zero or (growth.lead.a, growth.lead.b) <= (0, 0):
        raise BadWeight(f"|Delta^{d} a| is bounded for a = {a}; need t^eps < a^({d})")
    w = DifferenceWeight(a, r, d)
    weighted = weighted_average(source, w, N, n_start)
    cesaro = cesaro_average(source, AveragingScheme.full(N, checkpoints=[N], n_start=n_start)).final
    return PartialSummationResult(weighted, cesaro, abs(weighted - cesaro))
