"""Pass/fail numerical experiments built on the averaging engines.

Every experiment returns a :class:`Verdict` (plus whatever series or tables
it produced).  The verdict is a pure function of the inputs, so a job file
reproduces it exactly.  Hypothesis guards raise :class:`HypothesisUnmet`
instead of silently running outside the scope where a reference exists.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from ._parallel import pmap
from .averaging import (AveragingScheme, ComplexSeries, PhaseSource, cesaro_average, powers_of, range_sums,
                        source_values)
from .correlation import (CorrelationQuery, SweepResult, joint_pattern, net_key, net_vector_sweep,
                          pattern_series)
from .errors import HypothesisUnmet
from .hardy import ExactCoefficient, HardyExpr, as_expr, classify
from .oracle import default_lambda, predict_correlation
from .systems import BeattyTime, FloorTime, TorusSystem, WeightSpec, as_real, orbit_sample

CHUNK = 2**18


def _cjson(z) -> object:
    if isinstance(z, complex):
        return {"re": z.real, "im": z.imag, "abs": abs(z)}
    return z


@dataclass
class Verdict:
    experiment: str
    params: dict
    value: object
    reference: object
    tolerance: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"experiment": self.experiment, "params": self.params, "value": _cjson(self.value),
               "reference": _cjson(self.reference), "tolerance": self.tolerance, "pass": bool(self.passed)}
        if self.extra:
            out["extra"] = {k: _cjson(v) for k, v in self.extra.items()}
        return out


def _scheme(N: int, checkpoints=None, n_start: int = 2) -> AveragingScheme:
    if isinstance(N, AveragingScheme):
        return N
    return AveragingScheme.full(int(N), checkpoints=checkpoints, n_start=n_start)


def _require_case_one(a: HardyExpr, what: str, allow_case_two: bool = False):
    cls = classify(a)
    ok = cls.case_id == "I" or (allow_case_two and cls.case_id == "II" and cls.d >= 1)
    if not ok:
        scope = "case I (t^d log t << a << t^(d+1))"
        if allow_case_two:
            scope += " or case II with d >= 1 (a ~ c t^d log t)"
        raise HypothesisUnmet(
            f"{what}: a = {a} is case {cls.case_id} (d={cls.d}); the statement needs {scope}")
    return cls


class ProductSource:
    """Pointwise product of sources."""

    def __init__(self, *parts):
        self.parts = parts

    def __call__(self, n):
        out = np.ones(np.shape(n), dtype=np.complex128)
        for p in self.parts:
            out = out * np.asarray(p(n))
        return out


class FloorPhaseSource:
    """``e([a(n)] alpha)`` via ``e(a(n) alpha) e(-{a(n)} alpha)``."""

    def __init__(self, a, alpha):
        self.expr = as_expr(a)
        self.alpha = as_real(alpha)

    def frac(self, n) -> np.ndarray:
        h, l = self.expr.value_dd(np.asarray(n, dtype=np.int64))
        ah, al = self.alpha.dd
        x = kernels.frac_scaled(h, l, ah, al)
        f = kernels.frac_scaled(h, l)
        y = x - f * ah
        y = y - np.floor(y)
        return y - (y >= 1.0)

    def __call__(self, n) -> np.ndarray:
        return kernels.expi(self.frac(n))


def make_source(spec):
    """Source from a HardyExpr / text (``e(a(n))``) or a dict
    ``{"expr": ..., "scale": ...}`` / ``{"system": ..., "time": ..., "freqs": [...]}``
    / ``{"weight": {...}}``."""
    if isinstance(spec, (HardyExpr, str)):
        return PhaseSource(as_expr(spec))
    if isinstance(spec, dict):
        if "expr" in spec:
            scale = spec.get("scale")
            return PhaseSource(as_expr(spec["expr"]), ExactCoefficient.of(scale) if scale is not None else None)
        if "system" in spec:
            sys = TorusSystem.from_dict(spec["system"])
            return orbit_sample(sys, spec.get("time"), spec.get("freqs", [1] * sys.dim))
        if "weight" in spec:
            return WeightSpec.from_dict(spec["weight"])
    if callable(spec):
        return spec
    raise ValueError(f"cannot build a source from {spec!r}")


# ---------------------------------------------------------------------------
# correlation vs oracle
# ---------------------------------------------------------------------------


@dataclass
class OracleTable:
    queries: List[CorrelationQuery]
    empirical: np.ndarray  # complex, final checkpoint
    predicted: np.ndarray
    sweep: SweepResult

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.empirical - self.predicted)

    def to_csv(self) -> str:
        lines = ["shifts,signs,emp_re,emp_im,pred_re,pred_im,deviation"]
        for q, e, p, d in zip(self.queries, self.empirical, self.predicted, self.deviation):
            lines.append(f"{' '.join(map(str, q.shifts))},{' '.join(map(str, q.signs))},"
                         f"{e.real!r},{e.imag!r},{p.real!r},{p.imag!r},{float(d)!r}")
        return "\n".join(lines) + "\n"


def oracle_comparison(a, queries: Sequence[CorrelationQuery], N, lam=None) -> OracleTable:
    """Empirical correlations of ``e(a(n))`` against the oracle prediction."""
    a = as_expr(a)
    cls = classify(a)
    lam = lam if lam is not None else default_lambda(cls)
    queries = list(queries)
    keys = [net_key(q) for q in queries]
    uniq = list(dict.fromkeys(keys))
    sweep = net_vector_sweep(PhaseSource(a), uniq, _scheme(N))
    pos = {k: i for i, k in enumerate(uniq)}
    emp = np.array([sweep.values[pos[k], -1] for k in keys])
    pred = np.array([predict_correlation(cls, lam, q) for q in queries], dtype=np.complex128)
    return OracleTable(queries, emp, pred, sweep)


# ---------------------------------------------------------------------------
# orthogonality
# ---------------------------------------------------------------------------


def ortho_test(a, w, N, checkpoints=None, tol: float = 0.05, alpha=None) -> Tuple[ComplexSeries, Verdict]:
    """Mean of ``e(a(n)) w(n)`` (or ``e([a(n)] alpha) w(n)``)."""
    a = as_expr(a)
    _require_case_one(a, "ortho_test", allow_case_two=True)
    w = w if isinstance(w, WeightSpec) else WeightSpec.from_dict(w)
    base = PhaseSource(a) if alpha is None else FloorPhaseSource(a, alpha)
    series = cesaro_average(ProductSource(base, w), _scheme(N, checkpoints))
    v = series.final
    params = {"a": str(a), "w": w.as_dict(), "N": series.N[-1]}
    if alpha is not None:
        params["alpha"] = str(as_real(alpha))
    return series, Verdict("ortho", params, v, 0.0, tol, abs(v) <= tol)


# ---------------------------------------------------------------------------
# strong stationarity
# ---------------------------------------------------------------------------


@dataclass
class SSTResult:
    queries: List[CorrelationQuery]
    r_values: List[int]
    values: np.ndarray  # complex (queries, r, checkpoints)
    checkpoints: tuple

    def deviation_series(self) -> np.ndarray:
        """Max over queries and r-pairs of the gap, per checkpoint."""
        v = self.values
        gaps = np.zeros(v.shape[2])
        for i, j in itertools.combinations(range(v.shape[1]), 2):
            gaps = np.maximum(gaps, np.abs(v[:, i, :] - v[:, j, :]).max(axis=0))
        return gaps

    @property
    def per_query(self) -> np.ndarray:
        v = self.values[:, :, -1]
        out = np.zeros(len(self.queries))
        for i, j in itertools.combinations(range(v.shape[1]), 2):
            out = np.maximum(out, np.abs(v[:, i] - v[:, j]))
        return out

    @property
    def deviation(self) -> float:
        return float(self.per_query.max()) if len(self.queries) else 0.0

    @property
    def worst(self) -> CorrelationQuery:
        return self.queries[int(np.argmax(self.per_query))]

    def to_csv(self) -> str:
        lines = ["N,deviation"]
        for n, d in zip(self.checkpoints, self.deviation_series()):
            lines.append(f"{n},{float(d)!r}")
        return "\n".join(lines) + "\n"


def sst_invariance(source, queries: Sequence[CorrelationQuery], r_values: Sequence[int], N,
                   tol: float = 0.05, checkpoints=None, expect_invariant: bool = True) -> Tuple[SSTResult, Verdict]:
    """Correlations at dilations ``r``; the gap must stay below ``tol``.

    With ``expect_invariant=False`` (negative controls) the verdict passes iff
    the gap is at least ``tol``.
    """
    label = source if isinstance(source, (str, dict)) else str(source) if isinstance(source, HardyExpr) else repr(source)
    src = make_source(source)
    queries = list(queries)
    r_values = [int(r) for r in r_values]
    keys = [[net_key(q.dilate(r)) for r in r_values] for q in queries]
    uniq = list(dict.fromkeys(k for row in keys for k in row))
    sweep = net_vector_sweep(src, uniq, _scheme(N, checkpoints))
    pos = {k: i for i, k in enumerate(uniq)}
    vals = np.array([[sweep.values[pos[k]] for k in row] for row in keys])
    res = SSTResult(queries, r_values, vals, sweep.checkpoints)
    dev = res.deviation
    passed = dev <= tol if expect_invariant else dev >= tol
    params = {"source": label if isinstance(label, (str, dict)) else str(label), "queries": len(queries),
              "r_values": r_values, "N": sweep.checkpoints[-1], "expect_invariant": expect_invariant}
    return res, Verdict("sst", params, dev, 0.0 if expect_invariant else tol, tol, passed,
                        {"worst_query": str(res.worst) if queries else None, "classes": sweep.n_classes})


# ---------------------------------------------------------------------------
# multiple ergodic averages and recurrence
# ---------------------------------------------------------------------------


def multi_ergodic_average(alpha_T, alpha_S, f: int, g: int, a, N, tol: float = 0.02,
                          checkpoints=None) -> Tuple[ComplexSeries, Verdict]:
    """Mean of ``f(T^n 0) g(S^[a(n)] 0)`` for characters ``f, g`` of two rotations."""
    a = as_expr(a)
    _require_case_one(a, "multi_ergodic_average")
    T = TorusSystem.rotation(alpha_T)
    S = TorusSystem.rotation(alpha_S)
    src = ProductSource(orbit_sample(T, None, [f]), orbit_sample(S, a, [g]))
    series = cesaro_average(src, _scheme(N, checkpoints))
    predicted = 1.0 + 0j if f == 0 and g == 0 else 0j
    v = series.final
    params = {"alpha_T": str(T.alpha), "alpha_S": str(S.alpha), "f": f, "g": g, "a": str(a), "N": series.N[-1]}
    return series, Verdict("multiavg", params, v, predicted, tol, abs(v - predicted) <= tol)


def _arc_parts(start, length):
    """The circular arc ``[start, start + length)`` as two intervals in ``[0, 1)``."""
    end1 = np.minimum(start + length, 1.0)
    wrap = np.maximum(start + length - 1.0, 0.0)
    return ((start, end1), (np.zeros_like(start), wrap))


def triple_intersection(u: float, v: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Lebesgue measure of ``A ∩ (A - x) ∩ (A - y)`` for the arc ``A = [u, v)``."""
    L = v - u
    if L >= 1.0:
        return np.ones(np.shape(x))
    sx = np.mod(u - x, 1.0)
    sy = np.mod(u - y, 1.0)
    total = np.zeros(np.shape(x))
    for a0, a1 in ((np.full(np.shape(x), u), np.full(np.shape(x), v)),):
        for b0, b1 in _arc_parts(sx, L):
            for c0, c1 in _arc_parts(sy, L):
                lo = np.maximum(np.maximum(a0, b0), c0)
                hi = np.minimum(np.minimum(a1, b1), c1)
                total = total + np.maximum(hi - lo, 0.0)
    return total


def recurrence_average(alpha_T, alpha_S, A: Tuple, a, N, checkpoints=None,
                       tol: float = 0.01, slack: float = 0.005) -> Tuple[ComplexSeries, Verdict]:
    """Mean over ``n`` of ``m(A ∩ T^-n A ∩ S^-[a(n)] A)`` for an arc ``A = [u, v)``.

    ``a=None`` takes the S-time identically 0 (double recurrence).  The
    verdict checks the mean against ``m(A)^3`` (``m(A)^2`` when ``a`` is None):
    within ``tol`` and not below it by more than ``slack``.
    """
    u, v = (float(Fraction(str(t))) for t in A)
    if not 0 <= u < v <= 1:
        raise ValueError("A must be an arc [u, v) with 0 <= u < v <= 1")
    T = TorusSystem.rotation(alpha_T)
    S = TorusSystem.rotation(alpha_S)
    tx = orbit_sample(T, None, [1])
    if a is not None:
        a = as_expr(a)
        _require_case_one(a, "recurrence_average")
        sy = orbit_sample(S, a, [1])
    power = 3 if a is not None else 2

    def values(n):
        x = tx.frac(n)
        y = sy.frac(n) if a is not None else np.zeros(np.shape(n))
        return triple_intersection(u, v, x, y).astype(np.complex128)

    series = cesaro_average(values, _scheme(N, checkpoints))
    val = series.final.real
    bound = (v - u) ** power
    passed = abs(val - bound) <= tol and val >= bound - slack
    params = {"alpha_T": str(T.alpha), "alpha_S": str(S.alpha), "A": [str(t) for t in A],
              "a": str(a) if a is not None else None, "N": series.N[-1]}
    return series, Verdict("recurrence", params, val, bound, tol, passed, {"slack": slack})


# ---------------------------------------------------------------------------
# equidistribution along Beatty sequences
# ---------------------------------------------------------------------------


@dataclass
class WeylReport:
    weyl: Dict[int, complex]        # k -> mean e(k a(b(n)))
    floor_weyl: Dict[int, complex]  # k -> mean e(k [a(b(n))] alpha)
    residues: Dict[int, List[float]]
    N: int

    @property
    def sup(self) -> float:
        return max([abs(z) for z in self.weyl.values()] + [abs(z) for z in self.floor_weyl.values()])

    @property
    def residue_deviation(self) -> float:
        return max(abs(f - 1.0 / q) for q, fs in self.residues.items() for f in fs)

    def to_csv(self) -> str:
        lines = ["kind,k,re,im,abs"]
        for name, tab in (("weyl", self.weyl), ("floor_weyl", self.floor_weyl)):
            for k, z in tab.items():
                lines.append(f"{name},{k},{z.real!r},{z.imag!r},{abs(z)!r}")
        for q, fs in self.residues.items():
            for r, f in enumerate(fs):
                lines.append(f"residue_mod_{q},{r},{f!r},0.0,{f!r}")
        return "\n".join(lines) + "\n"


def equidist_along(a, b: Optional[BeattyTime], alpha, K: int, N: int, max_q: int = 5, tol: float = 0.05,
                   residue_tol: float = 0.01, n_start: int = 2) -> Tuple[WeylReport, Verdict]:
    """Weyl sums of ``a(b(n))`` and ``[a(b(n))] alpha`` and residues of ``[a(b(n))]``."""
    a = as_expr(a)
    _require_case_one(a, "equidist_along", allow_case_two=True)
    alpha = as_real(alpha)
    b_fn = b if b is not None else (lambda n: np.asarray(n, dtype=np.float64))
    floor_a = FloorTime(a)
    ends = [int(N) + 1]

    def times(n):
        return np.asarray(b_fn(n)).astype(np.int64)

    weyl, floor_weyl = {}, {}
    count = int(N) - n_start + 1
    for k in range(1, K + 1):
        ck = ExactCoefficient(k)
        sums = range_sums(lambda lo, hi: kernels.expi(a.frac_array(times(np.arange(lo, hi)), ck)), n_start, ends)
        (sr, er), (si, ei) = sums[0]
        weyl[k] = complex((sr + er) / count, (si + ei) / count)
        kah, kal = (alpha * k).dd
        sums = range_sums(lambda lo, hi: kernels.expi(kernels.int_times_dd_frac(
            floor_a(times(np.arange(lo, hi))), kah, kal)), n_start, ends)
        (sr, er), (si, ei) = sums[0]
        floor_weyl[k] = complex((sr + er) / count, (si + ei) / count)

    qs = list(range(2, max_q + 1))

    def counts(lo_hi):
        lo, hi = lo_hi
        fl = floor_a(times(np.arange(lo, hi))).astype(np.int64)
        return [np.bincount(fl % q, minlength=q) for q in qs]

    bounds = list(range(n_start, int(N) + 1, CHUNK)) + [int(N) + 1]
    parts = pmap(counts, list(zip(bounds[:-1], bounds[1:])))
    residues = {q: [int(c) / count for c in sum(p[i] for p in parts)] for i, q in enumerate(qs)}
    rep = WeylReport(weyl, floor_weyl, residues, int(N))
    passed = rep.sup <= tol and rep.residue_deviation <= residue_tol
    params = {"a": str(a), "b": repr(b) if b is not None else "identity", "alpha": str(alpha), "K": K, "N": int(N)}
    return rep, Verdict("equidist", params, rep.sup, 0.0, tol, passed,
                        {"residue_deviation": rep.residue_deviation, "residue_tolerance": residue_tol})


# ---------------------------------------------------------------------------
# joint F-systems
# ---------------------------------------------------------------------------


def joint_factorization_test(a, alpha, q1: CorrelationQuery, q2: CorrelationQuery, N, tol: float = 0.07,
                             checkpoints=None) -> Tuple[List[ComplexSeries], Verdict]:
    """Joint correlation of ``(e(a(n)), e(alpha a(n)))`` against the product of
    the individual correlations."""
    a = as_expr(a)
    alpha = as_real(alpha)
    if alpha.is_rational:
        raise HypothesisUnmet(f"alpha = {alpha} is rational; the factorization needs alpha irrational")
    _require_case_one(a, "joint_factorization_test")
    s1, s2 = PhaseSource(a), PhaseSource(a, alpha)
    pats = [joint_pattern([q1, q2]), q1.pattern(0), q2.pattern(1)]
    joint, c1, c2 = pattern_series([s1, s2], pats, _scheme(N, checkpoints))
    product = c1.final * c2.final
    dev = abs(joint.final - product)
    params = {"a": str(a), "alpha": str(alpha), "q1": q1.as_dict(), "q2": q2.as_dict(), "N": joint.N[-1]}
    return [joint, c1, c2], Verdict("joint", params, joint.final, product, tol, dev <= tol,
                                    {"deviation": dev})


# ---------------------------------------------------------------------------
# floor sequences
# ---------------------------------------------------------------------------


def floor_crosscheck(a, alpha, n: np.ndarray) -> float:
    """Largest per-term gap between the identity path and the direct
    ``e([a(n)] alpha)`` evaluation."""
    direct = orbit_sample(TorusSystem.rotation(alpha), as_expr(a), [1])(n)
    via = FloorPhaseSource(a, alpha)(n)
    return float(np.max(np.abs(direct - via))) if len(n) else 0.0


def floor_sequence_correlation(a, alpha, q: CorrelationQuery, N: int, tol: float = 0.05,
                               sample: int = 4096) -> Tuple[ComplexSeries, Verdict]:
    """Correlation of ``e([a(n)] alpha)``; the verdict is the convergence
    diagnostic ``|value(N) - value(N/10)| <= tol`` plus the per-term
    cross-check of the two evaluation paths (``<= 1e-12``)."""
    a = as_expr(a)
    _require_case_one(a, "floor_sequence_correlation")
    N = int(N)
    tenth = max(N // 10, 10)
    cps = sorted(set(powers_of(2.0, N) + [tenth])) if N >= 1024 else sorted({tenth, N})
    src = FloorPhaseSource(a, alpha)
    series = pattern_series([src], [q.pattern()], _scheme(N, cps))[0]
    n = np.unique(np.linspace(max(a.n_start, 2), N, sample).astype(np.int64))
    gap = floor_crosscheck(a, alpha, n)
    drift = abs(series.final - series.at(tenth))
    params = {"a": str(a), "alpha": str(as_real(alpha)), "query": q.as_dict(), "N": N}
    return series, Verdict("floorseq", params, series.final, series.at(tenth), tol,
                           drift <= tol and gap <= 1e-12, {"drift": drift, "crosscheck": gap})
