"""The acceptance suite: twelve numbered checks, one PASS/FAIL line each.

Each criterion function returns a :class:`CriterionResult`; the numbers it
reports are stored in ``detail`` so job outputs can archive them.  Nothing
here relaxes a threshold: a check that does not hold is reported as FAIL.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from . import _parallel
from ._parallel import set_threads
from .correlation import CorrelationQuery, empirical_correlation, exhaustive_queries
from .errors import FloorUndecidable, HypothesisUnmet
from .experiments import (equidist_along, multi_ergodic_average, oracle_comparison, ortho_test,
                          recurrence_average, sst_invariance)
from .hardy import Classification, ExactCoefficient, classify, eval_frac, parse
from .measures import (concentration_test, density_bound_check, derivative_sequence, find_checkpoint_times,
                       lambda_from_expr, uniformity_test)
from .oracle import (MeasureSpec, binom_condition, model_reconciliation, power_sum_condition,
                     predict_correlation)
from .systems import BeattyTime, WeightSpec, floor_time

N_FULL = 10**7
N_RECURRENCE = 10**6

EXPRS = ["t^(3/2)", "t*log(t)", "t*log(t)^(1/2)", "sqrt2*t^2 + t^(3/2)", "1/2*t^2 + t^(2/3)"]
EXPECTED_CASES = [("I", 1), ("II", 1), ("III", 1), ("IV", 2), ("V", None)]

SECOND_DIFF = CorrelationQuery((2, 1, 1, 0), (1, -1, -1, 1))
FIRST_DIFF = CorrelationQuery((1, 0), (1, -1))
ROTATION_SOURCE = {"system": {"kind": "rotation", "alpha": "sqrt2", "y": "0"}, "time": "t^(3/2)", "freqs": [1]}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.title}: {self.summary}"

    def as_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "pass": self.passed,
                "summary": self.summary, "detail": self.detail}


class Suite:
    """Holds shared intermediate results (item 5's table feeds item 12)."""

    def __init__(self, N: int = N_FULL, n_recurrence: int = N_RECURRENCE, thread_pair=(1, 8)):
        self.N = int(N)
        self.n_recurrence = int(n_recurrence)
        self.thread_pair = tuple(thread_pair)
        self._item5: Dict[int, object] = {}
        self._queries = None

    @property
    def queries(self) -> List[CorrelationQuery]:
        if self._queries is None:
            self._queries = exhaustive_queries(4, 5)
        return self._queries

    def item5_table(self, threads: int):
        if threads not in self._item5:
            old = _parallel._threads
            set_threads(threads)
            try:
                self._item5[threads] = oracle_comparison("t^(3/2)", self.queries, self.N)
            finally:
                set_threads(old)
        return self._item5[threads]

    # -- 1 -----------------------------------------------------------------
    def c1(self) -> CriterionResult:
        got = []
        ok = True
        for text, (case, d) in zip(EXPRS, EXPECTED_CASES):
            cls = classify(parse(text))
            got.append(cls.as_dict())
            if case == "V":
                good = (cls.case_id == "V" and cls.modulus == 2 and cls.inner is not None
                        and cls.inner.case_id == "I" and cls.inner.d == 0)
            else:
                good = cls.case_id == case and cls.d == d
            ok &= good
        summary = ", ".join(f"{c['case']}(d={c['d']})" for c in got)
        return CriterionResult(1, "classification table", ok, summary, {"classes": got})

    # -- 2 -----------------------------------------------------------------
    def c2(self) -> CriterionResult:
        mismatch, scaled_bad, both, total = 0, 0, 0, 0
        for q in self.queries:
            for d in range(0, 5):
                total += 1
                p = power_sum_condition(q, d)
                b = binom_condition(q, d)
                if p.vanishes != b.vanishes:
                    mismatch += 1
                elif p.vanishes:
                    both += 1
                    if b.value != Fraction(p.value, math.factorial(d)):
                        scaled_bad += 1
        ok = mismatch == 0 and scaled_bad == 0
        return CriterionResult(2, "condition equivalence + scaling", ok,
                               f"{total} (query, d) cases, {both} vanishing, {mismatch} equivalence "
                               f"mismatches, {scaled_bad} scaling mismatches",
                               {"cases": total, "vanishing": both, "mismatches": mismatch, "scaling": scaled_bad})

    # -- 3 -----------------------------------------------------------------
    def c3(self) -> CriterionResult:
        worst, bad, total = 0.0, 0, 0
        lams = [(MeasureSpec.uniform(), "I", None), (MeasureSpec.point_mass("sqrt2"), "IV", ExactCoefficient.of("sqrt2"))]
        for lam, case, alpha in lams:
            for d in range(0, 4):
                cls = Classification(case, d, alpha=alpha)
                for q in self.queries:
                    r = model_reconciliation(cls, lam, q)
                    total += 1
                    gap = abs(r.power_sum - r.unipotent)
                    worst = max(worst, gap)
                    bad += not r.match
        return CriterionResult(3, "oracle reconciliation", bad == 0,
                               f"{total} comparisons, max gap {worst:.3g}, {bad} above 1e-12",
                               {"comparisons": total, "max_gap": worst, "failures": bad})

    # -- 4 -----------------------------------------------------------------
    def c4(self) -> CriterionResult:
        a = parse("sqrt2*t^2")
        series = empirical_correlation(_phase(a), SECOND_DIFF, self.N)
        target = complex(np.exp(2j * np.pi * (2 * math.sqrt(2) % 1.0)))
        gaps = [abs(v - target) for n, v in zip(series.N, series.values) if n >= 1000]
        cls = classify(a)
        pred = predict_correlation(cls, MeasureSpec.point_mass("sqrt2"), SECOND_DIFF)
        pred_gap = abs(pred - target)
        ok = max(gaps) <= 1e-9 and pred_gap <= 1e-12
        return CriterionResult(4, "exact constant-phase correlation", ok,
                               f"max empirical gap {max(gaps):.3g} over {len(gaps)} checkpoints, "
                               f"oracle gap {pred_gap:.3g}",
                               {"empirical_gap": max(gaps), "oracle_gap": pred_gap, "checkpoints": len(gaps)})

    # -- 5 -----------------------------------------------------------------
    def c5(self) -> CriterionResult:
        tab = self.item5_table(self.thread_pair[0])
        dev = tab.deviation
        i = int(np.argmax(dev))
        weyl = [j for j, q in enumerate(tab.queries) if len(q.shifts) == 1 and q.signs[0] == 1 and q.shifts[0] == 0]
        weyl_abs = float(abs(tab.empirical[weyl[0]]))
        over = int((dev > 0.05).sum())
        ok = float(dev.max()) <= 0.05 and weyl_abs <= 0.05
        return CriterionResult(5, "case-I correlations vs oracle", ok,
                               f"{len(tab.queries)} queries, max |emp - pred| {dev.max():.4f} at {tab.queries[i]}, "
                               f"{over} above 0.05; Weyl mean {weyl_abs:.4f}",
                               {"queries": len(tab.queries), "max_deviation": float(dev.max()),
                                "worst_query": str(tab.queries[i]), "above_tolerance": over,
                                "weyl_mean": weyl_abs, "N": self.N})

    # -- 6 -----------------------------------------------------------------
    def c6(self) -> CriterionResult:
        r_values = [1, 2, 3]
        res_a, v_a = sst_invariance("t^(3/2)", self.queries, r_values, self.N)
        res_b, v_b = sst_invariance(ROTATION_SOURCE, self.queries, r_values, self.N)
        _, v_neg = sst_invariance("sqrt2*t^2", [FIRST_DIFF], [1, 2], self.N, tol=0.1, expect_invariant=False)
        _, v_neg2 = sst_invariance("sqrt2*t^2", [SECOND_DIFF], [1, 2], self.N, tol=0.1, expect_invariant=False)
        ok = v_a.passed and v_b.passed and v_neg.passed
        summary = (f"e(n^(3/2)) max dev {v_a.value:.4f} at {v_a.extra['worst_query']}; "
                   f"rotation sqrt2 at [n^(3/2)] max dev {v_b.value:.4f} at {v_b.extra['worst_query']}; "
                   f"control e(sqrt2 n^2) {FIRST_DIFF} gap {v_neg.value:.3g} (need >= 0.1), "
                   f"{SECOND_DIFF} gap {v_neg2.value:.3f}")
        return CriterionResult(6, "strong stationarity", ok, summary,
                               {"phase": v_a.as_dict(), "rotation": v_b.as_dict(),
                                "control": v_neg.as_dict(), "control_second_difference": v_neg2.as_dict()})

    # -- 7 -----------------------------------------------------------------
    def c7(self) -> CriterionResult:
        (_, m1), = lambda_from_expr("t^(3/2)", [self.N], B=1024, K=5)
        uni = uniformity_test(m1, 5, 0.05)
        top = int(math.floor(math.log(self.N)))
        lad_a = [round(math.exp(k)) for k in range(3, top + 1) if math.exp(k) <= self.N]
        lad_b = [round(math.exp(k + 0.5)) for k in range(3, top + 1) if math.exp(k + 0.5) <= self.N]
        ma = lambda_from_expr("t*log(t)", lad_a, B=1024, K=4)[-1][1]
        mb = lambda_from_expr("t*log(t)", lad_b, B=1024, K=4)[-1][1]
        gap = abs(ma.hat(1) - mb.hat(1))
        da, db = density_bound_check(ma, 2.0), density_bound_check(mb, 2.0)
        a3 = parse("t*log(t)^(1/2)")
        c3, _ = derivative_sequence(a3)
        hits = find_checkpoint_times(c3, 0.5, 0.01, 40)
        (_, m3), = lambda_from_expr(a3, [hits[-1]], B=256, K=4)
        mass = concentration_test(m3, 0.5, 0.05)
        ok = uni.passed and gap >= 0.05 and da.passed and db.passed and mass >= 0.9
        summary = (f"t^(3/2) max|hat| {uni.value:.4f} (k={uni.worst}); t log t ladders |diff hat(1)| {gap:.3f}, "
                   f"density ratios {da.value:.3f}/{db.value:.3f}; case III mass {mass:.3f} "
                   f"at hit 40 (log N = {_log_int(hits[-1]):.1f})")
        return CriterionResult(7, "limit measures", ok, summary,
                               {"uniform_max_hat": uni.value, "ladder_gap": gap, "density_a": da.value,
                                "density_b": db.value, "case3_mass": mass, "case3_log_N": _log_int(hits[-1])})

    # -- 8 -----------------------------------------------------------------
    def c8(self) -> CriterionResult:
        weights = [WeightSpec.exp_linear("sqrt3"), WeightSpec.exp_quadratic("sqrt3"), WeightSpec.bernoulli(0),
                   WeightSpec.riemann_sample("phi", 0, Fraction(1, 2))]
        vals = []
        for w in weights:
            _, v = ortho_test("t^(3/2)", w, self.N, tol=0.05)
            vals.append(abs(v.value))
        try:
            ortho_test("t*log(t)^(1/2)", WeightSpec.one(), 1000)
            refused = False
        except HypothesisUnmet:
            refused = True
        ok = max(vals) <= 0.05 and refused
        summary = ", ".join(f"{w.kind} {x:.4f}" for w, x in zip(weights, vals))
        return CriterionResult(8, "orthogonality", ok, f"{summary}; case III refused: {refused}",
                               {"means": dict(zip([w.kind for w in weights], vals)), "refused": refused})

    # -- 9 -----------------------------------------------------------------
    def c9(self) -> CriterionResult:
        _, mv = multi_ergodic_average("phi", "sqrt2", 1, 1, "t^(3/2)", self.N, tol=0.02)
        _, r3 = recurrence_average("phi", "sqrt2", ("0", "1/3"), "t^(3/2)", self.n_recurrence)
        _, r2 = recurrence_average("phi", "sqrt2", ("0", "1/2"), "t^(3/2)", self.n_recurrence)
        ok = mv.passed and r3.passed and r2.passed
        summary = (f"|mean| {abs(mv.value):.4f}; A=[0,1/3) {r3.value:.5f} vs {r3.reference:.5f}; "
                   f"A=[0,1/2) {r2.value:.5f} vs {r2.reference:.5f}")
        return CriterionResult(9, "multiple ergodic average + recurrence", ok, summary,
                               {"multiavg": mv.as_dict(), "recurrence_third": r3.as_dict(),
                                "recurrence_half": r2.as_dict()})

    # -- 10 ----------------------------------------------------------------
    def c10(self) -> CriterionResult:
        rep, v = equidist_along("t^(3/2)", BeattyTime("phi", 0), "sqrt2", 3, self.N)
        ok = v.passed
        return CriterionResult(10, "equidistribution along Beatty", ok,
                               f"Weyl sup {rep.sup:.4f}, residue deviation {rep.residue_deviation:.5f}",
                               {"sup": rep.sup, "residue_deviation": rep.residue_deviation})

    # -- 11 ----------------------------------------------------------------
    def c11(self, samples: int = 10**4, seed: int = 20240611) -> CriterionResult:
        rng = np.random.default_rng(seed)
        ns = rng.integers(2, 10**8 + 1, size=samples)
        worst_err, violations, undecided = 0.0, 0, 0
        for text in EXPRS:
            e = parse(text)
            for n in ns.tolist():
                f1, e1 = eval_frac(e, n, 128)
                f2, e2 = eval_frac(e, n, 256)
                worst_err = max(worst_err, e1)
                gap = abs((f1 - f2 + 0.5) % 1.0 - 0.5)
                if e1 > 1e-10 or gap > e1 + e2:
                    violations += 1
                try:
                    floor_time(e, n)
                except FloorUndecidable:
                    undecided += 1
        ok = violations == 0 and undecided == 0
        return CriterionResult(11, "precision", ok,
                               f"{samples * len(EXPRS)} evaluations, max reported error {worst_err:.3g}, "
                               f"{violations} violations, {undecided} undecidable floors",
                               {"evaluations": samples * len(EXPRS), "max_error": worst_err,
                                "violations": violations, "undecidable": undecided})

    # -- 12 ----------------------------------------------------------------
    def c12(self) -> CriterionResult:
        t1, t8 = self.thread_pair
        csv1 = self.item5_table(t1).to_csv()
        csv8 = self.item5_table(t8).to_csv()
        same = csv1.encode() == csv8.encode()
        return CriterionResult(12, "determinism", same,
                               f"item-5 CSV with {t1} and {t8} threads: {'bitwise identical' if same else 'DIFFERENT'} "
                               f"({len(csv1)} bytes)", {"bytes": len(csv1), "identical": same})

    def criteria(self) -> Dict[int, Callable[[], CriterionResult]]:
        return {i: getattr(self, f"c{i}") for i in range(1, 13)}


def _phase(a):
    from .averaging import PhaseSource
    return PhaseSource(a)


def _log_int(n: int) -> float:
    b = n.bit_length()
    if b < 1000:
        return math.log(n)
    return math.log(n >> (b - 64)) + (b - 64) * math.log(2)


def run_acceptance(select: Optional[List[int]] = None, suite: Optional[Suite] = None,
                   stream=sys.stdout) -> List[CriterionResult]:
    suite = suite or Suite()
    results = []
    for i, fn in suite.criteria().items():
        if select and i not in select:
            continue
        t = time.perf_counter()
        try:
            r = fn()
        except Exception as exc:  # a crash is a failure of that criterion, not of the suite
            r = CriterionResult(i, fn.__name__, False, f"error: {type(exc).__name__}: {exc}")
        r.seconds = time.perf_counter() - t
        results.append(r)
        print(r.line(), file=stream, flush=True)
    passed = sum(r.passed for r in results)
    print(f"acceptance: {passed}/{len(results)} criteria pass", file=stream, flush=True)
    return results


def main(argv=None) -> int:
    import argparse
    p = argparse.ArgumentParser(prog="python -m flab.acceptance", description="Run the acceptance criteria.")
    p.add_argument("criteria", nargs="*", type=int, help="criterion numbers (default: all)")
    p.add_argument("--threads", type=int, default=0)
    args = p.parse_args(argv)
    set_threads(args.threads)
    results = run_acceptance(args.criteria or None)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
