"""Command-line job runner.

A job is a JSON object naming a ``task`` and its parameters::

    flab --job job.json --out results/ --threads 0 --precision-bits 128

Outputs in ``--out``: ``results.json`` (records and verdicts; no timings or
thread counts, so it is byte-identical across reruns), one CSV per series
and ``manifest.json``.  Exit codes: 0 all verdicts pass, 1 error or failed
verdict, 2 hypothesis refusal, 3 job file invalid (with the offending line).
Without ``--job`` the task catalog is printed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

import jsonschema

from . import __version__
from ._parallel import set_threads
from .averaging import AveragingScheme, PhaseSource
from .correlation import (CorrelationQuery, exhaustive_queries, pattern_series, summary_record)
from .errors import HypothesisUnmet
from .experiments import (equidist_along, floor_sequence_correlation, joint_factorization_test, make_source,
                          multi_ergodic_average, oracle_comparison, ortho_test, recurrence_average,
                          sst_invariance)
from .hardy import DEFAULT_PRECISION, Classification, ExactCoefficient, classify, eval_frac, parse
from .measures import (concentration_test, density_bound_check, derivative_sequence, find_checkpoint_times,
                       lambda_from_expr, uniformity_test)
from .oracle import MeasureSpec, default_lambda, model_reconciliation, prediction_record
from .systems import BeattyTime, WeightSpec

EXIT_OK, EXIT_ERROR, EXIT_REFUSED, EXIT_SCHEMA = 0, 1, 2, 3

# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_INT = {"type": "integer"}
_POS = {"type": "integer", "minimum": 1}
_N = {"type": "integer", "minimum": 10, "maximum": 10**9}
_NUM = {"type": "number"}
_TOL = {"type": "number", "exclusiveMinimum": 0}
_REAL = {"oneOf": [{"type": "string"}, {"type": "integer"}, {"type": "number"}]}
_EXPR = {"type": "string", "minLength": 1}
_QUERY = {
    "type": "object",
    "required": ["shifts", "signs"],
    "properties": {
        "shifts": {"type": "array", "items": _INT, "minItems": 1, "maxItems": 8},
        "signs": {"type": "array", "items": {"enum": [1, -1]}, "minItems": 1, "maxItems": 8},
        "dilation": _POS,
    },
    "additionalProperties": False,
}
_QUERIES = {
    "oneOf": [
        {"type": "array", "items": _QUERY, "minItems": 1},
        {"type": "object", "required": ["exhaustive"], "additionalProperties": False,
         "properties": {"exhaustive": {"type": "object", "additionalProperties": False,
                                       "properties": {"max_s": {"type": "integer", "minimum": 1, "maximum": 8},
                                                      "max_shift": {"type": "integer", "minimum": 0,
                                                                    "maximum": 64}}}}},
    ]
}
_WEIGHT = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": list(WeightSpec.KINDS)},
        "alpha": _REAL, "beta": _REAL, "seed": {"type": "integer", "minimum": 0},
        "interval": {"type": "array", "items": _REAL, "minItems": 2, "maxItems": 2},
        "expr": _EXPR,
    },
    "additionalProperties": False,
}
_SYSTEM = {"type": "object", "required": ["kind"], "properties": {"kind": {"enum": ["rotation", "product", "unipotent"]}}}
_SOURCE = {
    "oneOf": [
        _EXPR,
        {"type": "object", "required": ["expr"], "additionalProperties": False,
         "properties": {"expr": _EXPR, "scale": _REAL}},
        {"type": "object", "required": ["system"], "additionalProperties": False,
         "properties": {"system": _SYSTEM, "time": {"type": ["string", "null"]},
                        "freqs": {"type": "array", "items": _INT}}},
        {"type": "object", "required": ["weight"], "additionalProperties": False, "properties": {"weight": _WEIGHT}},
    ]
}
_LAMBDA = {"type": "object", "required": ["kind"],
           "properties": {"kind": {"enum": ["uniform", "point_mass", "fourier_table"]},
                          "alpha": _REAL, "table": {"type": "object"}}}
_CHECKPOINTS = {"type": "array", "items": _N, "minItems": 1}

_COMMON = {"task": {"type": "string"}, "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
           "precision_bits": {"type": "integer", "minimum": 64, "maximum": 4096},
           "n_start": {"type": "integer", "minimum": 2}, "name": {"type": "string"},
           "description": {"type": "string"}}


def _task(required, props, doc):
    return {"doc": doc, "schema": {"type": "object", "required": ["task"] + required,
                                   "properties": {**_COMMON, **props}, "additionalProperties": False}}


TASKS: Dict[str, dict] = {
    "classify": _task(["expr"], {"expr": _EXPR}, "case I-V of an expression"),
    "eval": _task(["expr", "n"], {"expr": _EXPR, "n": {"oneOf": [_POS, {"type": "array", "items": _POS}]}},
                  "{a(n)} with a rigorous error bound"),
    "correlate": _task(["N"], {"expr": _EXPR, "source": _SOURCE, "shifts": _QUERY["properties"]["shifts"],
                               "signs": _QUERY["properties"]["signs"], "dilation": _POS, "queries": _QUERIES,
                               "N": _N, "checkpoints": _CHECKPOINTS,
                               "expect": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                               "tolerance": _TOL},
                       "empirical correlations of a sequence"),
    "predict": _task(["expr"], {"expr": _EXPR, "shifts": _QUERY["properties"]["shifts"],
                                "signs": _QUERY["properties"]["signs"], "dilation": _POS, "queries": _QUERIES,
                                "lambda": _LAMBDA}, "oracle correlation prediction"),
    "reconcile": _task(["expr"], {"expr": _EXPR, "shifts": _QUERY["properties"]["shifts"],
                                  "signs": _QUERY["properties"]["signs"], "dilation": _POS,
                                  "queries": _QUERIES, "lambda": _LAMBDA},
                       "power-sum prediction vs unipotent model"),
    "measure": _task(["expr"], {"expr": _EXPR, "N": _N, "checkpoints": {"type": "array", "items": _POS},
                                "ladder": {"type": "object", "required": ["k"], "additionalProperties": False,
                                           "properties": {"k": {"type": "array", "items": _INT, "minItems": 2,
                                                                "maxItems": 2}, "offset": _NUM}},
                                "hits": {"type": "object", "required": ["alpha", "eps", "count"],
                                         "additionalProperties": False,
                                         "properties": {"alpha": _NUM, "eps": _TOL, "count": _POS}},
                                "B": {"type": "integer", "minimum": 8, "maximum": 65536},
                                "K": {"type": "integer", "minimum": 1, "maximum": 64},
                                "uniformity": {"type": "object", "required": ["K", "tol"],
                                               "properties": {"K": _POS, "tol": _TOL}},
                                "density": {"type": "object", "required": ["C"], "properties": {"C": _TOL}},
                                "concentration": {"type": "object", "required": ["alpha", "window", "min_mass"],
                                                  "properties": {"alpha": _NUM, "window": _TOL,
                                                                 "min_mass": _NUM}}},
                     "empirical limit measure of a^(d)(n)/d! mod 1"),
    "sst": _task(["source", "queries", "r_values", "N"],
                 {"source": _SOURCE, "queries": _QUERIES, "r_values": {"type": "array", "items": _POS, "minItems": 2},
                  "N": _N, "tolerance": _TOL, "expect_invariant": {"type": "boolean"}},
                 "dilation invariance of correlations"),
    "ortho": _task(["expr", "weight", "N"], {"expr": _EXPR, "weight": _WEIGHT, "N": _N, "tolerance": _TOL,
                                             "alpha": _REAL, "checkpoints": _CHECKPOINTS},
                   "orthogonality of e(a(n)) to a weight"),
    "multiavg": _task(["alpha_T", "alpha_S", "f", "g", "expr", "N"],
                      {"alpha_T": _REAL, "alpha_S": _REAL, "f": _INT, "g": _INT, "expr": _EXPR, "N": _N,
                       "tolerance": _TOL}, "mean of f(T^n 0) g(S^[a(n)] 0)"),
    "recurrence": _task(["alpha_T", "alpha_S", "A", "N"],
                        {"alpha_T": _REAL, "alpha_S": _REAL, "A": {"type": "array", "items": _REAL, "minItems": 2,
                                                                   "maxItems": 2},
                         "expr": {"type": ["string", "null"]}, "N": _N, "tolerance": _TOL, "slack": _TOL},
                        "mean measure of A ∩ T^-n A ∩ S^-[a(n)] A"),
    "equidist": _task(["expr", "alpha", "K", "N"],
                      {"expr": _EXPR, "beatty": {"oneOf": [{"type": "null"},
                                                           {"type": "object", "required": ["alpha"],
                                                            "additionalProperties": False,
                                                            "properties": {"alpha": _REAL, "beta": _REAL}}]},
                       "alpha": _REAL, "K": {"type": "integer", "minimum": 1, "maximum": 64}, "N": _N,
                       "max_q": {"type": "integer", "minimum": 2, "maximum": 64},
                       "tolerance": _TOL, "residue_tolerance": _TOL},
                      "Weyl sums and residues of a along a Beatty sequence"),
    "joint": _task(["expr", "alpha", "q1", "q2", "N"],
                   {"expr": _EXPR, "alpha": _REAL, "q1": _QUERY, "q2": _QUERY, "N": _N, "tolerance": _TOL},
                   "joint correlation of e(a(n)), e(alpha a(n)) vs product"),
    "floorseq": _task(["expr", "alpha", "shifts", "signs", "N"],
                      {"expr": _EXPR, "alpha": _REAL, "shifts": _QUERY["properties"]["shifts"],
                       "signs": _QUERY["properties"]["signs"], "dilation": _POS, "N": _N, "tolerance": _TOL},
                      "correlations of e([a(n)] alpha)"),
    "acceptance": _task([], {"criteria": {"type": "array", "items": {"type": "integer", "minimum": 1,
                                                                      "maximum": 12}}},
                        "the twelve acceptance criteria"),
}

BASE_SCHEMA = {"type": "object", "required": ["task"],
               "properties": {"task": {"enum": sorted(TASKS)}}}


def list_tasks() -> Dict[str, dict]:
    """Task name -> ``{"doc", "schema"}``."""
    return {name: {"doc": t["doc"], "schema": t["schema"]} for name, t in TASKS.items()}


# ---------------------------------------------------------------------------
# validation with source positions
# ---------------------------------------------------------------------------


class JobError(Exception):
    """Invalid job file; ``str`` is a ``file:line: message`` diagnostic."""


def _positions(text: str) -> Dict[tuple, int]:
    """Map each JSON path (tuple of keys/indices) to the line its value starts on."""
    dec = json.JSONDecoder()
    out: Dict[tuple, int] = {}

    def ws(i):
        while i < len(text) and text[i] in " \t\r\n":
            i += 1
        return i

    def value(i, path):
        i = ws(i)
        out[path] = text.count("\n", 0, i) + 1
        if text[i] == "{":
            i = ws(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                i = ws(i)
                key, i = json.decoder.scanstring(text, i + 1)
                i = ws(i)
                i = value(i + 1, path + (key,))  # skip ':'
                i = ws(i)
                if text[i] == "}":
                    return i + 1
                i += 1  # ','
        if text[i] == "[":
            i = ws(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = value(i, path + (k,))
                i = ws(i)
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        _, end = dec.raw_decode(text, i)
        return end

    value(0, ())
    return out


def load_job(path) -> dict:
    """Parse and validate a job file, raising JobError with a line number."""
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise JobError(f"{path}: cannot read job file: {exc.strerror}") from None
    try:
        job = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JobError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validate_job(job, text, path)
    return job


def validate_job(job, text: Optional[str] = None, path: str = "<job>") -> None:
    text = text if text is not None else json.dumps(job, indent=2)
    pos = _positions(text)

    def fail(err: jsonschema.ValidationError):
        p = tuple(err.absolute_path)
        while p not in pos and p:
            p = p[:-1]
        where = "/".join(str(x) for x in err.absolute_path) or "(top level)"
        raise JobError(f"{path}:{pos.get(p, 1)}: {where}: {err.message}")

    if not isinstance(job, dict):
        raise JobError(f"{path}:1: a job must be a JSON object")
    for schema in (BASE_SCHEMA, TASKS.get(job.get("task"), {}).get("schema")):
        if schema is None:
            continue
        err = jsonschema.exceptions.best_match(jsonschema.Draft202012Validator(schema).iter_errors(job))
        if err is not None:
            fail(err)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


@dataclass
class Outcome:
    records: List[dict] = field(default_factory=list)
    verdicts: List[dict] = field(default_factory=list)
    csv: Dict[str, str] = field(default_factory=dict)


@dataclass
class Context:
    precision_bits: int
    n_start: int
    seed: int


def _query(d: dict) -> CorrelationQuery:
    return CorrelationQuery(tuple(d["shifts"]), tuple(d["signs"]), d.get("dilation", 1))


def _queries(job: dict) -> List[CorrelationQuery]:
    q = job.get("queries")
    if q is None:
        if "shifts" not in job:
            raise ValueError("give either shifts/signs or queries")
        return [_query(job)]
    if isinstance(q, dict):
        ex = q["exhaustive"]
        return exhaustive_queries(ex.get("max_s", 4), ex.get("max_shift", 5))
    return [_query(x) for x in q]


def _weight(d: dict, ctx: Context) -> WeightSpec:
    if d["kind"] == "bernoulli" and "seed" not in d:
        d = {**d, "seed": ctx.seed}
    return WeightSpec.from_dict(d)


def _source(spec, ctx: Context):
    if isinstance(spec, dict) and "weight" in spec:
        return _weight(spec["weight"], ctx)
    return make_source(spec)


def _scheme(job: dict, ctx: Context) -> AveragingScheme:
    return AveragingScheme.full(job["N"], checkpoints=job.get("checkpoints"), n_start=ctx.n_start)


def _series_csv(series) -> str:
    return series.to_csv()


def _task_classify(job, ctx):
    cls = classify(parse(job["expr"]))
    return Outcome(records=[{"expr": job["expr"], **cls.as_dict()}])


def _task_eval(job, ctx):
    e = parse(job["expr"])
    ns = job["n"] if isinstance(job["n"], list) else [job["n"]]
    recs = []
    for n in ns:
        f, err = eval_frac(e, n, ctx.precision_bits)
        recs.append({"n": n, "frac": f, "err": err})
    return Outcome(records=recs)


def _task_correlate(job, ctx):
    src = _source(job.get("source", job.get("expr")), ctx) if ("source" in job or "expr" in job) else None
    if src is None:
        raise ValueError("correlate needs expr or source")
    qs = _queries(job)
    series = pattern_series([src], [q.pattern() for q in qs], _scheme(job, ctx))
    out = Outcome(records=[summary_record(q, s) for q, s in zip(qs, series)])
    for i, s in enumerate(series):
        out.csv[f"correlation_{i:04d}.csv"] = _series_csv(s)
    if "expect" in job:
        tol = job.get("tolerance", 1e-9)
        target = complex(*job["expect"])
        v = series[0].final
        out.verdicts.append({"experiment": "correlate", "params": {"query": qs[0].as_dict(), "N": job["N"]},
                             "value": {"re": v.real, "im": v.imag, "abs": abs(v)},
                             "reference": {"re": target.real, "im": target.imag, "abs": abs(target)},
                             "tolerance": tol, "pass": abs(v - target) <= tol})
    return out


def _lambda_for(job, cls: Classification) -> MeasureSpec:
    if "lambda" in job:
        return MeasureSpec.from_dict(job["lambda"])
    try:
        return default_lambda(cls)
    except ValueError:
        raise HypothesisUnmet(f"case {cls.case_id} needs an explicit lambda (a measure task's Fourier table)") from None


def _oracle_class(job) -> Classification:
    cls = classify(parse(job["expr"]))
    if cls.case_id not in ("I", "II", "III", "IV"):
        raise HypothesisUnmet(f"case {cls.case_id}: predictions cover cases I-IV; reduce a case V expression "
                              f"to arithmetic progressions modulo {cls.modulus} first")
    return cls


def _task_predict(job, ctx):
    cls = _oracle_class(job)
    lam = _lambda_for(job, cls)
    return Outcome(records=[prediction_record(cls, lam, q) for q in _queries(job)])


def _task_reconcile(job, ctx):
    cls = _oracle_class(job)
    lam = _lambda_for(job, cls)
    recs, ok = [], True
    for q in _queries(job):
        r = model_reconciliation(cls, lam, q)
        ok &= r.match
        recs.append({"query": q.as_dict(), "power_sum": [r.power_sum.real, r.power_sum.imag],
                     "unipotent": [r.unipotent.real, r.unipotent.imag], "match": r.match})
    verdict = {"experiment": "reconcile", "params": {"expr": job["expr"], "queries": len(recs)},
               "value": sum(r["match"] for r in recs), "reference": len(recs), "tolerance": 1e-12, "pass": ok}
    return Outcome(records=recs, verdicts=[verdict])


def _task_measure(job, ctx):
    a = parse(job["expr"])
    B, K = job.get("B", 1024), job.get("K", 16)
    if "hits" in job:
        h = job["hits"]
        c, _ = derivative_sequence(a)
        cps = find_checkpoint_times(c, h["alpha"], h["eps"], h["count"], n_start=ctx.n_start)[-1:]
    elif "ladder" in job:
        k0, k1 = job["ladder"]["k"]
        off = job["ladder"].get("offset", 0.0)
        cps = sorted({round(math.exp(k + off)) for k in range(k0, k1 + 1)})
    elif "checkpoints" in job:
        cps = job["checkpoints"]
    elif "N" in job:
        cps = [job["N"]]
    else:
        raise ValueError("measure needs N, checkpoints, ladder or hits")
    ms = lambda_from_expr(a, cps, B=B, K=K, n_start=ctx.n_start)
    out = Outcome()
    for n, m in ms:
        out.records.append({"N": str(n) if n >= 2**53 else n, "route": m.route, "fourier_err": m.fourier_err,
                            "hat": [[m.hat(k).real, m.hat(k).imag] for k in range(1, m.K + 1)]})
    n, m = ms[-1]
    out.csv["histogram.csv"] = m.histogram_csv()
    out.csv["fourier.csv"] = m.fourier_csv()
    params = {"expr": job["expr"], "N": str(n), "B": B, "K": K}
    if "uniformity" in job:
        u = job["uniformity"]
        t = uniformity_test(m, u["K"], u["tol"])
        out.verdicts.append({"experiment": "uniformity", "params": params, "value": t.value, "reference": 0.0,
                             "tolerance": u["tol"], "pass": t.passed})
    if "density" in job:
        t = density_bound_check(m, job["density"]["C"])
        out.verdicts.append({"experiment": "density_bound", "params": params, "value": t.value,
                             "reference": job["density"]["C"], "tolerance": job["density"]["C"],
                             "pass": t.passed})
    if "concentration" in job:
        c = job["concentration"]
        mass = concentration_test(m, c["alpha"], c["window"])
        out.verdicts.append({"experiment": "concentration", "params": {**params, "alpha": c["alpha"],
                                                                          "window": c["window"]},
                             "value": mass, "reference": c["min_mass"], "tolerance": c["window"],
                             "pass": mass >= c["min_mass"]})
    return out


def _task_sst(job, ctx):
    res, v = sst_invariance(job["source"], _queries(job), job["r_values"], _scheme(job, ctx),
                            tol=job.get("tolerance", 0.05), expect_invariant=job.get("expect_invariant", True))
    return Outcome(verdicts=[v.as_dict()], csv={"sst_deviation.csv": res.to_csv()})


def _task_ortho(job, ctx):
    series, v = ortho_test(parse(job["expr"]), _weight(job["weight"], ctx), _scheme(job, ctx),
                           tol=job.get("tolerance", 0.05), alpha=job.get("alpha"))
    return Outcome(verdicts=[v.as_dict()], csv={"ortho.csv": series.to_csv()})


def _task_multiavg(job, ctx):
    series, v = multi_ergodic_average(job["alpha_T"], job["alpha_S"], job["f"], job["g"], parse(job["expr"]),
                                      _scheme(job, ctx), tol=job.get("tolerance", 0.02))
    return Outcome(verdicts=[v.as_dict()], csv={"multiavg.csv": series.to_csv()})


def _task_recurrence(job, ctx):
    expr = job.get("expr")
    series, v = recurrence_average(job["alpha_T"], job["alpha_S"], tuple(str(x) for x in job["A"]),
                                   parse(expr) if expr else None, _scheme(job, ctx),
                                   tol=job.get("tolerance", 0.01), slack=job.get("slack", 0.005))
    return Outcome(verdicts=[v.as_dict()], csv={"recurrence.csv": series.to_csv()})


def _task_equidist(job, ctx):
    b = job.get("beatty")
    bt = BeattyTime(b["alpha"], b.get("beta", 0)) if b else None
    rep, v = equidist_along(parse(job["expr"]), bt, job["alpha"], job["K"], job["N"], max_q=job.get("max_q", 5),
                            tol=job.get("tolerance", 0.05), residue_tol=job.get("residue_tolerance", 0.01),
                            n_start=ctx.n_start)
    return Outcome(verdicts=[v.as_dict()], csv={"equidist.csv": rep.to_csv()})


def _task_joint(job, ctx):
    series, v = joint_factorization_test(parse(job["expr"]), job["alpha"], _query(job["q1"]), _query(job["q2"]),
                                         _scheme(job, ctx), tol=job.get("tolerance", 0.07))
    names = ["joint.csv", "factor1.csv", "factor2.csv"]
    return Outcome(verdicts=[v.as_dict()], csv={n: s.to_csv() for n, s in zip(names, series)})


def _task_floorseq(job, ctx):
    series, v = floor_sequence_correlation(parse(job["expr"]), job["alpha"], _query(job), job["N"],
                                           tol=job.get("tolerance", 0.05))
    return Outcome(verdicts=[v.as_dict()], csv={"floorseq.csv": series.to_csv()})


def _task_acceptance(job, ctx):
    from .acceptance import run_acceptance
    results = run_acceptance(job.get("criteria"), stream=sys.stdout)
    out = Outcome()
    for r in results:
        out.verdicts.append({"experiment": f"criterion_{r.number}", "params": {"title": r.title},
                             "value": r.summary, "reference": None, "tolerance": None, "pass": r.passed})
        out.records.append(_jsonable(r.as_dict()))
    return out


_RUNNERS = {name: globals()[f"_task_{name}"] for name in TASKS}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag, "abs": abs(x)}
    if isinstance(x, Fraction):
        return str(x)
    if hasattr(x, "item"):  # numpy scalars
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def run_job(job: dict, out_dir, precision_bits: Optional[int] = None, job_text: Optional[str] = None) -> int:
    """Run a validated job, write its outputs, and return the exit code."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(os.environ["FLAB_SEED"]) if os.environ.get("FLAB_SEED") else int(job.get("seed", 0))
    prec = precision_bits or job.get("precision_bits", DEFAULT_PRECISION)
    ctx = Context(prec, job.get("n_start", 2), seed)
    results = {"task": job["task"], "job": job}
    code = EXIT_OK
    outcome = Outcome()
    try:
        outcome = _RUNNERS[job["task"]](job, ctx)
        passed = all(v["pass"] for v in outcome.verdicts)
        results["status"] = "pass" if passed else "fail"
        code = EXIT_OK if passed else EXIT_ERROR
    except HypothesisUnmet as exc:
        results["status"] = "refused"
        results["refusal"] = exc.note
        code = EXIT_REFUSED
    except Exception as exc:
        results["status"] = "error"
        results["error"] = f"{type(exc).__name__}: {exc}"
        code = EXIT_ERROR
    results["records"] = outcome.records
    results["verdicts"] = outcome.verdicts
    for name, text in sorted(outcome.csv.items()):
        (out_dir / name).write_text(text, encoding="utf-8", newline="\n")
    (out_dir / "results.json").write_text(_dump(results), encoding="utf-8", newline="\n")
    manifest = {"version": __version__, "task": job["task"], "precision_bits": prec, "n_start": ctx.n_start,
                "seed": seed, "seed_source": "FLAB_SEED" if os.environ.get("FLAB_SEED") else "job",
                "job_sha256": hashlib.sha256((job_text or json.dumps(job, sort_keys=True)).encode()).hexdigest(),
                "outputs": ["results.json"] + sorted(outcome.csv), "exit_code": code}
    (out_dir / "manifest.json").write_text(_dump(manifest), encoding="utf-8", newline="\n")
    return code


def _print_catalog(stream=sys.stdout):
    print("flab tasks (run with --job FILE):", file=stream)
    for name, t in TASKS.items():
        req = [r for r in t["schema"]["required"] if r != "task"]
        print(f"  {name:<11} {t['doc']}  [required: {', '.join(req) or '-'}]", file=stream)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="flab", description="Run a flab JSON job.")
    p.add_argument("--job", help="job file (JSON); without it the task catalog is printed")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--threads", type=int, default=0, help="worker threads, 0 = one per CPU")
    p.add_argument("--precision-bits", type=int, default=None,
                   help=f"working precision for extended evaluation (default {DEFAULT_PRECISION})")
    try:
        args = p.parse_args(argv)
        if args.threads < 0:
            p.error("--threads must be >= 0")
        if args.precision_bits is not None and args.precision_bits < 64:
            p.error("--precision-bits must be >= 64")
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for refusals here
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    if not args.job:
        _print_catalog()
        return EXIT_OK
    set_threads(args.threads)
    try:
        job = load_job(args.job)
    except JobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    text = Path(args.job).read_text(encoding="utf-8")
    code = run_job(job, args.out, args.precision_bits, text)
    status = {EXIT_OK: "ok", EXIT_ERROR: "failed", EXIT_REFUSED: "refused"}[code]
    print(f"{job['task']}: {status} -> {args.out}/results.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
