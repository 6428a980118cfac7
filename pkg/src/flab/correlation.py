"""Empirical multiple correlations ``E_m prod_j z(m + r n_j)^{k_j}``.

Queries are reduced to *patterns*: sorted tuples of factors
``(source, offset, exponent)`` in which repeated offsets are merged and
cancelling pairs (``z * conj(z) = 1`` for unimodular ``z``) removed.  A batch
of patterns is compiled into a prefix trie so that shared partial products
are computed once.  Sums follow the block layout and tree reduction of
:mod:`flab.averaging`, so a batch gives bitwise the same values as separate
calls, for any thread count.

The average for a pattern starts at ``m = n_start + max(0, -min offset)``
so that every index it touches is in the domain of the source.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from ._parallel import pmap
from .averaging import (
    AveragingScheme,
    ComplexSeries,
    block_layout,
    chunked,
    source_values,
    tree_reduce,
)

MAX_FACTORS = 8
MAX_SHIFT = 64
MAX_SOURCES = 4

Pattern = Tuple[Tuple[int, int, int], ...]


@dataclass(frozen=True)
class CorrelationQuery:
    """Shifts ``n_j``, signs ``k_j`` (``-1`` = conjugate) and dilation ``r``."""

    shifts: tuple
    signs: tuple
    dilation: int = 1

    def __post_init__(self):
        shifts = tuple(int(x) for x in self.shifts)
        signs = tuple(int(x) for x in self.signs)
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "signs", signs)
        if not 1 <= len(shifts) <= MAX_FACTORS:
            raise ValueError(f"a query needs 1..{MAX_FACTORS} factors")
        if len(signs) != len(shifts):
            raise ValueError("shifts and signs differ in length")
        if any(k not in (-1, 1) for k in signs):
            raise ValueError("signs must be +1 or -1")
        if any(abs(n) > MAX_SHIFT for n in shifts):
            raise ValueError(f"shifts must satisfy |n| <= {MAX_SHIFT}")
        if int(self.dilation) < 1:
            raise ValueError("dilation must be a positive integer")
        object.__setattr__(self, "dilation", int(self.dilation))

    def net(self) -> Dict[int, int]:
        """Net exponent at each effective offset ``r * n_j`` (zeros dropped)."""
        acc: Dict[int, int] = {}
        for n, k in zip(self.shifts, self.signs):
            acc[self.dilation * n] = acc.get(self.dilation * n, 0) + k
        return {o: e for o, e in sorted(acc.items()) if e != 0}

    def pattern(self, src: int = 0) -> Pattern:
        return tuple((src, o, e) for o, e in self.net().items())

    def conjugate(self) -> "CorrelationQuery":
        return CorrelationQuery(self.shifts, tuple(-k for k in self.signs), self.dilation)

    def dilate(self, r: int) -> "CorrelationQuery":
        return CorrelationQuery(self.shifts, self.signs, self.dilation * r)

    def folded(self) -> "CorrelationQuery":
        """The same query with the dilation folded into the shifts."""
        return CorrelationQuery(tuple(self.dilation * n for n in self.shifts), self.signs, 1)

    def translate(self, c: int) -> "CorrelationQuery":
        return CorrelationQuery(tuple(n + c for n in self.shifts), self.signs, self.dilation)

    def as_dict(self) -> dict:
        return {"shifts": list(self.shifts), "signs": list(self.signs), "dilation": self.dilation}

    @classmethod
    def from_dict(cls, d: dict) -> "CorrelationQuery":
        return cls(tuple(d["shifts"]), tuple(d["signs"]), d.get("dilation", 1))

    def __str__(self):
        sh = ",".join(str(x) for x in self.shifts)
        sg = ",".join("+" if k > 0 else "-" for k in self.signs)
        r = f";r={self.dilation}" if self.dilation != 1 else ""
        return f"(({sh}),({sg}){r})"


def query_from_net(net: Dict[int, int]) -> CorrelationQuery:
    """A query realizing a net-exponent vector (each unit exponent one factor)."""
    shifts, signs = [], []
    for o, e in sorted(net.items()):
        shifts += [o] * abs(e)
        signs += [1 if e > 0 else -1] * abs(e)
    if not shifts:
        return CorrelationQuery((0, 0), (1, -1))
    return CorrelationQuery(tuple(shifts), tuple(signs))


# ---------------------------------------------------------------------------
# trie compilation
# ---------------------------------------------------------------------------


@dataclass
class _Trie:
    depth: np.ndarray
    fid: np.ndarray
    off: np.ndarray
    qptr: np.ndarray
    qids: np.ndarray
    qlo: np.ndarray
    factors: list  # (src, exponent) per factor array


def _compile(patterns: Sequence[Pattern], n_start: int) -> _Trie:
    keys = sorted({(s, e) for p in patterns for s, _, e in p})
    fid_of = {k: i for i, k in enumerate(keys)}
    coded = [tuple((fid_of[(s, e)], o) for s, o, e in p) for p in patterns]
    order = sorted(range(len(patterns)), key=lambda i: coded[i])
    depth, fid, off, ends = [], [], [], []
    path: list = []
    for qi in order:
        seq = coded[qi]
        if not seq:
            continue
        common = 0
        while common < min(len(path), len(seq)) and path[common][0] == seq[common]:
            common += 1
        path = path[:common]
        for lvl in range(common, len(seq)):
            depth.append(lvl + 1)
            fid.append(seq[lvl][0])
            off.append(seq[lvl][1])
            path.append((seq[lvl], len(depth) - 1))
        ends.append((path[len(seq) - 1][1], qi))
    qptr = np.zeros(len(depth) + 1, dtype=np.int64)
    by_node: Dict[int, list] = {}
    for node, qi in ends:
        by_node.setdefault(node, []).append(qi)
    qids = []
    for k in range(len(depth)):
        qids += by_node.get(k, [])
        qptr[k + 1] = len(qids)
    qlo = np.array([n_start + max(0, -min((o for _, o, _ in p), default=0)) for p in patterns],
                   dtype=np.int64)
    return _Trie(np.array(depth, dtype=np.int64), np.array(fid, dtype=np.int64),
                 np.array(off, dtype=np.int64), qptr, np.array(qids, dtype=np.int64), qlo, keys)


def _padded_values(source, lo: int, hi: int, n_start: int) -> np.ndarray:
    """Source values on ``[lo, hi)``, with 1 below the domain start."""
    out = np.ones(hi - lo, dtype=np.complex128)
    a = max(lo, n_start)
    if a < hi:
        out[a - lo:] = source_values(source, a, hi)
    return out


def _factor_arrays(values: List[np.ndarray], keys) -> Tuple[np.ndarray, np.ndarray]:
    fr = np.empty((len(keys), values[0].size))
    fi = np.empty_like(fr)
    for j, (s, e) in enumerate(keys):
        z = values[s]
        f = z
        for _ in range(abs(e) - 1):
            f = f * z
        if e < 0:
            f = np.conj(f)
        fr[j] = f.real
        fi[j] = f.imag
    return fr, fi


def pattern_series(sources: Sequence, patterns: Sequence[Pattern], scheme: AveragingScheme) -> List[ComplexSeries]:
    """Correlation series for each pattern (the engine behind every query API)."""
    if scheme.kind == "weighted":
        raise ValueError("correlations use full or subsequence schemes")
    n_start = scheme.n_start
    patterns = [tuple(p) for p in patterns]
    if not patterns:
        return []
    nq = len(patterns)
    trie = _compile(patterns, n_start)
    ends = [n + 1 for n in scheme.checkpoints]
    lo, hi, counts = block_layout(n_start, ends)
    nb = lo.size
    out = tuple(np.zeros((nq, nb)) for _ in range(4))
    offs = [o for p in patterns for _, o, _ in p] or [0]
    min_off, max_off = min(offs), max(offs)

    def work(chunk):
        i0, i1 = chunk
        m0, m1 = int(lo[i0]), int(hi[i1 - 1])
        base = m0 + min_off
        top = m1 + max_off
        vals = [_padded_values(src, base, top, n_start) for src in sources]
        fr, fi = _factor_arrays(vals, trie.factors)
        kernels.trie_block_sums(fr, fi, base, lo[i0:i1], hi[i0:i1], trie, out, i0)

    if trie.depth.size:
        pmap(work, chunked(lo, hi))
    # empty patterns: the product is identically 1
    for q, p in enumerate(patterns):
        if not p:
            out[0][q] = np.clip(hi - np.maximum(lo, trie.qlo[q]), 0, None).astype(np.float64)
    result = []
    reduced = []
    for k in counts:
        sr, er = tree_reduce(out[0][:, :k], out[1][:, :k])
        si, ei = tree_reduce(out[2][:, :k], out[3][:, :k])
        reduced.append((sr + er, si + ei))
    for q in range(nq):
        vals, cnts = [], []
        for n, (re, im) in zip(scheme.checkpoints, reduced):
            c = n - int(trie.qlo[q]) + 1
            if c <= 0:
                raise ValueError(f"checkpoint {n} leaves no terms for pattern {patterns[q]}")
            vals.append(complex(re[q] / c, im[q] / c))
            cnts.append(c)
        result.append(ComplexSeries(scheme.checkpoints, tuple(vals), tuple(cnts), n_start))
    return result


def _as_scheme(scheme) -> AveragingScheme:
    if isinstance(scheme, AveragingScheme):
        return scheme
    return AveragingScheme.full(int(scheme))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def empirical_correlation(source, q: CorrelationQuery, scheme) -> ComplexSeries:
    return pattern_series([source], [q.pattern()], _as_scheme(scheme))[0]


def joint_pattern(per_source_queries: Sequence[CorrelationQuery]) -> Pattern:
    return tuple(f for i, q in enumerate(per_source_queries) for f in q.pattern(i))


def joint_correlation(sources: Sequence, per_source_queries: Sequence[CorrelationQuery], scheme) -> ComplexSeries:
    """Mean of ``prod_i prod_j source_i(m + r n_ij)^{k_ij}``."""
    if not 1 <= len(sources) <= MAX_SOURCES:
        raise ValueError(f"joint correlations take 1..{MAX_SOURCES} sources")
    if len(per_source_queries) != len(sources):
        raise ValueError("one query per source is required")
    return pattern_series(list(sources), [joint_pattern(per_source_queries)], _as_scheme(scheme))[0]


def correlation_series_table(source, queries: Sequence[CorrelationQuery], scheme) -> List[ComplexSeries]:
    return pattern_series([source], [q.pattern() for q in queries], _as_scheme(scheme))


def correlation_table(source, queries: Sequence[CorrelationQuery], scheme) -> List[Tuple[CorrelationQuery, complex]]:
    """Final values for a batch of queries, sharing one pass over the data."""
    series = correlation_series_table(source, queries, scheme)
    return [(q, s.final) for q, s in zip(queries, series)]


def summary_record(q: CorrelationQuery, series: ComplexSeries) -> dict:
    v = series.final
    return {"query": q.as_dict(), "value_re": v.real, "value_im": v.imag, "N": series.N[-1]}


def summary_json(records: Iterable[dict]) -> str:
    return json.dumps(list(records), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# exhaustive query sets
# ---------------------------------------------------------------------------


def exhaustive_queries(max_s: int = 4, max_shift: int = 5) -> List[CorrelationQuery]:
    """All queries with ``s <= max_s`` factors and shifts in ``[-max_shift, max_shift]``.

    Factors are taken as a multiset of ``(shift, sign)``: permuting factors
    does not change the product, so each product appears once.
    """
    atoms = [(n, k) for n in range(-max_shift, max_shift + 1) for k in (1, -1)]
    out = []
    for s in range(1, max_s + 1):
        for combo in itertools.combinations_with_replacement(atoms, s):
            out.append(CorrelationQuery(tuple(n for n, _ in combo), tuple(k for _, k in combo)))
    return out


def net_key(q: CorrelationQuery) -> Tuple[Tuple[int, int], ...]:
    return tuple(q.net().items())


def translation_class(key) -> Tuple[Tuple[Tuple[int, int], ...], int]:
    """``(representative, t)``: the representative has minimum offset 0 and
    ``key`` is it translated by ``t``."""
    if not key:
        return (), 0
    t = key[0][0]
    return tuple((o - t, e) for o, e in key), t


@dataclass(frozen=True)
class SweepResult:
    """Values of many net-exponent vectors at the scheme's checkpoints."""

    keys: tuple
    checkpoints: tuple
    values: np.ndarray  # complex, (len(keys), len(checkpoints))
    n_start: int
    n_classes: int

    def value(self, key, k: int = -1) -> complex:
        return complex(self.values[self.keys.index(key), k])


def _products(source_vals: Dict[int, complex], rep, ms) -> complex:
    total = 0j
    for m in ms:
        p = 1 + 0j
        for o, e in rep:
            z = source_vals[m + o]
            f = z ** abs(e)
            p *= f.conjugate() if e < 0 else f
        total += p
    return total


def net_vector_sweep(source, keys: Sequence, scheme) -> SweepResult:
    """Correlations for many net-exponent vectors via translation classes.

    Each class representative (minimum offset 0) is computed with the trie
    engine; a translate by ``t`` differs from it only by at most ``|t|``
    terms at each end of the range, which are added or removed exactly.
    """
    scheme = _as_scheme(scheme)
    n_start = scheme.n_start
    keys = [tuple(k) for k in keys]
    reps: Dict[tuple, int] = {}
    placement = []
    for key in keys:
        rep, t = translation_class(key)
        # flipping all signs conjugates every product exactly, so only one
        # of each conjugate pair is computed
        conj_rep = tuple((o, -e) for o, e in rep)
        flip = conj_rep < rep
        if flip:
            rep = conj_rep
        if rep not in reps:
            reps[rep] = len(reps)
        placement.append((reps[rep], t, flip))
    rep_list = list(reps)
    series = pattern_series([source], [tuple((0, o, e) for o, e in rep) for rep in rep_list], scheme)
    max_t = max((abs(t) for _, t, _ in placement), default=0)
    span = max((o for rep in rep_list for o, _ in rep), default=0)
    # source values needed for the boundary corrections
    need = set(range(n_start, n_start + max_t + span + 1))
    for n in scheme.checkpoints:
        need |= set(range(n - max_t - 1, n + max_t + span + 2))
    idx = np.array(sorted(need), dtype=np.int64)
    vals = dict(zip(idx.tolist(), np.asarray(source(idx), dtype=np.complex128).tolist()))
    out = np.zeros((len(keys), len(scheme.checkpoints)), dtype=np.complex128)
    for i, (ri, t, flip) in enumerate(placement):
        rep = rep_list[ri]
        base = series[ri]
        for k, n in enumerate(scheme.checkpoints):
            total = base.values[k] * base.samples[k]
            if rep and t > 0:
                total -= _products(vals, rep, range(n_start, n_start + t))
                total += _products(vals, rep, range(n + 1, n + t + 1))
            elif rep and t < 0:
                total -= _products(vals, rep, range(n + t + 1, n + 1))
            count = n - n_start - max(0, -t) + 1 if rep else n - n_start + 1
            v = total / count
            out[i, k] = v.conjugate() if flip else v
    return SweepResult(tuple(keys), scheme.checkpoints, out, n_start, len(rep_list))
