"""Hot loops: Hardy-expression evaluation, unit phases, compensated block sums,
and the shared-prefix correlation kernel.

Each public kernel exists twice, an element loop for numba and an array
version for the numpy fallback; the module-level names point at whichever
backend :mod:`flab._accel` selected.  Both paths run the same double-double
arithmetic, so they agree to rounding of the final ``cos``/``sin``.
"""

import numpy as np

from ._accel import USE_NUMBA, jit
from .dd import (
    dd_add,
    dd_div,
    dd_exp,
    dd_floor,
    dd_frac,
    dd_log,
    dd_mul,
    dd_mul_d,
    dd_sqrt,
    two_sum,
)

TWO_PI = 2.0 * np.pi
# rotation by i**k, k = 0..3
_ROT_C = np.array([1.0, 0.0, -1.0, 0.0])
_ROT_S = np.array([0.0, 1.0, 0.0, -1.0])

# term kinds; see hardy.HardyExpr.packed
T_NONE, T_INT, T_HALF, T_GEN = 0, 1, 2, 3
L_NONE, L_INT, L_GEN = 0, 1, 2


# ---------------------------------------------------------------------------
# Hardy expressions
# ---------------------------------------------------------------------------


@jit
def _ipow(xh, xl, p):
    """(xh + xl) ** p for a small integer p, by repeated multiplication."""
    rh = 1.0 + 0.0 * xh
    rl = 0.0 * xh
    for _ in range(abs(p)):
        rh, rl = dd_mul(rh, rl, xh, xl)
    if p < 0:
        rh, rl = dd_div(1.0 + 0.0 * xh, 0.0 * xh, rh, rl)
    return rh, rl


@jit
def _term(x, lh, ll, ch, cl, tk, tp, ah, al, lk, lb, bh, bl):
    vh = ch + 0.0 * x
    vl = cl + 0.0 * x
    if tk == T_INT:
        ph, pl = _ipow(x, 0.0 * x, tp)
        vh, vl = dd_mul(vh, vl, ph, pl)
    elif tk == T_HALF:
        sh, sl = dd_sqrt(x, 0.0 * x)
        ph, pl = _ipow(x, 0.0 * x, (tp - 1) // 2)
        ph, pl = dd_mul(ph, pl, sh, sl)
        vh, vl = dd_mul(vh, vl, ph, pl)
    elif tk == T_GEN:
        eh, el = dd_mul(lh, ll, ah, al)
        ph, pl = dd_exp(eh, el)
        vh, vl = dd_mul(vh, vl, ph, pl)
    if lk == L_INT:
        ph, pl = _ipow(lh, ll, lb)
        vh, vl = dd_mul(vh, vl, ph, pl)
    elif lk == L_GEN:
        gh, gl = dd_log(lh, ll)
        gh, gl = dd_mul(gh, gl, bh, bl)
        ph, pl = dd_exp(gh, gl)
        vh, vl = dd_mul(vh, vl, ph, pl)
    return vh, vl


@jit
def _hardy_dd_loop(xs, ch, cl, tk, tp, ah, al, lk, lb, bh, bl, need_log, out_h, out_l):
    for i in range(xs.size):
        x = xs[i]
        lh = 0.0
        ll = 0.0
        if need_log:
            lh, ll = dd_log(x, 0.0)
        sh = 0.0
        sl = 0.0
        for j in range(ch.size):
            th, tl = _term(x, lh, ll, ch[j], cl[j], tk[j], tp[j], ah[j], al[j], lk[j], lb[j], bh[j], bl[j])
            sh, sl = dd_add(sh, sl, th, tl)
        out_h[i] = sh
        out_l[i] = sl


def _hardy_dd_vec(xs, ch, cl, tk, tp, ah, al, lk, lb, bh, bl, need_log, out_h, out_l):
    lh = ll = np.zeros_like(xs)
    if need_log:
        lh, ll = dd_log(xs, np.zeros_like(xs))
    sh = np.zeros_like(xs)
    sl = np.zeros_like(xs)
    for j in range(ch.size):
        th, tl = _term(xs, lh, ll, ch[j], cl[j], int(tk[j]), int(tp[j]), ah[j], al[j],
                       int(lk[j]), int(lb[j]), bh[j], bl[j])
        sh, sl = dd_add(sh, sl, th, tl)
    out_h[:] = sh
    out_l[:] = sl


def hardy_dd(xs, packed):
    """Evaluate a packed Hardy expression at the float64 points ``xs``.

    Returns the double-double value as ``(hi, lo)`` arrays.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    out_h = np.empty_like(xs)
    out_l = np.empty_like(xs)
    fn = _hardy_dd_loop if USE_NUMBA else _hardy_dd_vec
    fn(xs, *packed, out_h, out_l)
    return out_h, out_l


@jit
def _frac_scaled_loop(h, l, sh, sl, out):
    for i in range(h.size):
        ph, pl = dd_mul(h[i], l[i], sh, sl)
        out[i] = dd_frac(ph, pl)


@jit
def _floor_frac_scaled_loop(h, l, sh, sl, fl_out, out):
    for i in range(h.size):
        f = dd_floor(h[i], l[i])
        fl_out[i] = f
        ph, pl = dd_mul_d(sh, sl, f)
        out[i] = dd_frac(ph, pl)


def frac_scaled(h, l, scale_h=1.0, scale_l=0.0):
    """``{(h + l) * scale}`` for a double-double ``scale``."""
    if USE_NUMBA:
        out = np.empty_like(h)
        _frac_scaled_loop(h, l, scale_h, scale_l, out)
        return out
    ph, pl = dd_mul(h, l, scale_h, scale_l)
    return dd_frac(ph, pl)


def floor_and_frac_scaled(h, l, scale_h, scale_l):
    """``([v], {[v] * scale})`` for ``v = h + l``."""
    if USE_NUMBA:
        fl = np.empty_like(h)
        out = np.empty_like(h)
        _floor_frac_scaled_loop(h, l, scale_h, scale_l, fl, out)
        return fl, out
    fl = dd_floor(h, l)
    ph, pl = dd_mul_d(scale_h, scale_l, fl)
    return fl, dd_frac(ph, pl)


@jit
def _int_times_dd_frac_loop(k, ah, al, bh, bl, out):
    # {k * a + b} with k exact in float64
    for i in range(k.size):
        ph, pl = dd_mul_d(ah, al, k[i])
        ph, pl = dd_add(ph, pl, bh, bl)
        out[i] = dd_frac(ph, pl)


def int_times_dd_frac(k, ah, al, bh=0.0, bl=0.0):
    """``{k * a + b}`` for integer-valued float64 ``k`` and double-double a, b."""
    k = np.ascontiguousarray(k, dtype=np.float64)
    if USE_NUMBA:
        out = np.empty_like(k)
        _int_times_dd_frac_loop(k, ah, al, bh, bl, out)
        return out
    ph, pl = dd_mul_d(ah, al, k)
    ph, pl = dd_add(ph, pl, bh, bl)
    return dd_frac(ph, pl)


# ---------------------------------------------------------------------------
# unit phases e(x) = exp(2 pi i x)
# ---------------------------------------------------------------------------


@jit
def _expi_loop(x, re, im):
    for i in range(x.size):
        k = np.floor(4.0 * x[i] + 0.5)
        ang = TWO_PI * (x[i] - 0.25 * k)
        c = np.cos(ang)
        s = np.sin(ang)
        q = int(k) & 3
        re[i] = c * _ROT_C[q] - s * _ROT_S[q]
        im[i] = c * _ROT_S[q] + s * _ROT_C[q]


def expi(x):
    """``e(x)`` as complex128; exact at multiples of 1/4.

    The argument is reduced to ``|r| <= 1/8`` around the nearest quarter and
    rotated back by a power of ``i``.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        re = np.empty_like(x)
        im = np.empty_like(x)
        _expi_loop(x, re, im)
    else:
        k = np.floor(4.0 * x + 0.5)
        ang = TWO_PI * (x - 0.25 * k)
        c = np.cos(ang)
        s = np.sin(ang)
        q = k.astype(np.int64) & 3
        re = c * _ROT_C[q] - s * _ROT_S[q]
        im = c * _ROT_S[q] + s * _ROT_C[q]
    return re + 1j * im


# ---------------------------------------------------------------------------
# compensated block sums
# ---------------------------------------------------------------------------


@jit
def _kahan4(v, i0, i1):
    """Sum ``v[i0:i1]`` with four interleaved Kahan lanes.

    Returns ``(s, e)`` with the sum equal to ``s + e`` up to rounding of the
    compensations.  Lane assignment depends only on ``i0``.
    """
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    s3 = 0.0
    c0 = 0.0
    c1 = 0.0
    c2 = 0.0
    c3 = 0.0
    i = i0
    while i + 4 <= i1:
        y = v[i] - c0
        t = s0 + y
        c0 = (t - s0) - y
        s0 = t
        y = v[i + 1] - c1
        t = s1 + y
        c1 = (t - s1) - y
        s1 = t
        y = v[i + 2] - c2
        t = s2 + y
        c2 = (t - s2) - y
        s2 = t
        y = v[i + 3] - c3
        t = s3 + y
        c3 = (t - s3) - y
        s3 = t
        i += 4
    while i < i1:
        y = v[i] - c0
        t = s0 + y
        c0 = (t - s0) - y
        s0 = t
        i += 1
    s, e = two_sum(s0, s1)
    e = e - (c0 + c1)
    s, f = two_sum(s, s2)
    e = e + f - c2
    s, f = two_sum(s, s3)
    e = e + f - c3
    return two_sum(s, e)


@jit
def _block_sums_loop(v, lo, hi, out_s, out_e):
    for b in range(lo.size):
        s, e = _kahan4(v, lo[b], hi[b])
        out_s[b] = s
        out_e[b] = e


def _pairwise_compensated(m):
    """Row sums of a 2-D array by a pairwise tree of two_sum steps."""
    s = m
    e = np.zeros_like(m)
    while s.shape[1] > 1:
        if s.shape[1] % 2:
            s = np.concatenate([s, np.zeros((s.shape[0], 1))], axis=1)
            e = np.concatenate([e, np.zeros((e.shape[0], 1))], axis=1)
        a, b = s[:, 0::2], s[:, 1::2]
        s, err = two_sum(a, b)
        e = e[:, 0::2] + e[:, 1::2] + err
    return two_sum(s[:, 0], e[:, 0])


def block_sums(v, lo, hi):
    """Compensated sums of ``v[lo[b]:hi[b]]`` for every block ``b``.

    Returns ``(s, e)`` arrays; block ``b`` sums to ``s[b] + e[b]``.
    """
    v = np.ascontiguousarray(v, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    if USE_NUMBA:
        out_s = np.empty(lo.size)
        out_e = np.empty(lo.size)
        _block_sums_loop(v, lo, hi, out_s, out_e)
        return out_s, out_e
    if lo.size == 0:
        return np.zeros(0), np.zeros(0)
    width = int((hi - lo).max()) if lo.size else 0
    width = max(width, 1)
    idx = lo[:, None] + np.arange(width)[None, :]
    mask = idx < hi[:, None]
    mat = np.where(mask, v[np.minimum(idx, v.size - 1)], 0.0)
    return _pairwise_compensated(mat)


# ---------------------------------------------------------------------------
# shared-prefix correlation kernel
# ---------------------------------------------------------------------------
#
# A batch of correlation queries is compiled into a trie whose nodes are
# factors (factor array, offset) listed in depth-first preorder.  Factor
# arrays hold z_src**k or conj(z_src)**k for the exponents in use.  A node's
# value at position m is its parent's value times factor(m + offset).
# Queries terminate at nodes and accumulate the node value over their own
# index range.

MAX_DEPTH = 8


@jit
def _trie_loop(fr, fi, base, blo, bhi, depth, fid, off, qptr, qids, qlo,
               out_sr, out_er, out_si, out_ei, col0):
    width = 1
    for b in range(blo.size):
        if bhi[b] - blo[b] > width:
            width = bhi[b] - blo[b]
    sr = np.empty((MAX_DEPTH + 1, width))
    si = np.empty((MAX_DEPTH + 1, width))
    for b in range(blo.size):
        m0 = blo[b]
        n = bhi[b] - m0
        for k in range(depth.size):
            d = depth[k]
            f = fid[k]
            o = m0 + off[k] - base
            if d == 1:
                for i in range(n):
                    sr[1, i] = fr[f, o + i]
                    si[1, i] = fi[f, o + i]
            else:
                for i in range(n):
                    ar = sr[d - 1, i]
                    ai = si[d - 1, i]
                    cr = fr[f, o + i]
                    ci = fi[f, o + i]
                    sr[d, i] = ar * cr - ai * ci
                    si[d, i] = ar * ci + ai * cr
            for t in range(qptr[k], qptr[k + 1]):
                q = qids[t]
                i0 = qlo[q] - m0
                if i0 < 0:
                    i0 = 0
                if i0 > n:
                    i0 = n
                a, c = _kahan4(sr[d], i0, n)
                out_sr[q, col0 + b] = a
                out_er[q, col0 + b] = c
                a, c = _kahan4(si[d], i0, n)
                out_si[q, col0 + b] = a
                out_ei[q, col0 + b] = c


def _trie_vec(fr, fi, base, blo, bhi, depth, fid, off, qptr, qids, qlo,
              out_sr, out_er, out_si, out_ei, col0):
    m_lo, m_hi = int(blo[0]), int(bhi[-1])
    n = m_hi - m_lo
    stack_r = [None] * (MAX_DEPTH + 1)
    stack_i = [None] * (MAX_DEPTH + 1)
    width = max(int((bhi - blo).max()), 1)
    pos = blo[:, None] + np.arange(width)[None, :]
    inside = pos < bhi[:, None]
    idx = np.clip(pos - m_lo, 0, n - 1)
    for k in range(depth.size):
        d, f = int(depth[k]), int(fid[k])
        o = m_lo + int(off[k]) - int(base)
        cr = fr[f, o:o + n]
        ci = fi[f, o:o + n]
        if d == 1:
            stack_r[1], stack_i[1] = cr, ci
        else:
            ar, ai = stack_r[d - 1], stack_i[d - 1]
            stack_r[d] = ar * cr - ai * ci
            stack_i[d] = ar * ci + ai * cr
        for t in range(int(qptr[k]), int(qptr[k + 1])):
            q = int(qids[t])
            keep = inside & (pos >= qlo[q])
            re = np.where(keep, stack_r[d][idx], 0.0)
            im = np.where(keep, stack_i[d][idx], 0.0)
            a, c = _pairwise_compensated(re)
            out_sr[q, col0:col0 + blo.size] = a
            out_er[q, col0:col0 + blo.size] = c
            a, c = _pairwise_compensated(im)
            out_si[q, col0:col0 + blo.size] = a
            out_ei[q, col0:col0 + blo.size] = c


def trie_block_sums(fr, fi, base, blo, bhi, trie, out, col0):
    """Run the correlation kernel over one chunk of blocks.

    ``fr``/``fi`` hold the factor arrays for indices ``base .. base + L - 1``;
    ``out`` is the tuple of four ``(n_queries, n_blocks)`` partial-sum arrays
    and the chunk's blocks are written from column ``col0``.
    """
    fn = _trie_loop if USE_NUMBA else _trie_vec
    fn(fr, fi, np.int64(base), blo, bhi, trie.depth, trie.fid, trie.off,
       trie.qptr, trie.qids, trie.qlo, *out, np.int64(col0))
