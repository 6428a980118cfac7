"""Double-double arithmetic.

A double-double value is an unevaluated sum ``hi + lo`` of two float64 with
``|lo| <= ulp(hi) / 2``, giving roughly 106 significand bits.  Functions take
and return the two parts separately so that the same source works on scalars
(inside numba loops) and on numpy arrays (fallback backend); none of them
branch on data.

Algorithms are the classic error-free transformations of Dekker and Knuth;
``exp`` uses argument reduction by ``ln 2`` and ``2**-10`` followed by a
Taylor polynomial, and ``log`` a single Newton step on ``exp``.
"""

import mpmath
import numpy as np

from ._accel import jit

_SPLITTER = 134217729.0  # 2**27 + 1


def _dd_const(x):
    hi = float(x)
    return hi, float(x - hi)


with mpmath.workprec(240):
    LN2_H, LN2_L = _dd_const(mpmath.log(2))
    _inv = [_dd_const(1 / mpmath.factorial(i)) for i in range(12)]
INVFACT_H = np.array([h for h, _ in _inv])
INVFACT_L = np.array([lo for _, lo in _inv])
INV_LN2 = 1.0 / LN2_H
_EXP_SQUARINGS = 10
_EXP_SCALE = 2.0**-_EXP_SQUARINGS


@jit
def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@jit
def quick_two_sum(a, b):
    # requires |a| >= |b| (or a == 0)
    s = a + b
    return s, b - (s - a)


@jit
def split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


@jit
def two_prod(a, b):
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@jit
def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e = e + t
    s, e = quick_two_sum(s, e)
    e = e + f
    return quick_two_sum(s, e)


@jit
def dd_add_d(ah, al, b):
    s, e = two_sum(ah, b)
    e = e + al
    return quick_two_sum(s, e)


@jit
def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return quick_two_sum(p, e)


@jit
def dd_mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    e = e + al * b
    return quick_two_sum(p, e)


@jit
def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul_d(bh, bl, q1)
    rh, rl = dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = dd_mul_d(bh, bl, q2)
    rh, rl = dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add_d(q1, q2, q3)


@jit
def dd_sqrt(ah, al):
    q = np.sqrt(ah)
    ph, pl = two_prod(q, q)
    rh, rl = dd_add(ah, al, -ph, -pl)
    return quick_two_sum(q, rh / (2.0 * q))


@jit
def dd_exp(h, l):
    k = np.floor(h * INV_LN2 + 0.5)
    ph, pl = dd_mul_d(LN2_H, LN2_L, k)
    rh, rl = dd_add(h, l, -ph, -pl)
    rh = rh * _EXP_SCALE
    rl = rl * _EXP_SCALE
    # expm1(r) by Horner over 1/i!, i = 9..1
    sh = INVFACT_H[9] + 0.0 * rh
    sl = INVFACT_L[9] + 0.0 * rh
    for i in range(8, 0, -1):
        sh, sl = dd_mul(sh, sl, rh, rl)
        sh, sl = dd_add(sh, sl, INVFACT_H[i], INVFACT_L[i])
    sh, sl = dd_mul(sh, sl, rh, rl)
    # expm1(2x) = 2 expm1(x) + expm1(x)**2
    for _ in range(_EXP_SQUARINGS):
        th, tl = dd_mul(sh, sl, sh, sl)
        sh, sl = dd_add(2.0 * sh, 2.0 * sl, th, tl)
    sh, sl = dd_add_d(sh, sl, 1.0)
    scale = 2.0**k
    return sh * scale, sl * scale


@jit
def dd_log(h, l):
    y = np.log(h)
    eh, el = dd_exp(-y, 0.0 * y)
    th, tl = dd_mul(h, l, eh, el)
    th, tl = dd_add_d(th, tl, -1.0)
    return dd_add_d(th, tl, y)


@jit
def dd_frac(h, l):
    """Fractional part of ``h + lo`` in [0, 1); needs ``|h| < 2**52``."""
    f = h - np.floor(h)
    s = f + l
    s = s - np.floor(s)
    return s - (s >= 1.0) * 1.0


@jit
def dd_floor(h, l):
    fl = np.floor(h)
    return fl + np.floor((h - fl) + l)

