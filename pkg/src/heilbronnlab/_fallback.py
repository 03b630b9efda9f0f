"""Pure-Python kernels.

Mirrors ``_kernels.pyx`` operation for operation so both backends produce the
same double-double results.  Slow, but always importable.
"""

import math

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1
_LN2_HI = 6.93147180559945286227e-01
_LN2_LO = 2.31904681384629955842e-17
_U2 = 2.0 ** -106
_POW_REL = 2.0 ** -96
_TWO64 = 2.0 ** -64
_TWO128 = 2.0 ** -128
_M64 = (1 << 64) - 1
_M128 = (1 << 128) - 1
_HALF128 = 1 << 127
_TWOPI = 6.283185307179586
_EXP_TERMS = 14
_EXP_HALVINGS = 4
_PAIRWISE_BLOCK = 8

BACKEND = "python"


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd_add(ah, al, bh, bl):
    s1, s2 = _two_sum(ah, bh)
    t1, t2 = _two_sum(al, bl)
    s2 += t1
    s1, s2 = _quick_two_sum(s1, s2)
    s2 += t2
    return _quick_two_sum(s1, s2)


def dd_mul(ah, al, bh, bl):
    p1, p2 = _two_prod(ah, bh)
    p2 += ah * bl + al * bh
    return _quick_two_sum(p1, p2)


def dd_mul_d(ah, al, b):
    p1, p2 = _two_prod(ah, b)
    p2 += al * b
    return _quick_two_sum(p1, p2)


def dd_div_d(ah, al, b):
    q1 = ah / b
    p1, p2 = _two_prod(q1, b)
    s, e = _two_sum(ah, -p1)
    e -= p2
    e += al
    q2 = (s + e) / b
    return _quick_two_sum(q1, q2)


def dd_exp(ah, al):
    if ah == 0.0 and al == 0.0:
        return 1.0, 0.0
    m = math.floor(ah / _LN2_HI + 0.5)
    ph, pl = dd_mul_d(_LN2_HI, _LN2_LO, m)
    rh, rl = dd_add(ah, al, -ph, -pl)
    scale = 1.0 / (1 << _EXP_HALVINGS)
    rh *= scale
    rl *= scale
    # expm1(r) by Taylor; r is small so relative accuracy of s survives doubling
    sh, sl = rh, rl
    th, tl = rh, rl
    for i in range(2, _EXP_TERMS + 1):
        th, tl = dd_mul(th, tl, rh, rl)
        th, tl = dd_div_d(th, tl, float(i))
        sh, sl = dd_add(sh, sl, th, tl)
    for _ in range(_EXP_HALVINGS):
        qh, ql = dd_mul(sh, sl, sh, sl)
        sh, sl = dd_add(2.0 * sh, 2.0 * sl, qh, ql)
    sh, sl = dd_add(1.0, 0.0, sh, sl)
    return math.ldexp(sh, int(m)), math.ldexp(sl, int(m))


def dd_log(ah, al):
    """Natural log of a positive double-double (one Newton step on exp)."""
    y = math.log(ah)
    eh, el = dd_exp(-y, 0.0)
    ph, pl = dd_mul(ah, al, eh, el)
    ph, pl = dd_add(ph, pl, -1.0, 0.0)
    return dd_add(y, 0.0, ph, pl)


def eval_dd(coeffs, xh, xl, xr):
    """Evaluate a packed pseudo-polynomial at a double-double point.

    ``coeffs`` is the tuple produced by ``PseudoPolynomial.packed``.
    Returns ``(hi, lo, radius)``.
    """
    ah, al, ar, th, tl, tr, ch, cl, cr = coeffs
    vh = vl = 0.0
    rad = 0.0
    lnh = lnl = 0.0
    if len(ah):
        lnh, lnl = dd_log(xh, xl)
    absx = abs(xh)
    for j in range(len(ah)):
        eh, el = dd_mul(th[j], tl[j], lnh, lnl)
        yh, yl = dd_exp(eh, el)
        absy = abs(yh)
        ry = absy * (_POW_REL * (1.0 + abs(eh)) + abs(lnh) * tr[j] + abs(th[j]) * xr / absx)
        zh, zl = dd_mul(ah[j], al[j], yh, yl)
        rz = abs(ah[j]) * ry + absy * ar[j] + ar[j] * ry + 8.0 * _U2 * abs(zh)
        rad += rz + 4.0 * _U2 * (abs(vh) + abs(zh))
        vh, vl = dd_add(vh, vl, zh, zl)
    if len(ch):
        ph, pl = ch[0], cl[0]
        pr = cr[0]
        for i in range(1, len(ch)):
            mh, ml = dd_mul(ph, pl, xh, xl)
            pr = abs(ph) * xr + absx * pr + pr * xr + 8.0 * _U2 * abs(mh)
            ph, pl = dd_add(mh, ml, ch[i], cl[i])
            pr += cr[i] + 4.0 * _U2 * (abs(mh) + abs(ch[i]))
        rad += pr + 4.0 * _U2 * (abs(vh) + abs(ph))
        vh, vl = dd_add(vh, vl, ph, pl)
    return vh, vl, rad * 1.0625


def _split_floor(vh, vl):
    f = math.floor(vh)
    rem = (vh - f) + vl
    # adjust in integers: above 2**53 the double f +- 1 would round
    k = math.floor(rem)
    return f + k, rem - k


def floor_batch(coeffs, ns, tol):
    """Floors, fractional remainders and ambiguity flags of f(n) for each n."""
    count = len(ns)
    floors = np.zeros(count, dtype=np.int64)
    rems = np.zeros(count, dtype=np.float64)
    amb = np.zeros(count, dtype=np.uint8)
    for i in range(count):
        vh, vl, rad = eval_dd(coeffs, float(ns[i]), 0.0, 0.0)
        f, rem = _split_floor(vh, vl)
        floors[i] = f
        rems[i] = rem
        slack = rad + tol + 2.2e-16
        if rem <= slack or 1.0 - rem <= slack:
            amb[i] = 1
    return floors, rems, amb


def segment_min(floors, ok, xi_hi, xi_lo, start, end):
    """Exact min over [start, end) of ||xi * floor|| as a 128-bit numerator."""
    xi = (int(xi_hi) << 64) | int(xi_lo)
    best = -1
    best_idx = -1
    for i in range(start, end):
        if not ok[i]:
            continue
        p = (xi * int(floors[i])) & _M128
        d = p if p <= _HALF128 else (1 << 128) - p
        if best < 0 or d < best:
            best = d
            best_idx = i
    if best < 0:
        return 0, 0, -1
    return best >> 64, best & _M64, best_idx


def segment_min_multi(floors2d, ok, a_hi, a_lo, start, end):
    """Exact min over n of max over rows of ||sum_j a_ij floor_j(n)||."""
    rows, cols = a_hi.shape
    a = [[(int(a_hi[i, j]) << 64) | int(a_lo[i, j]) for j in range(cols)] for i in range(rows)]
    best = -1
    best_idx = -1
    for n in range(start, end):
        if not ok[n]:
            continue
        worst = 0
        for i in range(rows):
            acc = 0
            for j in range(cols):
                acc += a[i][j] * int(floors2d[j, n])
            acc &= _M128
            d = acc if acc <= _HALF128 else (1 << 128) - acc
            if d > worst:
                worst = d
        if best < 0 or worst < best:
            best = worst
            best_idx = n
    if best < 0:
        return 0, 0, -1
    return best >> 64, best & _M64, best_idx


def _pairwise(re, im, lo, hi):
    n = hi - lo
    if n <= _PAIRWISE_BLOCK:
        sr = 0.0
        si = 0.0
        for i in range(lo, hi):
            sr += re[i]
            si += im[i]
        return sr, si
    mid = lo + n // 2
    r1, i1 = _pairwise(re, im, lo, mid)
    r2, i2 = _pairwise(re, im, mid, hi)
    return r1 + r2, i1 + i2


def pairwise_sum(re, im):
    return _pairwise(re, im, 0, len(re))


def segment_expsum(floors, rems, weights, b_hi, b_lo, big, continuous, start, end):
    """Pairwise sum of w(n) e(phase(n)) over [start, end).

    phase = {b * floor} in floor mode, {b * floor + (big + b) * rem} otherwise.
    Returns (re, im, sum of |w|).
    """
    b = (int(b_hi) << 64) | int(b_lo)
    bf = float(b_hi) * _TWO64 + float(b_lo) * _TWO128
    count = end - start
    re = [0.0] * count
    im = [0.0] * count
    absw = 0.0
    for k in range(count):
        i = start + k
        p = (b * int(floors[i])) & _M128
        ph = float(p >> 64) * _TWO64 + float(p & _M64) * _TWO128
        if continuous:
            r = rems[i]
            ph = ph + big * r + bf * r
            ph = ph - math.floor(ph)
        w = 1.0 if weights is None else weights[i]
        ang = _TWOPI * ph
        re[k] = w * math.cos(ang)
        im[k] = w * math.sin(ang)
        absw += abs(w)
    sr, si = _pairwise(re, im, 0, count)
    return sr, si, absw
