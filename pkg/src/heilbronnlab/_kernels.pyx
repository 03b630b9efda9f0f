# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: double-double evaluation, exact 128-bit mod-1 scans and
pairwise exponential sums.  Same algorithm as ``_fallback``; the hot loops run
without the GIL so the thread pool in ``parallel`` can use several cores."""

import numpy as np

from libc.math cimport floor, ldexp, log, fabs, cos, sin
from libc.stdint cimport int64_t, uint64_t, uint8_t

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"
    ctypedef long long i128 "__int128"

BACKEND = "cython"

cdef double SPLITTER = 134217729.0
cdef double LN2_HI = 6.93147180559945286227e-01
cdef double LN2_LO = 2.31904681384629955842e-17
cdef double U2 = 2.0 ** -106
cdef double POW_REL = 2.0 ** -96
cdef double TWO64 = 2.0 ** -64
cdef double TWO128 = 2.0 ** -128
cdef double TWOPI = 6.283185307179586
cdef int EXP_TERMS = 14
cdef int EXP_HALVINGS = 4
cdef int PAIRWISE_BLOCK = 8
cdef int MAX_TERMS = 64


cdef struct dd:
    double hi
    double lo


cdef inline dd two_sum(double a, double b) noexcept nogil:
    cdef dd r
    cdef double bb
    r.hi = a + b
    bb = r.hi - a
    r.lo = (a - (r.hi - bb)) + (b - bb)
    return r


cdef inline dd quick_two_sum(double a, double b) noexcept nogil:
    cdef dd r
    r.hi = a + b
    r.lo = b - (r.hi - a)
    return r


cdef inline dd two_prod(double a, double b) noexcept nogil:
    cdef dd r
    cdef double t, ah, al, bh, bl
    r.hi = a * b
    t = SPLITTER * a
    ah = t - (t - a)
    al = a - ah
    t = SPLITTER * b
    bh = t - (t - b)
    bl = b - bh
    r.lo = ((ah * bh - r.hi) + ah * bl + al * bh) + al * bl
    return r


cdef inline dd dd_add(double ah, double al, double bh, double bl) noexcept nogil:
    cdef dd s = two_sum(ah, bh)
    cdef dd t = two_sum(al, bl)
    s.lo += t.hi
    s = quick_two_sum(s.hi, s.lo)
    s.lo += t.lo
    return quick_two_sum(s.hi, s.lo)


cdef inline dd dd_mul(double ah, double al, double bh, double bl) noexcept nogil:
    cdef dd p = two_prod(ah, bh)
    p.lo += ah * bl + al * bh
    return quick_two_sum(p.hi, p.lo)


cdef inline dd dd_mul_d(double ah, double al, double b) noexcept nogil:
    cdef dd p = two_prod(ah, b)
    p.lo += al * b
    return quick_two_sum(p.hi, p.lo)


cdef inline dd dd_div_d(double ah, double al, double b) noexcept nogil:
    cdef double q1 = ah / b
    cdef dd p = two_prod(q1, b)
    cdef dd s = two_sum(ah, -p.hi)
    s.lo -= p.lo
    s.lo += al
    cdef double q2 = (s.hi + s.lo) / b
    return quick_two_sum(q1, q2)


cdef dd c_exp(double ah, double al) noexcept nogil:
    cdef dd r, s, t, q
    cdef double m, scale
    cdef int i
    if ah == 0.0 and al == 0.0:
        r.hi = 1.0
        r.lo = 0.0
        return r
    m = floor(ah / LN2_HI + 0.5)
    t = dd_mul_d(LN2_HI, LN2_LO, m)
    r = dd_add(ah, al, -t.hi, -t.lo)
    scale = 1.0 / (1 << EXP_HALVINGS)
    r.hi *= scale
    r.lo *= scale
    s = r
    t = r
    for i in range(2, EXP_TERMS + 1):
        t = dd_mul(t.hi, t.lo, r.hi, r.lo)
        t = dd_div_d(t.hi, t.lo, <double>i)
        s = dd_add(s.hi, s.lo, t.hi, t.lo)
    for i in range(EXP_HALVINGS):
        q = dd_mul(s.hi, s.lo, s.hi, s.lo)
        s = dd_add(2.0 * s.hi, 2.0 * s.lo, q.hi, q.lo)
    s = dd_add(1.0, 0.0, s.hi, s.lo)
    s.hi = ldexp(s.hi, <int>m)
    s.lo = ldexp(s.lo, <int>m)
    return s


cdef dd c_log(double ah, double al) noexcept nogil:
    cdef double y = log(ah)
    cdef dd e = c_exp(-y, 0.0)
    cdef dd p = dd_mul(ah, al, e.hi, e.lo)
    p = dd_add(p.hi, p.lo, -1.0, 0.0)
    return dd_add(y, 0.0, p.hi, p.lo)


cdef struct pcoeffs:
    int r
    int np
    double ah[64]
    double al[64]
    double ar[64]
    double th[64]
    double tl[64]
    double tr[64]
    double ch[64]
    double cl[64]
    double cr[64]


cdef int fill_packed(pcoeffs* pk, coeffs) except -1:
    ah, al, ar, th, tl, tr, ch, cl, cr = coeffs
    if len(ah) > MAX_TERMS or len(ch) > MAX_TERMS:
        raise ValueError("too many terms for the compiled kernel")
    pk.r = len(ah)
    pk.np = len(ch)
    for j in range(pk.r):
        pk.ah[j] = ah[j]
        pk.al[j] = al[j]
        pk.ar[j] = ar[j]
        pk.th[j] = th[j]
        pk.tl[j] = tl[j]
        pk.tr[j] = tr[j]
    for j in range(pk.np):
        pk.ch[j] = ch[j]
        pk.cl[j] = cl[j]
        pk.cr[j] = cr[j]
    return 0


cdef dd c_eval(const pcoeffs* pk, double xh, double xl, double xr, double* rad_out) noexcept nogil:
    cdef dd v, ln, e, y, z, p, m
    cdef double rad = 0.0, absx = fabs(xh), absy, ry, rz, pr
    cdef int j, i
    v.hi = 0.0
    v.lo = 0.0
    ln.hi = 0.0
    ln.lo = 0.0
    if pk.r > 0:
        ln = c_log(xh, xl)
    for j in range(pk.r):
        e = dd_mul(pk.th[j], pk.tl[j], ln.hi, ln.lo)
        y = c_exp(e.hi, e.lo)
        absy = fabs(y.hi)
        ry = absy * (POW_REL * (1.0 + fabs(e.hi)) + fabs(ln.hi) * pk.tr[j] + fabs(pk.th[j]) * xr / absx)
        z = dd_mul(pk.ah[j], pk.al[j], y.hi, y.lo)
        rz = fabs(pk.ah[j]) * ry + absy * pk.ar[j] + pk.ar[j] * ry + 8.0 * U2 * fabs(z.hi)
        rad += rz + 4.0 * U2 * (fabs(v.hi) + fabs(z.hi))
        v = dd_add(v.hi, v.lo, z.hi, z.lo)
    if pk.np > 0:
        p.hi = pk.ch[0]
        p.lo = pk.cl[0]
        pr = pk.cr[0]
        for i in range(1, pk.np):
            m = dd_mul(p.hi, p.lo, xh, xl)
            pr = fabs(p.hi) * xr + absx * pr + pr * xr + 8.0 * U2 * fabs(m.hi)
            p = dd_add(m.hi, m.lo, pk.ch[i], pk.cl[i])
            pr += pk.cr[i] + 4.0 * U2 * (fabs(m.hi) + fabs(pk.ch[i]))
        rad += pr + 4.0 * U2 * (fabs(v.hi) + fabs(p.hi))
        v = dd_add(v.hi, v.lo, p.hi, p.lo)
    rad_out[0] = rad * 1.0625
    return v


def dd_exp(double ah, double al):
    cdef dd r = c_exp(ah, al)
    return r.hi, r.lo


def dd_log(double ah, double al):
    cdef dd r = c_log(ah, al)
    return r.hi, r.lo


def eval_dd(coeffs, double xh, double xl, double xr):
    cdef pcoeffs pk
    cdef double rad
    fill_packed(&pk, coeffs)
    cdef dd v = c_eval(&pk, xh, xl, xr, &rad)
    return v.hi, v.lo, rad


def floor_batch(coeffs, const int64_t[::1] ns, double tol):
    cdef pcoeffs pk
    fill_packed(&pk, coeffs)
    cdef Py_ssize_t count = ns.shape[0], i
    floors_arr = np.zeros(count, dtype=np.int64)
    rems_arr = np.zeros(count, dtype=np.float64)
    amb_arr = np.zeros(count, dtype=np.uint8)
    cdef int64_t[::1] floors = floors_arr
    cdef double[::1] rems = rems_arr
    cdef uint8_t[::1] amb = amb_arr
    cdef dd v
    cdef double rad, f, rem, slack, k
    with nogil:
        for i in range(count):
            v = c_eval(&pk, <double>ns[i], 0.0, 0.0, &rad)
            f = floor(v.hi)
            rem = (v.hi - f) + v.lo
            # adjust in integers: above 2**53 the double f +- 1 would round
            k = floor(rem)
            floors[i] = <int64_t>f + <int64_t>k
            rem -= k
            rems[i] = rem
            slack = rad + tol + 2.2e-16
            if rem <= slack or 1.0 - rem <= slack:
                amb[i] = 1
    return floors_arr, rems_arr, amb_arr


cdef inline u128 dist128(u128 p) noexcept nogil:
    cdef u128 half = (<u128>1) << 127
    if p <= half:
        return p
    return (<u128>0) - p


def segment_min(const int64_t[::1] floors, const uint8_t[::1] ok,
                uint64_t xi_hi, uint64_t xi_lo, Py_ssize_t start, Py_ssize_t end):
    cdef u128 xi = ((<u128>xi_hi) << 64) | xi_lo
    cdef u128 best = 0, p, d
    cdef Py_ssize_t best_idx = -1, i
    with nogil:
        for i in range(start, end):
            if not ok[i]:
                continue
            p = xi * <u128>(<i128>floors[i])
            d = dist128(p)
            if best_idx < 0 or d < best:
                best = d
                best_idx = i
    if best_idx < 0:
        return 0, 0, -1
    return <uint64_t>(best >> 64), <uint64_t>best, best_idx


def segment_min_multi(const int64_t[:, ::1] floors2d, const uint8_t[::1] ok,
                      const uint64_t[:, ::1] a_hi, const uint64_t[:, ::1] a_lo,
                      Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t rows = a_hi.shape[0], cols = a_hi.shape[1]
    cdef Py_ssize_t n, i, j, best_idx = -1
    cdef u128 best = 0, worst, acc, d
    cdef u128 a[16]
    if rows * cols > 16:
        raise ValueError("matrix larger than 4x4")
    for i in range(rows):
        for j in range(cols):
            a[i * cols + j] = ((<u128>a_hi[i, j]) << 64) | a_lo[i, j]
    with nogil:
        for n in range(start, end):
            if not ok[n]:
                continue
            worst = 0
            for i in range(rows):
                acc = 0
                for j in range(cols):
                    acc += a[i * cols + j] * <u128>(<i128>floors2d[j, n])
                d = dist128(acc)
                if d > worst:
                    worst = d
            if best_idx < 0 or worst < best:
                best = worst
                best_idx = n
    if best_idx < 0:
        return 0, 0, -1
    return <uint64_t>(best >> 64), <uint64_t>best, best_idx


cdef void pairwise(const double* re, const double* im, Py_ssize_t lo, Py_ssize_t hi,
                   double* out_re, double* out_im) noexcept nogil:
    cdef Py_ssize_t n = hi - lo, i, mid
    cdef double sr = 0.0, si = 0.0, r1, i1, r2, i2
    if n <= PAIRWISE_BLOCK:
        for i in range(lo, hi):
            sr += re[i]
            si += im[i]
        out_re[0] = sr
        out_im[0] = si
        return
    mid = lo + n // 2
    pairwise(re, im, lo, mid, &r1, &i1)
    pairwise(re, im, mid, hi, &r2, &i2)
    out_re[0] = r1 + r2
    out_im[0] = i1 + i2


def pairwise_sum(re_in, im_in):
    cdef double[::1] re = np.ascontiguousarray(re_in, dtype=np.float64)
    cdef double[::1] im = np.ascontiguousarray(im_in, dtype=np.float64)
    cdef double sr = 0.0, si = 0.0
    if re.shape[0] > 0:
        pairwise(&re[0], &im[0], 0, re.shape[0], &sr, &si)
    return sr, si


def segment_expsum(const int64_t[::1] floors, const double[::1] rems, weights,
                   uint64_t b_hi, uint64_t b_lo, double big, bint continuous,
                   Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t count = end - start, k, i
    if count <= 0:
        return 0.0, 0.0, 0.0
    cdef bint weighted = weights is not None
    cdef const double[::1] w
    if weighted:
        w = weights
    re_arr = np.empty(count, dtype=np.float64)
    im_arr = np.empty(count, dtype=np.float64)
    cdef double[::1] re = re_arr
    cdef double[::1] im = im_arr
    cdef u128 b = ((<u128>b_hi) << 64) | b_lo
    cdef double bf = (<double>b_hi) * TWO64 + (<double>b_lo) * TWO128
    cdef u128 p
    cdef double ph, r, wi, ang, absw = 0.0, sr, si
    with nogil:
        for k in range(count):
            i = start + k
            p = b * <u128>(<i128>floors[i])
            ph = (<double>(<uint64_t>(p >> 64))) * TWO64 + (<double>(<uint64_t>p)) * TWO128
            if continuous:
                r = rems[i]
                ph = ph + big * r + bf * r
                ph = ph - floor(ph)
            wi = w[i] if weighted else 1.0
            ang = TWOPI * ph
            re[k] = wi * cos(ang)
            im[k] = wi * sin(ang)
            absw += fabs(wi)
        pairwise(&re[0], &im[0], 0, count, &sr, &si)
    return sr, si, absw
