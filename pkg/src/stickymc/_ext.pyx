# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled lane of the hot kernels.

Arithmetic mirrors _ref.py operation for operation (same counter-based
draws, same floating-point evaluation order, ndtri from the same Cephes
implementation), so both lanes return bit-identical arrays.  Built with
-ffp-contract=off so the compiler cannot fuse the multiply-adds that
numpy evaluates as separate operations.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

from scipy.special.cython_special cimport ndtri

cnp.import_array()

cdef extern from *:
    """
    #define MIX1 0xBF58476D1CE4E5B9ULL
    #define MIX2 0x94D049BB133111EBULL
    #define GOLDEN 0x9E3779B97F4A7C15ULL
    static inline unsigned long long stickymc_mix64(unsigned long long z) {
        z = (z ^ (z >> 30)) * MIX1;
        z = (z ^ (z >> 27)) * MIX2;
        return z ^ (z >> 31);
    }
    static inline double stickymc_u01(unsigned long long key, unsigned long long ctr) {
        unsigned long long z = stickymc_mix64(key + (ctr + 1ULL) * GOLDEN);
        return ((double)(z >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }
    """
    unsigned long long stickymc_mix64(unsigned long long z) nogil
    double stickymc_u01(unsigned long long key, unsigned long long ctr) nogil


def evolve_kernel(key, n_steps, kind_code, param):
    """Kernel probabilities after n_steps from delta_0 (see _ref)."""
    cdef unsigned long long k = <unsigned long long> key
    cdef Py_ssize_t n = <Py_ssize_t> n_steps
    cdef int kind = <int> kind_code
    cdef double delta = <double> param
    out_arr = np.empty(n + 1, dtype=np.float64)
    buf_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] cur = out_arr
    cdef double[::1] nxt = buf_arr
    cdef double[::1] tmp
    cdef Py_ssize_t m, i
    cdef long long site
    cdef unsigned long long ctr, xbits
    cdef double w, u, down, prev_up
    cur[0] = 1.0
    with nogil:
        for m in range(n):
            prev_up = 0.0
            for i in range(m + 1):
                if kind == 0:
                    w = 0.5
                else:
                    site = -m + 2 * i
                    xbits = <unsigned long long> (site & 0xFFFFFFFFLL)
                    ctr = ((<unsigned long long> m) << 32) ^ xbits
                    u = stickymc_u01(k, ctr)
                    w = delta if u < 0.5 else 1.0 - delta
                down = cur[i] * (1.0 - w)
                if i == 0:
                    nxt[0] = down
                else:
                    nxt[i] = down + prev_up
                prev_up = cur[i] * w
            nxt[m + 1] = prev_up
            tmp = cur
            cur = nxt
            nxt = tmp
    if n % 2 == 1:
        return buf_arr
    return out_arr


def two_point_batch(keys_w, keys_s, keys_sign, n_steps, dt, lam, idx_out):
    """Batch two-point sticky pairs; see _ref.two_point_batch."""
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] kw = np.ascontiguousarray(keys_w, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] ks = np.ascontiguousarray(keys_s, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] kg = np.ascontiguousarray(keys_sign, dtype=np.uint64)
    cdef Py_ssize_t n = <Py_ssize_t> n_steps
    cdef double h = <double> dt
    cdef double lam_ = <double> lam
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.ascontiguousarray(idx_out, dtype=np.int64)
    cdef Py_ssize_t n_paths = kw.shape[0]
    cdef Py_ssize_t n_out = idx.shape[0]

    x_arr = np.empty((n_out, n_paths), dtype=np.float64)
    y_arr = np.empty((n_out, n_paths), dtype=np.float64)
    v_arr = np.empty((n_out, n_paths), dtype=np.float64)
    g_arr = np.empty((n_out, n_paths), dtype=np.float64)
    cdef double[:, ::1] xo = x_arr
    cdef double[:, ::1] yo = y_arr
    cdef double[:, ::1] vo = v_arr
    cdef double[:, ::1] go = g_arr

    b_arr = np.empty(n + 1, dtype=np.float64)
    m_arr = np.empty(n + 1, dtype=np.float64)
    t_arr = np.empty(n + 1, dtype=np.float64)
    v_work = np.empty(n + 1, dtype=np.float64)
    d_work = np.empty(n + 1, dtype=np.float64)
    s_work = np.empty(n + 1, dtype=np.float64)
    g_work = np.empty(n + 1, dtype=np.float64)
    e_arr = np.empty(n + 1, dtype=np.int64)
    sg_arr = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] b = b_arr
    cdef double[::1] mrun = m_arr
    cdef double[::1] tc = t_arr
    cdef double[::1] vv = v_work
    cdef double[::1] dd = d_work
    cdef double[::1] ss = s_work
    cdef double[::1] gg = g_work
    cdef long long[::1] exc = e_arr
    cdef double[::1] signs = sg_arr
    cdef long long[::1] iv = idx

    cdef unsigned long long[::1] kwv = kw
    cdef unsigned long long[::1] ksv = ks
    cdef unsigned long long[::1] kgv = kg

    cdef Py_ssize_t p, i, j, q
    cdef unsigned long long key
    cdef double sqdt = sqrt(h)
    cdef double sqrt2 = sqrt(2.0)
    cdef double c = sqrt2 / lam_
    cdef double acc, z, babs_i, tj, frac, ustar, babs_star, dv, ds_st, ds_fr
    cdef double babs_lo, babs_hi
    cdef Py_ssize_t ii

    with nogil:
        for p in range(n_paths):
            key = kwv[p]
            b[0] = 0.0
            acc = 0.0
            for i in range(n):
                z = ndtri(stickymc_u01(key, <unsigned long long> i))
                acc = acc + z * sqdt
                b[i + 1] = acc
            mrun[0] = b[0]
            exc[0] = 1
            for i in range(1, n + 1):
                mrun[i] = mrun[i - 1] if mrun[i - 1] > b[i] else b[i]
                exc[i] = exc[i - 1] + (1 if mrun[i] - b[i] == 0.0 else 0)
            key = kgv[p]
            for i in range(n + 1):
                signs[i] = -1.0 if stickymc_u01(key, <unsigned long long> i) < 0.5 else 1.0
            for i in range(n + 1):
                tc[i] = h * i + c * mrun[i]
            ii = 0
            for j in range(n + 1):
                tj = h * j
                while ii + 1 <= n and tc[ii + 1] <= tj:
                    ii += 1
                i = ii if ii < n - 1 else n - 1
                frac = (tj - tc[i]) / (tc[i + 1] - tc[i])
                ustar = h * i + frac * h
                dv = tj - ustar
                vv[j] = dv if dv > 0.0 else 0.0
                babs_lo = mrun[i] - b[i]
                babs_hi = mrun[i + 1] - b[i + 1]
                babs_star = babs_lo + frac * (babs_hi - babs_lo)
                dd[j] = sqrt2 * signs[exc[i]] * babs_star
            key = ksv[p]
            ss[0] = 0.0
            gg[0] = 0.0
            acc = 0.0
            z = 0.0
            for j in range(n):
                dv = vv[j + 1] - vv[j]
                if dv < 0.0:
                    dv = 0.0
                if dv > h:
                    dv = h
                ds_st = sqrt(4.0 * dv) * ndtri(stickymc_u01(key, <unsigned long long> (2 * j)))
                ds_fr = sqrt(2.0 * (h - dv)) * ndtri(stickymc_u01(key, <unsigned long long> (2 * j + 1)))
                acc = acc + (ds_st + ds_fr)
                z = z + 0.5 * ds_st
                ss[j + 1] = acc
                gg[j + 1] = z
            for q in range(n_out):
                j = iv[q]
                xo[q, p] = 0.5 * (ss[j] + dd[j])
                yo[q, p] = 0.5 * (ss[j] - dd[j])
                vo[q, p] = vv[j]
                go[q, p] = gg[j]

    return x_arr, y_arr, v_arr, g_arr
