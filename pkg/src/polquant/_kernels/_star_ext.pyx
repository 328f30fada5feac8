# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled row-pair star contraction; same contract as the numpy version."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def star_rows(const cnp.int64_t[:, ::1] A, const double complex[::1] ca,
              const cnp.int64_t[:, ::1] B, const double complex[::1] cb,
              Py_ssize_t n,
              const cnp.int64_t[:, ::1] pat_alpha, const cnp.int64_t[:, ::1] pat_beta,
              const cnp.int64_t[::1] pat_r, const double complex[::1] pat_coef,
              const cnp.int8_t[:, ::1] sign_table, const double[:, ::1] fall,
              cnp.int64_t max_w, cnp.int64_t max_h):
    cdef Py_ssize_t na = A.shape[0], nb = B.shape[0], ncols = A.shape[1]
    cdef Py_ssize_t npat = pat_r.shape[0]
    cdef Py_ssize_t i, j, p, t, cnt = 0, pos
    cdef Py_ssize_t u0 = 2, c0 = 2 + n, m0 = 2 + 2 * n
    cdef cnp.int64_t r, wa, wb
    cdef int s, ok
    cdef double complex c
    cdef cnp.int64_t[::1] wA = np.empty(na, dtype=np.int64)
    cdef cnp.int64_t[::1] wB = np.empty(nb, dtype=np.int64)
    for i in range(na):
        wa = A[i, 1]
        for t in range(n):
            wa += A[i, u0 + t] + A[i, c0 + t]
        wA[i] = wa
    for j in range(nb):
        wb = B[j, 1]
        for t in range(n):
            wb += B[j, u0 + t] + B[j, c0 + t]
        wB[j] = wb

    # pass 1: count surviving outputs
    for i in range(na):
        for j in range(nb):
            if sign_table[A[i, 0], B[j, 0]] == 0:
                continue
            for p in range(npat):
                r = pat_r[p]
                if A[i, 1] + B[j, 1] + r > max_h or wA[i] + wB[j] - r > max_w:
                    continue
                ok = 1
                for t in range(n):
                    if A[i, c0 + t] < pat_beta[p, t] or B[j, u0 + t] < pat_alpha[p, t]:
                        ok = 0
                        break
                if ok:
                    cnt += 1

    out = np.empty((cnt, ncols), dtype=np.int64)
    outc = np.empty(cnt, dtype=complex)
    cdef cnp.int64_t[:, ::1] O = out
    cdef double complex[::1] OC = outc
    pos = 0
    for i in range(na):
        for j in range(nb):
            s = sign_table[A[i, 0], B[j, 0]]
            if s == 0:
                continue
            for p in range(npat):
                r = pat_r[p]
                if A[i, 1] + B[j, 1] + r > max_h or wA[i] + wB[j] - r > max_w:
                    continue
                ok = 1
                for t in range(n):
                    if A[i, c0 + t] < pat_beta[p, t] or B[j, u0 + t] < pat_alpha[p, t]:
                        ok = 0
                        break
                if not ok:
                    continue
                c = ca[i] * cb[j] * pat_coef[p] * s
                O[pos, 0] = A[i, 0] | B[j, 0]
                O[pos, 1] = A[i, 1] + B[j, 1] + r
                for t in range(n):
                    c = c * fall[A[i, c0 + t], pat_beta[p, t]] * fall[B[j, u0 + t], pat_alpha[p, t]]
                    O[pos, u0 + t] = A[i, u0 + t] + B[j, u0 + t] - pat_alpha[p, t]
                    O[pos, c0 + t] = A[i, c0 + t] - pat_beta[p, t] + B[j, c0 + t]
                for t in range(m0, ncols):
                    O[pos, t] = A[i, t] + B[j, t]
                OC[pos] = c
                pos += 1
    return out, outc
