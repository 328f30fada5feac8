"""Vectorized numpy implementation of the row-pair star contraction.

Row layout (int64): [mask, h, u_0..u_{n-1}, cu_0..cu_{n-1}, qx..., py...].
"""

import numpy as np


def star_rows(A, ca, B, cb, n, pat_alpha, pat_beta, pat_r, pat_coef, sign_table, fall, max_w, max_h):
    """Return unmerged (rows, coefs) of the product of two row-encoded elements."""
    ncols = A.shape[1]
    if len(A) == 0 or len(B) == 0:
        return np.zeros((0, ncols), dtype=np.int64), np.zeros(0, dtype=complex)
    u0, c0, m0 = 2, 2 + n, 2 + 2 * n
    Au, Acu = A[:, u0:u0 + n], A[:, c0:c0 + n]
    Bu, Bcu = B[:, u0:u0 + n], B[:, c0:c0 + n]
    wA = Au.sum(1) + Acu.sum(1) + A[:, 1]
    wB = Bu.sum(1) + Bcu.sum(1) + B[:, 1]
    sgn = sign_table[A[:, 0][:, None], B[:, 0][None, :]]
    base_ok = sgn != 0
    hsum = A[:, 1][:, None] + B[:, 1][None, :]
    wsum = wA[:, None] + wB[None, :]
    out_rows, out_c = [], []
    for alpha, beta, r, pc in zip(pat_alpha, pat_beta, pat_r, pat_coef):
        okA = (Acu >= beta).all(1)
        okB = (Bu >= alpha).all(1)
        ok = base_ok & okA[:, None] & okB[None, :] & (hsum + r <= max_h) & (wsum - r <= max_w)
        ii, jj = np.nonzero(ok)
        if len(ii) == 0:
            continue
        a, b = A[ii], B[jj]
        rows = np.empty((len(ii), ncols), dtype=np.int64)
        rows[:, 0] = a[:, 0] | b[:, 0]
        rows[:, 1] = a[:, 1] + b[:, 1] + r
        rows[:, u0:u0 + n] = a[:, u0:u0 + n] + b[:, u0:u0 + n] - alpha
        rows[:, c0:c0 + n] = a[:, c0:c0 + n] - beta + b[:, c0:c0 + n]
        rows[:, m0:] = a[:, m0:] + b[:, m0:]
        coef = ca[ii] * cb[jj] * (pc * sgn[ii, jj])
        for j in range(n):
            if beta[j]:
                coef = coef * fall[a[:, c0 + j], beta[j]]
            if alpha[j]:
                coef = coef * fall[b[:, u0 + j], alpha[j]]
        out_rows.append(rows)
        out_c.append(coef)
    if not out_rows:
        return np.zeros((0, ncols), dtype=np.int64), np.zeros(0, dtype=complex)
    return np.concatenate(out_rows), np.concatenate(out_c)
