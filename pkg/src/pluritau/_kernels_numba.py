"""Numba-compiled hot kernels: batched jet evaluation and ray-crossing sweeps.

These dominate runtime (feasibility grids in the extremal-map optimizer,
direction sweeps in the frame construction).  ``_kernels_numpy`` carries the
fallback with identical semantics.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _eval_jet_point(z, mu, nu, coef):
    acc = 0.0 + 0.0j
    K = mu.shape[0]
    n = z.shape[0]
    for k in range(K):
        term = coef[k]
        for j in range(n):
            zj = z[j]
            for _ in range(mu[k, j]):
                term *= zj
            zc = np.conj(zj)
            for _ in range(nu[k, j]):
                term *= zc
        acc += term
    return acc


@njit(cache=True)
def eval_jet_batch(Z, mu, nu, coef):
    M = Z.shape[0]
    out = np.empty(M, dtype=np.complex128)
    for i in range(M):
        out[i] = _eval_jet_point(Z[i], mu, nu, coef)
    return out


@njit(cache=True)
def eval_holo_batch(Z, expo, coef):
    M = Z.shape[0]
    K = expo.shape[0]
    n = Z.shape[1]
    out = np.empty(M, dtype=np.complex128)
    for i in range(M):
        acc = 0.0 + 0.0j
        for k in range(K):
            term = coef[k]
            for j in range(n):
                zj = Z[i, j]
                for _ in range(expo[k, j]):
                    term *= zj
            acc += term
        out[i] = acc
    return out


@njit(cache=True)
def ray_first_crossing(p, dirs, mu, nu, coef, level, t_hi, n_coarse, n_bisect):
    M = dirs.shape[0]
    n = dirs.shape[1]
    out = np.full(M, np.inf)
    z = np.empty(n, dtype=np.complex128)
    for i in range(M):
        T = t_hi[i]
        lo = 0.0
        hi = -1.0
        prev = 0.0
        for c in range(1, n_coarse + 1):
            t = T * c / n_coarse
            for j in range(n):
                z[j] = p[j] + t * dirs[i, j]
            v = _eval_jet_point(z, mu, nu, coef).real - level
            if v > 0.0:
                lo = prev
                hi = t
                break
            prev = t
        if hi < 0.0:
            continue
        a = lo
        b = hi
        for _ in range(n_bisect):
            mid = 0.5 * (a + b)
            for j in range(n):
                z[j] = p[j] + mid * dirs[i, j]
            v = _eval_jet_point(z, mu, nu, coef).real - level
            if v > 0.0:
                b = mid
            else:
                a = mid
        out[i] = 0.5 * (a + b)
    return out
