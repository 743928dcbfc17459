"""Pure-numpy reference implementations of the hot kernels.

Semantics must match ``_kernels_numba`` exactly up to floating-point
summation order; the backend-agreement test pins the two to 1e-12.
"""

import numpy as np


def eval_jet_batch(Z, mu, nu, coef):
    """Evaluate sum_k coef[k] * prod_j Z_j^mu[k,j] * conj(Z_j)^nu[k,j] at each row of Z.

    Z: (M, n) complex128, mu/nu: (K, n) int64, coef: (K,) complex128.
    Returns (M,) complex128.
    """
    if mu.shape[0] == 0:
        return np.zeros(Z.shape[0], dtype=np.complex128)
    hol = np.prod(Z[:, None, :] ** mu[None, :, :], axis=2)
    anti = np.prod(np.conj(Z)[:, None, :] ** nu[None, :, :], axis=2)
    return (hol * anti) @ coef


def eval_holo_batch(Z, expo, coef):
    """Evaluate a holomorphic polynomial sum_k coef[k] * Z^expo[k] at each row of Z."""
    if expo.shape[0] == 0:
        return np.zeros(Z.shape[0], dtype=np.complex128)
    return np.prod(Z[:, None, :] ** expo[None, :, :], axis=2) @ coef


def ray_first_crossing(p, dirs, mu, nu, coef, level, t_hi, n_coarse, n_bisect):
    """Smallest t > 0 with rho(p + t*dir) = level along each direction.

    Assumes rho(p) < level.  Brackets the first sign change of
    rho(p + t*dir) - level on a coarse grid up to t_hi[i], then bisects.
    Returns (M,) float64 with +inf where no crossing occurs before t_hi.
    """
    M = dirs.shape[0]
    out = np.full(M, np.inf)
    steps = (np.arange(1, n_coarse + 1) / n_coarse)  # (C,)
    ts = t_hi[:, None] * steps[None, :]              # (M, C)
    pts = p[None, None, :] + ts[:, :, None] * dirs[:, None, :]
    vals = eval_jet_batch(pts.reshape(-1, dirs.shape[1]), mu, nu, coef).real
    vals = vals.reshape(M, n_coarse) - level
    pos = vals > 0.0
    has = pos.any(axis=1)
    first = np.argmax(pos, axis=1)
    lo = np.where(first > 0, ts[np.arange(M), np.maximum(first - 1, 0)], 0.0)
    hi = ts[np.arange(M), first]
    lo = np.where(has, lo, 0.0)
    hi = np.where(has, hi, 0.0)
    idx = np.nonzero(has)[0]
    if idx.size:
        a = lo[idx]
        b = hi[idx]
        d = dirs[idx]
        for _ in range(n_bisect):
            mid = 0.5 * (a + b)
            v = eval_jet_batch(p[None, :] + mid[:, None] * d, mu, nu, coef).real - level
            gt = v > 0.0
            b = np.where(gt, mid, b)
            a = np.where(gt, a, mid)
        out[idx] = 0.5 * (a + b)
    return out
