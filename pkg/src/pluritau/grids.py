"""Deterministic low-discrepancy sample grids on spheres, balls, and boxes."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def halton(count: int, dim: int) -> np.ndarray:
    """Unscrambled Halton points in (0,1)^dim; index 0 (all zeros) skipped."""
    sampler = qmc.Halton(d=dim, scramble=False)
    sampler.fast_forward(1)
    return sampler.random(count)


def real_sphere_grid(real_dim: int, count: int) -> np.ndarray:
    """Deterministic quasi-uniform directions on S^(real_dim-1)."""
    if real_dim == 1:
        reps = (count + 1) // 2
        return np.array([1.0, -1.0] * reps)[:count, None]
    if real_dim == 2:
        th = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    u = halton(count, real_dim)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None]


def complex_sphere_grid(n: int, count: int) -> np.ndarray:
    """Directions on the unit sphere of C^n, returned as (count, n) complex."""
    g = real_sphere_grid(2 * n, count)
    return g[:, 0::2] + 1j * g[:, 1::2]


def complex_ball_grid(n: int, count: int, radii=None) -> np.ndarray:
    """Points in the open unit ball of C^n: shells of sphere directions."""
    if radii is None:
        u = halton(count, 2 * n + 1)
        g = ndtri(np.clip(u[:, :-1], 1e-12, 1 - 1e-12))
        norms = np.linalg.norm(g, axis=1)
        norms[norms == 0] = 1.0
        r = u[:, -1] ** (1.0 / (2 * n))
        pts = g / norms[:, None] * r[:, None]
        return pts[:, 0::2] + 1j * pts[:, 1::2]
    per = max(1, count // len(radii))
    chunks = [r * complex_sphere_grid(n, per) for r in radii]
    return np.concatenate(chunks, axis=0)


def box_grid(box: np.ndarray, per_dim: int) -> np.ndarray:
    """Uniform tensor grid over a real box given as (d, 2) lo/hi rows.

    Returns complex points of shape (per_dim**d_half..., d//2) pairing
    consecutive real coordinates into complex ones.
    """
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    flat = np.stack([m.ravel() for m in mesh], axis=1)
    return flat[:, 0::2] + 1j * flat[:, 1::2]


def angle_grid(dims: int, per_dim: int, cap: int | None = None) -> np.ndarray:
    """Directions on S^dims from a structured angle lattice.

    per_dim applies to each of the `dims` angular dimensions; when a cap is
    given the resolution is reduced so the total stays within it.
    """
    if cap is not None and per_dim ** dims > cap:
        per_dim = max(6, int(cap ** (1.0 / dims)))
    # Hyperspherical angles: last angle runs over the full circle.
    axes = [np.linspace(0.0, np.pi, per_dim, endpoint=True) for _ in range(dims - 1)]
    axes.append(np.linspace(0.0, 2.0 * np.pi, per_dim, endpoint=False))
    mesh = np.meshgrid(*axes, indexing="ij")
    angles = np.stack([m.ravel() for m in mesh], axis=1)
    M = angles.shape[0]
    out = np.empty((M, dims + 1))
    sin_prod = np.ones(M)
    for d in range(dims):
        out[:, d] = sin_prod * np.cos(angles[:, d])
        sin_prod = sin_prod * np.sin(angles[:, d])
    out[:, dims] = sin_prod
    return out
