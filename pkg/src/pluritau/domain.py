"""Domains {rho < 0}: differential queries, ray/level intersections, catalogue.

A domain carries either an exact polynomial defining function (a RealJet on
all of C^n) or a smooth callable; derivative queries on callables go through
local Taylor jets (exact oracle if the callable provides one, finite
differences otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import backend
from .grids import complex_sphere_grid, halton
from .polyjet import RealJet, taylor_jet

RAY_COARSE = 256
RAY_BISECT = 80


class DomainError(ValueError):
    pass


def _unit(mu_index: int, n: int) -> tuple[int, ...]:
    return tuple(1 if i == mu_index else 0 for i in range(n))


def _zeros(n: int) -> tuple[int, ...]:
    return (0,) * n


@dataclass(frozen=True, eq=False)
class DomainSpec:
    rho: object                 # RealJet or callable on complex n-vectors
    dim: int
    convex: bool = False
    corank_one: bool = False
    type_2m: int | None = None
    box: np.ndarray | None = None   # (2n, 2) lo/hi per real coordinate
    witness: np.ndarray | None = None
    kind: str = "polynomial"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.box is None:
            object.__setattr__(self, "box", np.tile([-4.0, 4.0], (2 * self.dim, 1)))
        else:
            object.__setattr__(self, "box", np.asarray(self.box, dtype=float))
        if self.box.shape != (2 * self.dim, 2):
            raise DomainError(f"box must have shape ({2 * self.dim}, 2)")
        if self.witness is None:
            raise DomainError("an interior witness point is required")
        object.__setattr__(self, "witness",
                           np.asarray(self.witness, dtype=np.complex128))
        if self.rho_value(self.witness) >= 0:
            raise DomainError("witness point is not interior (rho >= 0 there)")

    # -- defining function queries ----------------------------------------

    def is_polynomial(self) -> bool:
        return isinstance(self.rho, RealJet)

    def rho_batch(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.complex128)
        if self.is_polynomial():
            return self.rho.evaluate_batch(Z)
        try:
            vals = self.rho(Z)
            vals = np.asarray(vals, dtype=float)
            if vals.shape == (Z.shape[0],):
                return vals
        except (TypeError, ValueError):
            pass
        return np.array([float(self.rho(z)) for z in Z])

    def rho_value(self, z) -> float:
        z = np.asarray(z, dtype=np.complex128).reshape(1, -1)
        return float(self.rho_batch(z)[0])

    def local_jet(self, p, degree_bound: int) -> RealJet:
        return taylor_jet(self.rho, p, degree_bound)

    def gradient(self, p) -> np.ndarray:
        """Vector of d rho / d z_j at p."""
        if self.is_polynomial():
            return self.rho.gradient(p)
        jet = self.local_jet(p, 2)
        n = self.dim
        return np.array([jet.coeff(_unit(j, n), _zeros(n)) for j in range(n)],
                        dtype=np.complex128)

    def complex_hessian(self, p) -> np.ndarray:
        if self.is_polynomial():
            return self.rho.complex_hessian(p)
        jet = self.local_jet(p, 2)
        n = self.dim
        H = np.empty((n, n), dtype=np.complex128)
        for j in range(n):
            for k in range(n):
                H[j, k] = jet.coeff(_unit(j, n), _unit(k, n))
        return H

    def scale(self) -> float:
        if self.is_polynomial():
            return max(self.rho.scale(), 1.0)
        return max(abs(self.rho_value(self.witness)), 1.0)

    # -- geometry ----------------------------------------------------------

    def box_exit(self, p, direction) -> float:
        """Largest t with the segment p + s*direction, s in [0, t], inside the box."""
        x = np.empty(2 * self.dim)
        d = np.empty(2 * self.dim)
        p = np.asarray(p, dtype=np.complex128)
        direction = np.asarray(direction, dtype=np.complex128)
        x[0::2], x[1::2] = p.real, p.imag
        d[0::2], d[1::2] = direction.real, direction.imag
        t = math.inf
        for c in range(2 * self.dim):
            if d[c] > 1e-300:
                t = min(t, (self.box[c, 1] - x[c]) / d[c])
            elif d[c] < -1e-300:
                t = min(t, (self.box[c, 0] - x[c]) / d[c])
        if not math.isfinite(t) or t <= 0:
            raise DomainError("ray does not move into the bounding box")
        return t


@dataclass(frozen=True)
class BoundaryPoint:
    point: np.ndarray
    gradient: np.ndarray
    residual: float

    def validate(self, spec: DomainSpec, tol: float = 1e-10) -> None:
        if self.residual > tol * spec.scale():
            raise DomainError(f"boundary residual {self.residual} too large")
        if np.linalg.norm(self.gradient) == 0:
            raise DomainError("vanishing gradient at boundary point")


def levi_form(spec: DomainSpec, p, V, W) -> complex:
    """Sum_jk d^2 rho/dz_j dzbar_k (p) V_j conj(W_k); Hermitian in (V, W)."""
    V = np.asarray(V, dtype=np.complex128)
    W = np.asarray(W, dtype=np.complex128)
    if V.shape != (spec.dim,) or W.shape != (spec.dim,):
        raise DomainError("levi_form vectors must have the domain dimension")
    H = spec.complex_hessian(p)
    return complex(V @ H @ np.conj(W))


def tangential_levi_eigenvalues(spec: DomainSpec, p) -> np.ndarray:
    """Eigenvalues of the Levi form restricted to the complex tangent space at p."""
    g = spec.gradient(p)
    ng = np.linalg.norm(g)
    if ng == 0:
        raise DomainError("vanishing gradient; no tangent space")
    # Orthonormal basis of {v : sum v_j g_j = 0}.
    A = np.conj(g)[None, :] / ng
    _, _, vh = np.linalg.svd(A)
    B = vh[1:].conj().T           # (n, n-1), columns span the tangent space
    H = spec.complex_hessian(p)
    T = B.conj().T @ H @ B
    return np.linalg.eigvalsh(0.5 * (T + T.conj().T))


def boundary_shoot(spec: DomainSpec, p, direction, level: float,
                   coarse: int = RAY_COARSE, bisect: int = RAY_BISECT) -> float:
    """Smallest t > 0 with rho(p + t*direction) = level.

    Returns +inf when the ray leaves the bounding box before crossing
    (unbounded directions on model domains).
    """
    p = np.asarray(p, dtype=np.complex128)
    direction = np.asarray(direction, dtype=np.complex128)
    nd = np.linalg.norm(direction)
    if nd == 0:
        raise DomainError("zero direction")
    direction = direction / nd
    if spec.rho_value(p) >= level:
        raise DomainError("shoot requires rho(p) < level")
    t_hi = spec.box_exit(p, direction)
    if spec.is_polynomial():
        mu, nu, coef = spec.rho.arrays()
        t = backend.ray_first_crossing(
            p, direction[None, :], mu, nu, coef, level,
            np.array([t_hi]), coarse, bisect)[0]
        return float(t)
    # Callable path: coarse bracket + brentq.
    from scipy.optimize import brentq
    ts = t_hi * np.arange(1, coarse + 1) / coarse
    prev = 0.0
    for t in ts:
        v = spec.rho_value(p + t * direction) - level
        if v > 0:
            f = lambda s: spec.rho_value(p + s * direction) - level
            return float(brentq(f, prev, t, xtol=1e-15, rtol=1e-14))
        prev = t
    return math.inf


def shoot_many(spec: DomainSpec, p, directions: np.ndarray, level: float,
               coarse: int = RAY_COARSE, bisect: int = RAY_BISECT) -> np.ndarray:
    """Vectorized boundary_shoot over unit directions (rows)."""
    p = np.asarray(p, dtype=np.complex128)
    directions = np.asarray(directions, dtype=np.complex128)
    norms = np.linalg.norm(directions, axis=1)
    directions = directions / norms[:, None]
    t_hi = np.array([spec.box_exit(p, d) for d in directions])
    if spec.is_polynomial():
        mu, nu, coef = spec.rho.arrays()
        return backend.ray_first_crossing(p, np.ascontiguousarray(directions),
                                          mu, nu, coef, level, t_hi,
                                          coarse, bisect)
    return np.array([boundary_shoot(spec, p, d, level, coarse, bisect)
                     for d in directions])


def boundary_point(spec: DomainSpec, p, direction, level: float = 0.0) -> BoundaryPoint:
    t = boundary_shoot(spec, p, direction, level)
    if not math.isfinite(t):
        raise DomainError("ray does not reach the level set")
    direction = np.asarray(direction, dtype=np.complex128)
    z = np.asarray(p, dtype=np.complex128) + t * direction / np.linalg.norm(direction)
    return BoundaryPoint(point=z, gradient=spec.gradient(z),
                         residual=abs(spec.rho_value(z) - level))


def boundary_grid(spec: DomainSpec, count: int, level: float = 0.0,
                  anchor=None) -> np.ndarray:
    """Deterministic boundary samples: rays from the witness through a sphere grid."""
    anchor = spec.witness if anchor is None else np.asarray(anchor, dtype=np.complex128)
    dirs = complex_sphere_grid(spec.dim, count)
    ts = shoot_many(spec, anchor, dirs, level)
    good = np.isfinite(ts)
    return anchor[None, :] + ts[good, None] * dirs[good]


def interior_samples(spec: DomainSpec, count: int, margin: float = 1e-9) -> np.ndarray:
    """Deterministic interior points: Halton points of the box filtered by rho < -margin."""
    lo = spec.box[:, 0]
    hi = spec.box[:, 1]
    out = []
    offset = 0
    sampler_count = max(64, 4 * count)
    while len(out) < count and offset < 50 * sampler_count:
        u = halton(sampler_count, 2 * spec.dim)
        pts = lo + u * (hi - lo)
        Z = pts[:, 0::2] + 1j * pts[:, 1::2]
        vals = spec.rho_batch(Z)
        for z, v in zip(Z, vals):
            if v < -margin:
                out.append(z)
                if len(out) == count:
                    break
        offset += sampler_count
    if len(out) < count:
        raise DomainError("could not sample enough interior points")
    return np.array(out)


def sampled_convexity_check(spec: DomainSpec, pairs: int = 64) -> bool:
    """Midpoint test on sampled pairs of interior points."""
    pts = interior_samples(spec, 2 * pairs)
    a, b = pts[:pairs], pts[pairs:2 * pairs]
    mid = 0.5 * (a + b)
    return bool(np.all(spec.rho_batch(mid) < 0))


# -- catalogue ---------------------------------------------------------------


def _bounded_box(n: int, radius: float) -> np.ndarray:
    r = radius + 0.1
    return np.tile([-r, r], (2 * n, 1))


def ball(n: int, radius: float = 1.0) -> DomainSpec:
    coeffs = {(_unit(j, n), _unit(j, n)): 1.0 for j in range(n)}
    coeffs[(_zeros(n), _zeros(n))] = -radius ** 2
    jet = RealJet(n, 2, coeffs)
    return DomainSpec(jet, n, convex=True, corank_one=(n <= 2), type_2m=2,
                      box=_bounded_box(n, radius), witness=np.zeros(n),
                      kind="ball", meta={"radius": radius})


def ellipsoid(semiaxes) -> DomainSpec:
    semiaxes = tuple(float(a) for a in semiaxes)
    n = len(semiaxes)
    coeffs = {(_unit(j, n), _unit(j, n)): 1.0 / semiaxes[j] ** 2 for j in range(n)}
    coeffs[(_zeros(n), _zeros(n))] = -1.0
    jet = RealJet(n, 2, coeffs)
    return DomainSpec(jet, n, convex=True, corank_one=(n <= 2), type_2m=2,
                      box=_bounded_box(n, max(semiaxes)), witness=np.zeros(n),
                      kind="polynomial", meta={"semiaxes": semiaxes})


def egg(n: int, m: int) -> DomainSpec:
    """E_{2m} = {|z_1|^{2m} + |z_2|^2 + ... + |z_n|^2 < 1}; convex, Levi corank one."""
    if m < 1:
        raise DomainError("egg exponent m must be >= 1")
    coeffs = {((m,) + (0,) * (n - 1), (m,) + (0,) * (n - 1)): 1.0}
    for j in range(1, n):
        coeffs[(_unit(j, n), _unit(j, n))] = 1.0
    coeffs[(_zeros(n), _zeros(n))] = -1.0
    jet = RealJet(n, 2 * m, coeffs)
    return DomainSpec(jet, n, convex=True, corank_one=True, type_2m=2 * m,
                      box=_bounded_box(n, 1.0), witness=np.zeros(n),
                      kind="egg", meta={"m": m})


class MaxNormRho:
    """max_j |z_j|^2 / r_j^2 - 1: the polydisc's non-smooth defining function."""

    def __init__(self, radii):
        self.radii = np.asarray(radii, dtype=float)

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        q = np.abs(z) ** 2 / self.radii ** 2
        if z.ndim == 1:
            return float(np.max(q) - 1.0)
        return np.max(q, axis=1) - 1.0


def polydisc(radii) -> DomainSpec:
    """Product of discs; corners make it unusable for frame/normal-form paths."""
    radii = tuple(float(r) for r in radii)
    n = len(radii)
    return DomainSpec(MaxNormRho(radii), n, convex=True, corank_one=False,
                      type_2m=None, box=_bounded_box(n, max(radii)),
                      witness=np.zeros(n), kind="polydisc",
                      meta={"radii": radii})


def convex_model(b, P: RealJet, box_radius: float = 4.0) -> DomainSpec:
    """Unbounded convex local model -1 + Re(sum b_a z_a) + P('z)."""
    b = np.asarray(b, dtype=np.complex128)
    n = len(b)
    if P.dim != n:
        raise DomainError("model polynomial must share the ambient dimension")
    for (mu, nu) in P.coeffs:
        if mu[n - 1] or nu[n - 1]:
            raise DomainError("model polynomial may not involve z_n")
    bound = max(P.degree_bound, 1)
    coeffs = dict(P.coeffs)
    zero = (_zeros(n), _zeros(n))
    coeffs[zero] = coeffs.get(zero, 0j) - 1.0
    for j in range(n):
        if b[j] != 0:
            k1 = (_unit(j, n), _zeros(n))
            coeffs[k1] = coeffs.get(k1, 0j) + 0.5 * b[j]
            k2 = (_zeros(n), _unit(j, n))
            coeffs[k2] = coeffs.get(k2, 0j) + 0.5 * np.conj(b[j])
    jet = RealJet(n, bound, coeffs)
    witness = np.zeros(n)
    if jet.evaluate(witness) >= 0:
        raise DomainError("origin must be interior to the convex model")
    return DomainSpec(jet, n, convex=True, corank_one=False, type_2m=P.degree_bound,
                      box=np.tile([-box_radius, box_radius], (2 * n, 1)),
                      witness=witness, kind="model_cvx")


def corank1_model(P: RealJet, n: int, box_radius: float = 4.0) -> DomainSpec:
    """Unbounded corank-one model 2 Re z_n + P(z_1, conj z_1) + sum_{2..n-1} |z_a|^2."""
    if P.dim != 1:
        raise DomainError("model polynomial must be in z_1 alone")
    coeffs = {}
    for (mu, nu), c in P.coeffs.items():
        coeffs[((mu[0],) + (0,) * (n - 1), (nu[0],) + (0,) * (n - 1))] = c
    coeffs[(_unit(n - 1, n), _zeros(n))] = 1.0
    coeffs[(_zeros(n), _unit(n - 1, n))] = 1.0
    for a in range(1, n - 1):
        coeffs[(_unit(a, n), _unit(a, n))] = 1.0
    bound = max(P.degree_bound, 2)
    jet = RealJet(n, bound, coeffs)
    witness = np.zeros(n, dtype=np.complex128)
    witness[n - 1] = -1.0
    return DomainSpec(jet, n, convex=False, corank_one=True, type_2m=P.degree_bound,
                      box=np.tile([-box_radius, box_radius], (2 * n, 1)),
                      witness=witness, kind="model_corank1")


def from_jet(jet: RealJet, convex: bool = False, corank_one: bool = False,
             type_2m: int | None = None, box: np.ndarray | None = None,
             witness=None) -> DomainSpec:
    if witness is None:
        raise DomainError("from_jet needs an interior witness point")
    return DomainSpec(jet, jet.dim, convex=convex, corank_one=corank_one,
                      type_2m=type_2m, box=box, witness=witness,
                      kind="polynomial")


# -- serialization -----------------------------------------------------------


def domain_to_json(spec: DomainSpec) -> dict:
    d = {"kind": spec.kind, "n": spec.dim}
    if spec.kind == "ball":
        d["radius"] = spec.meta["radius"]
        return d
    if spec.kind == "egg":
        d["m"] = spec.meta["m"]
        return d
    if spec.kind == "polydisc":
        d["radii"] = list(spec.meta["radii"])
        return d
    d["rho"] = spec.rho.to_json_dict()
    d["box"] = [list(row) for row in spec.box]
    d["convex"] = spec.convex
    d["corank_one"] = spec.corank_one
    if spec.type_2m is not None:
        d["m"] = spec.type_2m // 2
    d["witness"] = [[z.real, z.imag] for z in spec.witness]
    return d


def domain_from_json(d: dict) -> DomainSpec:
    kind = d["kind"]
    n = int(d["n"])
    if kind == "ball":
        return ball(n, float(d.get("radius", 1.0)))
    if kind == "egg":
        return egg(n, int(d["m"]))
    if kind == "polydisc":
        return polydisc(d["radii"])
    if kind in ("polynomial", "model_cvx", "model_corank1"):
        jet = RealJet.from_json_dict(d["rho"])
        witness = np.array([complex(re, im) for re, im in d["witness"]])
        spec = DomainSpec(jet, n,
                          convex=bool(d.get("convex", False)),
                          corank_one=bool(d.get("corank_one", False)),
                          type_2m=2 * int(d["m"]) if "m" in d else None,
                          box=np.asarray(d["box"], dtype=float),
                          witness=witness, kind=kind)
        return spec
    raise DomainError(f"unknown domain kind {kind!r}")
