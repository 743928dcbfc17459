"""Orthogonal farthest-line frames and polydisc radii on convex domains.

At (p, eps) the level set {rho = rho(p) + eps} is probed by rays from p:
first the closest boundary direction (tau_n), then, in successively smaller
orthogonal complex hyperplanes, the farthest complex line (tau_{n-1}, ...,
tau_1).  The frame data feeds the convex scaling maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize, minimize_scalar

from .config import RunConfig
from .domain import DomainSpec, DomainError, boundary_shoot, shoot_many
from .grids import angle_grid, complex_sphere_grid
from .polyjet import PolyMap


class FrameError(DomainError):
    pass


@dataclass(frozen=True)
class McNealFrame:
    p: np.ndarray
    eps: float
    tau: np.ndarray             # tau_1 .. tau_n
    zeta: np.ndarray            # rows zeta_1 .. zeta_n on the level set
    translation: PolyMap        # z -> z - p
    unitary: np.ndarray         # U with U @ (zeta_k - p) = tau_k e_k
    level: float
    residuals: dict
    multiplicity: bool = False  # farthest/closest line was not unique
    certified: bool = True      # optimizer budget sufficed

    def frame_vectors(self) -> np.ndarray:
        """Orthonormal directions (zeta_k - p)/tau_k as rows."""
        return (self.zeta - self.p[None, :]) / self.tau[:, None]

    def to_json_dict(self) -> dict:
        return {
            "p": [[z.real, z.imag] for z in self.p],
            "eps": self.eps,
            "level": self.level,
            "tau": list(map(float, self.tau)),
            "zeta": [[[z.real, z.imag] for z in row] for row in self.zeta],
            "unitary": [[[z.real, z.imag] for z in row] for row in self.unitary],
            "residuals": self.residuals,
            "multiplicity": self.multiplicity,
            "certified": self.certified,
        }


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a complex vector so its largest-modulus entry is real positive."""
    k = int(np.argmax(np.abs(v)))
    ph = v[k]
    if ph == 0:
        return v
    return v * (np.conj(ph) / abs(ph))


def _lex_key(v: np.ndarray):
    w = _canonical_phase(v)
    return tuple(np.round(np.stack([w.real, w.imag], axis=1).ravel(), 9))


def _pick_canonical(hits: list[np.ndarray]) -> tuple[np.ndarray, bool]:
    """Lexicographically largest canonical-phase direction; flags multiplicity."""
    keys = [_lex_key(v) for v in hits]
    best = max(range(len(hits)), key=lambda i: keys[i])
    distinct = {k for k in keys}
    return _canonical_phase(hits[best]), len(distinct) > 1


def _refine_direction(objective, v0: np.ndarray, maxiter: int, sign: float = 1.0):
    """Nelder-Mead on the raw real vector; direction is normalized inside."""
    n = len(v0)
    x0 = np.empty(2 * n)
    x0[0::2], x0[1::2] = v0.real, v0.imag

    def f(x):
        u = x[0::2] + 1j * x[1::2]
        norm = np.linalg.norm(u)
        if norm < 1e-8:
            return 1e30
        val = objective(u / norm)
        return sign * val if math.isfinite(val) else 1e30

    res = minimize(f, x0, method="Nelder-Mead",
                   options={"maxiter": maxiter, "xatol": 1e-12, "fatol": 1e-14})
    u = res.x[0::2] + 1j * res.x[1::2]
    u = u / np.linalg.norm(u)
    return u, sign * res.fun


def _phase_profile(spec, p, v, level, count: int) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(count) / count
    dirs = np.exp(1j * th)[:, None] * v[None, :]
    return shoot_many(spec, p, dirs, level)


def line_distance(spec: DomainSpec, p, v, level, phase_count: int = 64,
                  refine: bool = True):
    """Distance from p to the level set along the complex line through v.

    Returns (distance, best unit direction on the line); +inf when the whole
    line misses the level set inside the box.
    """
    v = np.asarray(v, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    ts = _phase_profile(spec, p, v, level, phase_count)
    k = int(np.argmin(ts))
    best_t = ts[k]
    best_th = 2.0 * np.pi * k / phase_count
    if not math.isfinite(best_t):
        return math.inf, v
    if refine:
        h = 2.0 * np.pi / phase_count

        def f(th):
            t = boundary_shoot(spec, p, np.exp(1j * th) * v, level)
            return t if math.isfinite(t) else 1e30

        res = minimize_scalar(f, bounds=(best_th - h, best_th + h),
                              method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < best_t:
            best_t, best_th = res.fun, res.x
    direction = np.exp(1j * best_th) * v
    # Prefer the canonical phase when the whole circle ties (axis symmetry).
    cand = _canonical_phase(direction)
    t_cand = boundary_shoot(spec, p, cand, level)
    if t_cand <= best_t * (1 + 1e-12) + 1e-15:
        return float(t_cand), cand
    return float(best_t), direction


def _check_inputs(spec: DomainSpec, p, eps: float, tol: float):
    if not spec.convex:
        raise FrameError("the frame construction requires a convex domain")
    if eps <= 0:
        raise FrameError("eps must be positive")
    p = np.asarray(p, dtype=np.complex128)
    level = spec.rho_value(p) + eps
    if level > tol * spec.scale():
        raise FrameError("rho(p) + eps exceeds the boundary level")
    return p, float(level)


def min_distance(spec: DomainSpec, p, eps: float, cfg: RunConfig | None = None):
    """Closest level-set point: (tau_n, zeta_n).

    Multi-start Nelder-Mead over the direction sphere seeded from a
    low-discrepancy grid, then a structured certification sweep.
    """
    cfg = cfg or RunConfig()
    b = cfg.budgets
    p, level = _check_inputs(spec, p, eps, cfg.tolerances.frame_tol)
    n = spec.dim

    starts = complex_sphere_grid(n, b.nm_starts)
    axes = np.concatenate([np.eye(n), -np.eye(n), 1j * np.eye(n), -1j * np.eye(n)])
    starts = np.concatenate([axes, starts])
    ts = shoot_many(spec, p, starts, level)
    order = np.argsort(ts)

    def objective(d):
        return boundary_shoot(spec, p, d, level)

    hits = []
    best_t = math.inf
    for idx in order[:8]:
        if not math.isfinite(ts[idx]):
            continue
        u, t = _refine_direction(objective, starts[idx], b.nm_maxiter)
        hits.append((t, u))
        best_t = min(best_t, t)

    # Certification sweep; refine from the sweep winner if it beats the best.
    certified = True
    sweep = angle_grid(2 * n - 1, b.cert_per_dim, cap=b.cert_budget)
    sweep_dirs = sweep[:, 0::2] + 1j * sweep[:, 1::2]
    sweep_ts = shoot_many(spec, p, sweep_dirs, level, coarse=64, bisect=40)
    k = int(np.argmin(sweep_ts))
    if math.isfinite(sweep_ts[k]):
        u, t = _refine_direction(objective, sweep_dirs[k], b.nm_maxiter)
        if t < best_t - cfg.tolerances.frame_tol:
            certified = False  # multi-start missed the basin; sweep rescued it
        hits.append((t, u))
        best_t = min(best_t, t)
    if not hits or not math.isfinite(best_t):
        raise FrameError("no level-set crossing found in any direction")

    tol = 1e-9 * max(1.0, best_t)
    near = [u for t, u in hits if t <= best_t + tol]
    direction, multiple = _pick_canonical(near)
    t = objective(direction)
    zeta = p + t * direction
    return float(t), zeta, multiple, certified


def max_distance_in_hyperplane(spec: DomainSpec, p, eps: float,
                               orthogonal_to: list[np.ndarray],
                               cfg: RunConfig | None = None):
    """Farthest complex line in the orthogonal complement: (tau_k, zeta_k)."""
    cfg = cfg or RunConfig()
    b = cfg.budgets
    p, level = _check_inputs(spec, p, eps, cfg.tolerances.frame_tol)
    n = spec.dim
    if orthogonal_to:
        C = np.conj(np.asarray(orthogonal_to, dtype=np.complex128))
        if C.shape[1] != n:
            raise FrameError("constraint vectors must have the domain dimension")
        B = null_space(C)
        if B.shape[1] != n - len(orthogonal_to):
            raise FrameError("constraint vectors are degenerate")
    else:
        B = np.eye(n, dtype=np.complex128)
    d = B.shape[1]
    if d == 0:
        raise FrameError("empty orthogonal complement")

    phase_coarse = 24

    def line_obj(u):   # u: unit vector in C^d
        v = B @ u
        t, _ = line_distance(spec, p, v, level,
                             phase_count=phase_coarse, refine=False)
        return t

    if d == 1:
        t, direction = line_distance(spec, p, B[:, 0], level,
                                     phase_count=max(b.cert_per_dim, 64))
        zeta = p + t * direction
        return float(t), zeta, False, True

    starts = complex_sphere_grid(d, max(16, b.nm_starts // 2))
    vals = np.array([line_obj(u) for u in starts])
    finite = np.isfinite(vals)
    hits = []
    best_t = -math.inf
    for idx in np.argsort(-np.where(finite, vals, -np.inf))[:6]:
        if not finite[idx]:
            continue
        u, t = _refine_direction(line_obj, starts[idx], b.nm_maxiter, sign=-1.0)
        hits.append((t, u))
        best_t = max(best_t, t)

    certified = True
    sweep = angle_grid(2 * d - 1, min(b.cert_per_dim, 48), cap=b.cert_budget // 4)
    sweep_u = sweep[:, 0::2] + 1j * sweep[:, 1::2]
    sweep_vals = np.array([line_obj(u) for u in sweep_u])
    k = int(np.nanargmax(np.where(np.isfinite(sweep_vals), sweep_vals, np.nan)))
    u, t = _refine_direction(line_obj, sweep_u[k], b.nm_maxiter, sign=-1.0)
    if t > best_t + cfg.tolerances.frame_tol:
        certified = False
    hits.append((t, u))
    best_t = max(best_t, t)
    if not hits or not math.isfinite(best_t):
        raise FrameError("no admissible line found in the complement")

    tol = 1e-9 * max(1.0, abs(best_t))
    near = [u for t, u in hits if t >= best_t - tol]
    u, multiple = _pick_canonical(near)
    t, direction = line_distance(spec, p, B @ u, level,
                                 phase_count=max(b.cert_per_dim, 64))
    zeta = p + t * direction
    return float(t), zeta, multiple, certified


def mcneal_frame(spec: DomainSpec, p, eps: float,
                 cfg: RunConfig | None = None) -> McNealFrame:
    """Full frame: iterated closest point then farthest lines, plus (T, U)."""
    cfg = cfg or RunConfig()
    p = np.asarray(p, dtype=np.complex128)
    n = spec.dim
    level = spec.rho_value(p) + eps

    tau = np.empty(n)
    zeta = np.empty((n, n), dtype=np.complex128)
    multiplicity = False
    certified = True

    t_n, z_n, mult, cert = min_distance(spec, p, eps, cfg)
    tau[n - 1] = t_n
    zeta[n - 1] = z_n
    multiplicity |= mult
    certified &= cert

    frame_dirs = [(z_n - p) / t_n]
    for k in range(n - 2, -1, -1):
        t_k, z_k, mult, cert = max_distance_in_hyperplane(
            spec, p, eps, frame_dirs, cfg)
        tau[k] = t_k
        zeta[k] = z_k
        multiplicity |= mult
        certified &= cert
        frame_dirs.append((z_k - p) / t_k)

    V = np.stack([(zeta[k] - p) / tau[k] for k in range(n)], axis=1)
    U = V.conj().T
    T = PolyMap.affine(np.eye(n), -p)

    level_res = max(abs(spec.rho_value(zeta[k]) - level) for k in range(n))
    G = V.conj().T @ V
    orth_res = float(np.max(np.abs(G - np.eye(n))))
    unit_res = float(np.max(np.abs(U @ U.conj().T - np.eye(n))))
    dist_res = max(abs(np.linalg.norm(zeta[k] - p) - tau[k]) for k in range(n))
    residuals = {
        "level": float(level_res),
        "orthogonality": orth_res,
        "unitarity": unit_res,
        "distance": float(dist_res),
    }
    frame = McNealFrame(p=p, eps=float(eps), tau=tau, zeta=zeta, translation=T,
                        unitary=U, level=float(level), residuals=residuals,
                        multiplicity=multiplicity, certified=certified)
    validate_frame(frame, spec, cfg.tolerances.frame_tol)
    return frame


def validate_frame(frame: McNealFrame, spec: DomainSpec, tol: float) -> None:
    n = spec.dim
    res = frame.residuals
    if res["orthogonality"] > tol or res["unitarity"] > 10 * tol:
        raise FrameError(f"frame residuals too large: {res}")
    if res["level"] > tol * spec.scale() or res["distance"] > tol:
        raise FrameError(f"frame residuals too large: {res}")
    tau = frame.tau
    if n >= 2:
        if tau[n - 1] > tau[0] * (1 + 1e-9):
            raise FrameError("ordering tau_n <= tau_1 violated")
        for k in range(0, n - 2):
            if tau[k] > tau[k + 1] * (1 + 1e-9):
                raise FrameError("ordering tau_1 <= ... <= tau_{n-1} violated")
    img = (frame.unitary @ (frame.zeta - frame.p[None, :]).T).T
    target = np.diag(frame.tau)
    if np.max(np.abs(img - target)) > tol * max(1.0, float(np.max(frame.tau))):
        raise FrameError("U does not align zeta_k - p with the positive axes")
