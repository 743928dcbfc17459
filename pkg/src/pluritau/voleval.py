"""Extremal-map estimation of the Caratheodory and Kobayashi-Eisenman
volume elements and the quotient invariant.

Both quantities are optimized over polynomial map candidates written in a
normalizing affine frame: psi = p + G.chi(t) into the domain (Kobayashi
side, from the ball) or psi = chi(G^{-1}(z - p)) into the ball
(Caratheodory side), with chi pinned at the center.  A penalty schedule
with analytic gradients drives the coefficients, then a radial projection
onto a denser certification grid restores strict feasibility, so reported
values are one-sided bounds up to the sampled-grid resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .config import RunConfig
from .domain import DomainSpec, DomainError, boundary_grid, boundary_shoot, shoot_many
from .grids import complex_sphere_grid
from .polyjet import HoloPoly, PolyMap, RealJet, compose, series_inverse


class VolumeError(DomainError):
    pass


class NotCertifiedError(VolumeError):
    pass


@dataclass(frozen=True)
class MapAnsatz:
    """Polynomial candidate data: monomial basis and coefficient matrix."""

    direction: str            # "into_ball" | "from_ball"
    degree: int
    exponents: tuple          # monomial exponent tuples, constant excluded
    coefficients: np.ndarray  # (K, n) complex
    frame: np.ndarray         # the affine frame matrix G
    center: np.ndarray        # pinned point (psi(0) = center or psi(center) = 0)


@dataclass
class VolumeEstimate:
    quantity: str             # "c" | "k" | "q"
    value: float
    certified_side: str       # "lower" | "upper" | "none"
    ansatz_degree: int
    constraint_violation: float
    optimizer_trace: dict = field(default_factory=dict)
    best_map: PolyMap | None = None

    def to_json_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "value": self.value,
            "certified_side": self.certified_side,
            "ansatz_degree": self.ansatz_degree,
            "constraint_violation": self.constraint_violation,
            "optimizer_trace": self.optimizer_trace,
        }


# -- monomial bases -----------------------------------------------------------


def _monomials(n: int, degree: int) -> list[tuple[int, ...]]:
    out = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            if sum(prefix) >= 1:
                out.append(tuple(prefix))
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e, slots - 1)

    rec([], degree, n)
    out.sort(key=lambda m: (sum(m), m))
    return out


def _vandermonde(points: np.ndarray, exponents) -> np.ndarray:
    M, n = points.shape
    V = np.empty((M, len(exponents)), dtype=np.complex128)
    for k, mu in enumerate(exponents):
        col = np.ones(M, dtype=np.complex128)
        for j in range(n):
            if mu[j]:
                col = col * points[:, j] ** mu[j]
        V[:, k] = col
    return V


def _coeff_map(center, G, exponents, C, n, pull_frame=False) -> PolyMap:
    """Assemble the candidate as a PolyMap.

    pull_frame False: psi(t) = center + G (chi(t));
    pull_frame True:  psi(z) = chi(G^{-1}(z - center)).
    """
    comps = []
    if not pull_frame:
        GC = C @ G.T                      # (K, n): column a of psi
        for a in range(n):
            coeffs = {mu: GC[k, a] for k, mu in enumerate(exponents) if GC[k, a] != 0}
            zero = (0,) * n
            coeffs[zero] = coeffs.get(zero, 0j) + center[a]
            comps.append(HoloPoly(n, coeffs))
        return PolyMap(n, n, tuple(comps))
    chi_comps = []
    for a in range(n):
        coeffs = {mu: C[k, a] for k, mu in enumerate(exponents) if C[k, a] != 0}
        chi_comps.append(HoloPoly(n, coeffs))
    chi = PolyMap(n, n, tuple(chi_comps))
    Ginv = np.linalg.inv(G)
    pull = PolyMap.affine(Ginv, -Ginv @ center)
    return chi.compose(pull)


_boundary_cache: dict = {}


def _cached_boundary_grid(spec: DomainSpec, count: int) -> np.ndarray:
    """Boundary samples are deterministic per (domain, count); reuse across calls."""
    key = (id(spec), count)
    if key not in _boundary_cache:
        if len(_boundary_cache) > 64:
            _boundary_cache.clear()
        _boundary_cache[key] = boundary_grid(spec, count)
    return _boundary_cache[key]


def default_frame(spec: DomainSpec, p, shrink: float = 0.95) -> np.ndarray:
    """Diagonal frame from distances to the boundary along the complex axes."""
    p = np.asarray(p, dtype=np.complex128)
    n = spec.dim
    radii = np.empty(n)
    for j in range(n):
        e = np.zeros(n, dtype=np.complex128)
        ts = []
        for phase in (1.0, -1.0, 1j, -1j):
            e[j] = phase
            t = boundary_shoot(spec, p, e, 0.0)
            ts.append(t if math.isfinite(t) else spec.box_exit(p, e))
            e[j] = 0.0
        radii[j] = shrink * min(ts)
    if np.any(radii <= 0):
        raise VolumeError("point is not interior; empty frame")
    return np.diag(radii).astype(np.complex128)


# -- penalty optimizer skeleton ----------------------------------------------


def _pack(C: np.ndarray) -> np.ndarray:
    return np.concatenate([C.real.ravel(), C.imag.ravel()])


def _unpack(theta: np.ndarray, K: int, n: int) -> np.ndarray:
    half = K * n
    return theta[:half].reshape(K, n) + 1j * theta[half:].reshape(K, n)


class _Problem:
    """Shared machinery: objective log|det chi'(0)|^2 with grid constraints."""

    def __init__(self, V, lin_rows, K, n):
        self.V = V
        self.lin_rows = lin_rows
        self.K = K
        self.n = n

    def constraint_values(self, C):
        raise NotImplementedError

    def constraint_grad(self, C, active_weight):
        raise NotImplementedError

    def objective(self, theta, w):
        K, n = self.K, self.n
        C = _unpack(theta, K, n)
        L = C[self.lin_rows, :].T          # chi'(0): rows d chi_a / d t_j
        sign, logabs = np.linalg.slogdet(L)
        g = self.constraint_values(C)
        viol = np.maximum(g, 0.0)
        pen = w * float(viol @ viol)
        if sign == 0 or logabs < -40:
            f = 1e8 + pen
            grad_obj = np.zeros((K, n), dtype=np.complex128)
        else:
            f = -2.0 * logabs + pen
            Linv = np.linalg.inv(L)
            grad_obj = np.zeros((K, n), dtype=np.complex128)
            # -2 log|det L| = -(log det L + log det conj L); only the second
            # term depends on conj(C): d/d conj(C[k,a]) = -conj(Linv[j,a]).
            for idx, k in enumerate(self.lin_rows):
                for a in range(n):
                    grad_obj[k, a] = -Linv[idx, a].conjugate()
        gpen = self.constraint_grad(C, 2.0 * w * viol)
        gtot = grad_obj + gpen
        grad = np.concatenate([2.0 * gtot.real.ravel(), 2.0 * gtot.imag.ravel()])
        return f, grad


# The Wirtinger bookkeeping: every scalar term above is written so that
# gtot[k,a] equals the derivative with respect to conj(C[k,a]) of the real
# objective; the real gradient is then (2 Re gtot, 2 Im gtot).


class _KobayashiProblem(_Problem):
    """Constraints rho(psi(t_i)) + margin <= 0 on a ball sample grid."""

    def __init__(self, spec, p, G, V, lin_rows, K, n, margin):
        super().__init__(V, lin_rows, K, n)
        self.spec = spec
        self.p = p
        self.G = G
        self.margin = margin

    def _points(self, C):
        return self.p[None, :] + (self.V @ C) @ self.G.T

    def constraint_values(self, C):
        return self.spec.rho_batch(self._points(C)) + self.margin

    def constraint_grad(self, C, weights):
        pts = self._points(C)
        act = weights > 0
        if not np.any(act):
            return np.zeros((self.K, self.n), dtype=np.complex128)
        grad_rho = self.spec.rho.gradient_batch(pts[act]) if self.spec.is_polynomial() \
            else np.array([self.spec.gradient(q) for q in pts[act]])
        # d g_i / d conj(C[k,b]) = conj(V[i,k]) * conj(sum_a rho_z(q_i)_a G[a,b])
        W = grad_rho @ self.G
        return np.conj(self.V[act]).T @ (weights[act, None] * np.conj(W))


class _CaratheodoryProblem(_Problem):
    """Constraints |chi(u_i)|^2 <= 1 - margin on pulled-back boundary samples."""

    def __init__(self, V, lin_rows, K, n, margin):
        super().__init__(V, lin_rows, K, n)
        self.margin = margin

    def constraint_values(self, C):
        chi = self.V @ C
        return np.sum(np.abs(chi) ** 2, axis=1) - (1.0 - self.margin)

    def constraint_grad(self, C, weights):
        act = weights > 0
        if not np.any(act):
            return np.zeros((self.K, self.n), dtype=np.complex128)
        chi = self.V[act] @ C
        return np.conj(self.V[act]).T @ (weights[act, None] * chi)


def _optimize(problem: _Problem, C0: np.ndarray, cfg: RunConfig) -> np.ndarray:
    theta = _pack(C0)
    stages = cfg.budgets.penalty_stages
    for i, w in enumerate(stages):
        last = i == len(stages) - 1
        res = minimize(problem.objective, theta, args=(w,), jac=True,
                       method="L-BFGS-B",
                       options={"maxiter": cfg.budgets.lbfgs_maxiter
                                if last else cfg.budgets.lbfgs_maxiter // 2,
                                "ftol": 1e-13, "gtol": 1e-11})
        theta = res.x
    return _unpack(theta, problem.K, problem.n)


# -- Kobayashi side ------------------------------------------------------------


def _ball_samples(n: int, cfg: RunConfig, factor: int = 1, shells: bool = True):
    count = cfg.sphere_count(n) * factor
    sphere = complex_sphere_grid(n, count)
    if not shells:
        return sphere
    inner = [r * complex_sphere_grid(n, max(8, count // 8))
             for r in cfg.budgets.shell_radii]
    return np.concatenate([sphere] + inner, axis=0)


def _degree_ladder(cfg: RunConfig) -> list[int]:
    degs = [d for d in range(1, cfg.budgets.max_degree + 1)]
    return [d for d in degs if d <= 4 or d % 2 == cfg.budgets.max_degree % 2]


def _project_kobayashi(spec, p, G, V_cert, C, margin):
    """Largest radial shrink of chi keeping rho(psi) <= -margin/2 on the cert grid."""

    def feasible(s):
        pts = p[None, :] + (V_cert @ (s * C)) @ G.T
        return float(np.max(spec.rho_batch(pts))) <= -0.5 * margin

    if feasible(1.0):
        lo, hi = 1.0, 1.25
        for _ in range(16):
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        return lo
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def kobayashi(spec: DomainSpec, p, cfg: RunConfig | None = None,
              frame: np.ndarray | None = None,
              warm_maps: tuple = ()) -> VolumeEstimate:
    """Certified upper bound for the Kobayashi-Eisenman volume element at p.

    Maximizes |det psi'(0)| over polynomial maps psi of the ball into the
    domain with psi(0) = p; the inscribed-ball map seeds the search and is
    the guaranteed fallback.
    """
    cfg = cfg or RunConfig()
    p = np.asarray(p, dtype=np.complex128)
    n = spec.dim
    if spec.rho_value(p) >= 0:
        raise VolumeError("p is not interior")
    margin = cfg.tolerances.feas_margin
    G = default_frame(spec, p) if frame is None else np.asarray(frame, np.complex128)

    samples = _ball_samples(n, cfg, shells=False)
    cert = _ball_samples(n, cfg, factor=4)
    rng = np.random.default_rng(cfg.seed)

    best = {"logdet": -math.inf, "C": None, "deg": 0, "viol": math.inf}
    trace = {"degrees": [], "frame_radii": [float(abs(G[j, j])) for j in range(n)]}

    # Inscribed-ball fallback: psi(t) = p + r t with a certified r.
    r_axis = min(abs(G[j, j]) for j in range(n))
    exps1 = _monomials(n, 1)
    C_ball = np.zeros((len(exps1), n), dtype=np.complex128)
    Ginv = np.linalg.inv(G)
    for k, mu in enumerate(exps1):
        j = mu.index(1)
        C_ball[k] = r_axis * Ginv[:, j]

    prev_C = None
    prev_exps = None
    stall = 0
    for deg in _degree_ladder(cfg):
        exponents = _monomials(n, deg)
        K = len(exponents)
        V = _vandermonde(samples, exponents)
        V_cert = _vandermonde(cert, exponents)
        lin_rows = [exponents.index(tuple(1 if i == j else 0 for i in range(n)))
                    for j in range(n)]
        problem = _KobayashiProblem(spec, p, G, V, lin_rows, K, n, margin)

        starts = []
        C_id = np.zeros((K, n), dtype=np.complex128)
        for idx, k in enumerate(lin_rows):
            C_id[k, idx] = 1.0
        if prev_C is not None:
            lift = np.zeros((K, n), dtype=np.complex128)
            for k_old, mu in enumerate(prev_exps):
                lift[exponents.index(mu)] = prev_C[k_old]
            starts.append(lift)
        starts.append(0.8 * C_id)
        if deg == 1:
            starts.append(np.pad(C_ball, ((0, K - len(exps1)), (0, 0))))
        for w in warm_maps:
            lifted = _lift_map_to_coeffs(w, p, G, exponents, n)
            if lifted is not None:
                starts.append(lifted)
        for _ in range(max(0, cfg.budgets.volume_starts - len(starts))):
            starts.append(0.5 * C_id + 0.05 * (rng.standard_normal((K, n))
                                               + 1j * rng.standard_normal((K, n))))
        starts = starts[:max(cfg.budgets.volume_starts, 2)]

        deg_best = None
        for C0 in starts:
            C = _optimize(problem, C0, cfg)
            s = _project_kobayashi(spec, p, G, V_cert, C, margin)
            if s <= 0:
                continue
            Cs = s * C
            L = Cs[lin_rows, :].T
            sign, logabs = np.linalg.slogdet(G @ L)
            if sign == 0:
                continue
            if deg_best is None or logabs > deg_best[0]:
                deg_best = (logabs, Cs)
        if deg_best is not None:
            logabs, Cs = deg_best
            pts = p[None, :] + (V_cert @ Cs) @ G.T
            viol = max(0.0, float(np.max(spec.rho_batch(pts))))
            if logabs > best["logdet"]:
                improvement = (logabs - best["logdet"]) if math.isfinite(best["logdet"]) else 1.0
                stall = 0 if improvement > cfg.budgets.stall_rtol else stall + 1
                best = {"logdet": logabs, "C": Cs, "deg": deg,
                        "viol": viol, "exps": exponents}
            else:
                stall += 1
            trace["degrees"].append({"degree": deg, "k_est": float(np.exp(-2 * logabs))})
        else:
            stall += 1
        if stall >= 2 and deg >= 3:
            break
        prev_C = best["C"] if best["C"] is not None else None
        prev_exps = best.get("exps")

    if best["C"] is None:
        # No nondegenerate candidate: inscribed-ball bound r^{-2n}.
        value = float(r_axis ** (-2 * n))
        return VolumeEstimate("k", value, "upper", 1, 0.0,
                              {"fallback": "inscribed_ball", **trace}, None)
    value = float(math.exp(-2.0 * best["logdet"]))
    certified = best["viol"] <= cfg.tolerances.cert_tol
    pm = _coeff_map(p, G, best["exps"], best["C"], n, pull_frame=False)
    return VolumeEstimate("k", value, "upper" if certified else "none",
                          best["deg"], best["viol"], trace, pm)


def _lift_map_to_coeffs(pm: PolyMap, p, G, exponents, n):
    """Express a candidate PolyMap psi as chi-coefficients in the frame (p, G)."""
    if pm.dim_in != n or pm.dim_out != n:
        return None
    Ginv = np.linalg.inv(G)
    C = np.zeros((len(exponents), n), dtype=np.complex128)
    index = {mu: k for k, mu in enumerate(exponents)}
    for a in range(n):
        comp = pm.components[a]
        for mu, c in comp.coeffs.items():
            if sum(mu) == 0:
                if abs(c - p[a]) > 1e-8 * max(1.0, abs(p[a])):
                    return None
                continue
            if mu not in index:
                return None   # degree too high for this ansatz
            C[index[mu], a] = c
    return C @ Ginv.T


# -- Caratheodory side ---------------------------------------------------------


def _lift_map_c(pm: PolyMap, p, G, exponents, deg: int, n: int):
    """Coefficients of chi(u) = pm(p + G u) truncated to the ansatz degree."""
    if pm.dim_in != n or pm.dim_out != n:
        return None
    chart = PolyMap.affine(G, p)
    chi = pm.compose(chart, degree_bound=deg)
    index = {mu: k for k, mu in enumerate(exponents)}
    C = np.zeros((len(exponents), n), dtype=np.complex128)
    for a in range(n):
        for mu, c in chi.components[a].coeffs.items():
            if sum(mu) == 0:
                continue   # re-pin the center exactly
            C[index[mu], a] = c
    return C


def caratheodory(spec: DomainSpec, p, cfg: RunConfig | None = None,
                 frame: np.ndarray | None = None,
                 warm_maps: tuple = (),
                 seed_from_kobayashi: bool | None = None) -> VolumeEstimate:
    """Certified lower bound for the Caratheodory volume element at p.

    Maximizes |det psi'(p)| over polynomial maps of the domain into the unit
    ball with psi(p) = 0; the constraint is enforced on a deterministic
    boundary sample grid and re-checked on a 4x denser one.  Unless candidate
    maps are supplied, the search is seeded with the series inverse of the
    Kobayashi-side extremal, which shares its basin.
    """
    cfg = cfg or RunConfig()
    p = np.asarray(p, dtype=np.complex128)
    n = spec.dim
    if spec.rho_value(p) >= 0:
        raise VolumeError("p is not interior")
    if spec.kind.startswith("model_"):
        # Polynomial maps bounded on these unbounded models are constant.
        return VolumeEstimate("c", 0.0, "none", 0, 0.0,
                              {"reason": "unbounded model: polynomial ansatz degenerates"})
    if seed_from_kobayashi is None:
        seed_from_kobayashi = not warm_maps
    if seed_from_kobayashi:
        k_est = kobayashi(spec, p, cfg, frame=frame)
        if k_est.best_map is not None:
            inv = series_inverse(k_est.best_map, cfg.budgets.max_degree)
            warm_maps = tuple(warm_maps) + (inv,)
    margin = cfg.tolerances.feas_margin
    G = default_frame(spec, p) if frame is None else np.asarray(frame, np.complex128)
    Ginv = np.linalg.inv(G)

    count = cfg.sphere_count(n)
    bnd = _cached_boundary_grid(spec, count)
    bnd_cert = _cached_boundary_grid(spec, 4 * count)
    U = (bnd - p[None, :]) @ Ginv.T
    U_cert = (bnd_cert - p[None, :]) @ Ginv.T
    rng = np.random.default_rng(cfg.seed + 1)

    logdetG2 = 2.0 * float(np.linalg.slogdet(G)[1])
    best = {"logdet": -math.inf, "C": None, "deg": 0, "viol": math.inf}
    trace = {"degrees": [], "boundary_points": int(bnd.shape[0])}

    prev_C = None
    prev_exps = None
    stall = 0
    for deg in _degree_ladder(cfg):
        exponents = _monomials(n, deg)
        K = len(exponents)
        V = _vandermonde(U, exponents)
        V_cert = _vandermonde(U_cert, exponents)
        lin_rows = [exponents.index(tuple(1 if i == j else 0 for i in range(n)))
                    for j in range(n)]
        problem = _CaratheodoryProblem(V, lin_rows, K, n, margin)

        starts = []
        C_id = np.zeros((K, n), dtype=np.complex128)
        for idx, k in enumerate(lin_rows):
            C_id[k, idx] = 1.0
        # chi = s * id is feasible once s max|u| <= 1.
        scale0 = 0.9 / max(1.0, float(np.max(np.abs(U))))
        if prev_C is not None:
            lift = np.zeros((K, n), dtype=np.complex128)
            for k_old, mu in enumerate(prev_exps):
                lift[exponents.index(mu)] = prev_C[k_old]
            starts.append(lift)
        for w in warm_maps:
            lifted = _lift_map_c(w, p, G, exponents, deg, n)
            if lifted is not None:
                starts.append(lifted)
        starts.append(scale0 * C_id)
        for _ in range(max(0, cfg.budgets.volume_starts - len(starts))):
            starts.append(scale0 * C_id + 0.05 * scale0 *
                          (rng.standard_normal((K, n)) + 1j * rng.standard_normal((K, n))))
        starts = starts[:max(cfg.budgets.volume_starts, 2) + len(warm_maps)]

        deg_best = None
        for C0 in starts:
            C = _optimize(problem, C0, cfg)
            mx = np.sqrt(np.max(np.sum(np.abs(V_cert @ C) ** 2, axis=1)))
            if mx <= 0:
                continue
            s = math.sqrt(1.0 - 0.5 * margin) / float(mx)
            Cs = min(s, 1e6) * C
            L = Cs[lin_rows, :].T
            sign, logabs = np.linalg.slogdet(L)
            if sign == 0:
                continue
            if deg_best is None or logabs > deg_best[0]:
                deg_best = (logabs, Cs)
        if deg_best is not None:
            logabs, Cs = deg_best
            viol = max(0.0, float(np.max(np.sum(np.abs(V_cert @ Cs) ** 2, axis=1)) - 1.0))
            if logabs > best["logdet"]:
                improvement = (logabs - best["logdet"]) if math.isfinite(best["logdet"]) else 1.0
                stall = 0 if improvement > cfg.budgets.stall_rtol else stall + 1
                best = {"logdet": logabs, "C": Cs, "deg": deg, "viol": viol,
                        "exps": exponents}
            else:
                stall += 1
            trace["degrees"].append(
                {"degree": deg,
                 "c_est": float(np.exp(2 * logabs - logdetG2))})
        else:
            stall += 1
        if stall >= 2 and deg >= 3:
            break
        prev_C = best["C"] if best["C"] is not None else None
        prev_exps = best.get("exps")

    if best["C"] is None:
        return VolumeEstimate("c", 0.0, "none", 0, 0.0, trace)
    # |det psi'(p)|^2 = |det chi'(0)|^2 / |det G|^2
    value = float(math.exp(2.0 * best["logdet"] - logdetG2))
    certified = best["viol"] <= cfg.tolerances.cert_tol
    pm = _coeff_map(p, G, best["exps"], best["C"], n, pull_frame=True)
    return VolumeEstimate("c", value, "lower" if certified else "none",
                          best["deg"], best["viol"], trace, pm)


# -- quotient and transformation rule -----------------------------------------


def quotient(spec: DomainSpec, p, cfg: RunConfig | None = None) -> VolumeEstimate:
    """Certified lower bound c_lower / k_upper for the quotient invariant."""
    cfg = cfg or RunConfig()
    k = kobayashi(spec, p, cfg)
    warm = ()
    if k.best_map is not None:
        warm = (series_inverse(k.best_map, cfg.budgets.max_degree),)
    c = caratheodory(spec, p, cfg, warm_maps=warm, seed_from_kobayashi=False)
    if k.value <= 0:
        raise VolumeError("k-estimate is nonpositive")
    value = c.value / k.value
    tol = 2.0 * cfg.tolerances.feas_margin
    if value > 1.0 + max(tol, 2e-3):
        raise VolumeError(f"quotient estimate {value} violates the Schwarz bound")
    side = "lower" if (c.certified_side == "lower" and k.certified_side == "upper") \
        else "none"
    est = VolumeEstimate("q", float(value), side,
                         max(c.ansatz_degree, k.ansatz_degree),
                         max(c.constraint_violation, k.constraint_violation),
                         {"c": c.to_json_dict(), "k": k.to_json_dict()})
    return est


class MoebiusBall:
    """Automorphism of the unit ball exchanging 0 and a (an involution)."""

    def __init__(self, a):
        self.a = np.asarray(a, dtype=np.complex128)
        if np.linalg.norm(self.a) >= 1:
            raise VolumeError("Moebius parameter must lie in the unit ball")
        self.s = math.sqrt(1.0 - float(np.linalg.norm(self.a) ** 2))

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        a = self.a
        na2 = float(np.linalg.norm(a) ** 2)
        if na2 == 0:
            return -z
        inner = complex(np.sum(z * np.conj(a)))
        Pz = (inner / na2) * a
        Qz = z - Pz
        return (a - Pz - self.s * Qz) / (1.0 - inner)

    def inverse(self) -> "MoebiusBall":
        return self               # involution

    def det_jacobian(self, z) -> complex:
        """Closed-form modulus with the exact phase from a small FD Jacobian."""
        z = np.asarray(z, dtype=np.complex128)
        n = len(z)
        h = 1e-6
        J = np.empty((n, n), dtype=np.complex128)
        for j in range(n):
            e = np.zeros(n, dtype=np.complex128)
            e[j] = h
            J[:, j] = (self(z + e) - self(z - e)) / (2 * h)
        det = complex(np.linalg.det(J))
        mod = self.s ** (n + 1) / abs(1.0 - complex(np.sum(z * np.conj(self.a)))) ** (n + 1)
        return det / abs(det) * mod if det != 0 else complex(mod)


def push_domain(spec: DomainSpec, F: PolyMap) -> DomainSpec:
    """Image domain F(D) for an invertible affine map with polynomial rho."""
    if not spec.is_polynomial():
        raise VolumeError("push_domain needs a polynomial defining function")
    if not F.is_affine():
        raise VolumeError("push_domain supports affine maps")
    F_inv = F.affine_inverse()
    rho_new = compose(spec.rho, F_inv, spec.rho.degree())
    corners = _box_corners(spec.box)
    Z = corners[:, 0::2] + 1j * corners[:, 1::2]
    img = F.evaluate_batch(Z)
    flat = np.empty((img.shape[0], 2 * spec.dim))
    flat[:, 0::2], flat[:, 1::2] = img.real, img.imag
    box = np.stack([flat.min(axis=0), flat.max(axis=0)], axis=1)
    return DomainSpec(rho_new, spec.dim, convex=spec.convex,
                      corank_one=spec.corank_one, type_2m=spec.type_2m,
                      box=box, witness=F(spec.witness), kind="polynomial",
                      meta={"pushed_from": spec.kind})


def _box_corners(box: np.ndarray) -> np.ndarray:
    d = box.shape[0]
    out = np.empty((2 ** d, d))
    for i in range(2 ** d):
        for c in range(d):
            out[i, c] = box[c, (i >> c) & 1]
    return out


def transformation_check(spec: DomainSpec, F, p,
                         cfg: RunConfig | None = None,
                         image_spec: DomainSpec | None = None) -> dict:
    """Compare v_D(p) with |det F'(p)|^2 v_{F(D)}(F(p)) for v in {c, k}.

    F is a PolyMap (affine; image domain constructed) or any object with
    __call__ and det_jacobian (e.g. MoebiusBall, whose image is the ball
    itself and must then be passed as image_spec=spec).
    """
    cfg = cfg or RunConfig()
    p = np.asarray(p, dtype=np.complex128)
    if isinstance(F, PolyMap):
        q = F(p)
        detF = complex(np.linalg.det(F.jacobian(p)))
        omega = image_spec if image_spec is not None else push_domain(spec, F)
    else:
        q = F(p)
        detF = F.det_jacobian(p)
        if image_spec is None:
            raise VolumeError("non-polynomial F needs an explicit image_spec")
        omega = image_spec
    jac2 = abs(detF) ** 2
    out = {"p": [[z.real, z.imag] for z in p],
           "F_p": [[z.real, z.imag] for z in q],
           "det_F_sq": jac2}
    for name, fn in (("c", caratheodory), ("k", kobayashi)):
        left = fn(spec, p, cfg)
        right = fn(omega, q, cfg)
        rhs = jac2 * right.value
        denom = max(abs(left.value), abs(rhs), 1e-300)
        out[name] = {
            "value_D": left.value,
            "value_image": right.value,
            "rhs": rhs,
            "rel_discrepancy": abs(left.value - rhs) / denom,
        }
    return out
