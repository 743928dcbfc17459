"""Scaling sequences and local limit models.

Convex route: anisotropic dilation of the orthogonal frame at (p_j, eps_j),
eps_j = -rho(p_j).  Corank-one route: normal form at the vertical boundary
lift followed by the distinguished-radius dilation.  Both produce rescaled
defining jets whose sup-norm gaps against a fitted limit model are the
convergence diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chonf import ChoNormalForm, cho_normal_form, tau as catlin_tau
from .config import RunConfig
from .domain import DomainSpec, DomainError, boundary_shoot, DomainSpec as _DS
from .grids import box_grid
from .mcneal import McNealFrame, mcneal_frame
from .polyjet import PolyMap, RealJet, compose


class ScalingError(DomainError):
    pass


def _unit(j: int, n: int) -> tuple[int, ...]:
    return tuple(1 if i == j else 0 for i in range(n))


def _zeros(n: int) -> tuple[int, ...]:
    return (0,) * n


@dataclass(frozen=True)
class ScalingStep:
    j: int
    kind: str                  # "convex" | "corank1"
    p_j: np.ndarray
    eps_or_delta: float
    S: PolyMap
    S_inv: PolyMap
    rho_j: RealJet
    b_j: np.ndarray            # image of p_j under S
    taus: np.ndarray
    frame: McNealFrame | None = None
    nf: ChoNormalForm | None = None

    def to_json_dict(self) -> dict:
        return {
            "j": self.j,
            "kind": self.kind,
            "p": [[z.real, z.imag] for z in self.p_j],
            "eps_or_delta": self.eps_or_delta,
            "taus": list(map(float, self.taus)),
            "b": [[z.real, z.imag] for z in self.b_j],
            "rho_j": self.rho_j.to_json_dict(),
            "S": self.S.to_json_dict(),
        }


@dataclass(frozen=True)
class LocalModel:
    kind: str                  # "convex" | "corank_one"
    rho_inf: RealJet
    base_point: np.ndarray

    def to_domain(self, box_radius: float = 4.0) -> DomainSpec:
        n = self.rho_inf.dim
        from .domain import DomainSpec
        box = np.tile([-box_radius, box_radius], (2 * n, 1))
        if self.kind == "convex":
            return DomainSpec(self.rho_inf, n, convex=True, corank_one=False,
                              type_2m=self.rho_inf.degree_bound, box=box,
                              witness=self.base_point, kind="model_cvx")
        return DomainSpec(self.rho_inf, n, convex=False, corank_one=True,
                          type_2m=self.rho_inf.degree_bound, box=box,
                          witness=self.base_point, kind="model_corank1")

    def to_json_dict(self) -> dict:
        return {"kind": self.kind,
                "rho_inf": self.rho_inf.to_json_dict(),
                "base": [[z.real, z.imag] for z in self.base_point]}


def _require_polynomial(spec: DomainSpec) -> RealJet:
    if not spec.is_polynomial():
        raise ScalingError("scaling requires a polynomial defining function")
    return spec.rho


def scale_convex(spec: DomainSpec, p_j, j: int = 0,
                 cfg: RunConfig | None = None) -> ScalingStep:
    """Frame-based dilation: S = Lambda o U o T, rho_j = rho o S^{-1} / eps_j."""
    cfg = cfg or RunConfig()
    rho = _require_polynomial(spec)
    p_j = np.asarray(p_j, dtype=np.complex128)
    eps = -spec.rho_value(p_j)
    if eps <= 0:
        raise ScalingError("p_j must be interior so that eps_j = -rho(p_j) > 0")
    frame = mcneal_frame(spec, p_j, eps, cfg)
    n = spec.dim
    Lam = np.diag(1.0 / frame.tau)
    A = Lam @ frame.unitary
    S = PolyMap.affine(A, -A @ p_j)
    S_inv = S.affine_inverse()
    rho_j = compose(rho, S_inv, rho.degree()).scaled(1.0 / eps)
    b_j = S(p_j)
    if np.max(np.abs(b_j)) > 1e-9:
        raise ScalingError("S(p_j) is not the origin")
    if abs(rho_j.evaluate(b_j) + 1.0) > 1e-9:
        raise ScalingError("normalization rho_j(0) = -1 violated")
    return ScalingStep(j=j, kind="convex", p_j=p_j, eps_or_delta=float(eps),
                       S=S, S_inv=S_inv, rho_j=rho_j, b_j=b_j,
                       taus=frame.tau.copy(), frame=frame)


def vertical_boundary_delta(spec: DomainSpec, p_j) -> float:
    """delta with p_j + ('0, delta) on the boundary, by a ray/level solve."""
    n = spec.dim
    e_n = np.zeros(n, dtype=np.complex128)
    e_n[n - 1] = 1.0
    t = boundary_shoot(spec, p_j, e_n, 0.0)
    if not math.isfinite(t):
        raise ScalingError("the vertical ray does not meet the boundary")
    return float(t)


def scale_corank1(spec: DomainSpec, p_j, j: int = 0,
                  cfg: RunConfig | None = None) -> ScalingStep:
    """Normal-form dilation: S = Delta o Phi at the vertical boundary lift."""
    cfg = cfg or RunConfig()
    rho = _require_polynomial(spec)
    if not spec.corank_one:
        raise ScalingError("domain is not flagged Levi corank one")
    if spec.type_2m is None:
        raise ScalingError("corank-one scaling needs the declared type 2m")
    m = spec.type_2m // 2
    p_j = np.asarray(p_j, dtype=np.complex128)
    n = spec.dim
    delta = vertical_boundary_delta(spec, p_j)
    p_tilde = p_j.copy()
    p_tilde[n - 1] += delta

    nf = cho_normal_form(spec, p_tilde, m, cfg)
    td = catlin_tau(nf, delta, n)
    taus = np.asarray(td.taus)

    # Coefficient bound: the rescaled tower and block coefficients are <= 1.
    for (jj, kk), c in nf.a.items():
        val = abs(c) * td.tau1 ** (jj + kk) / delta
        if val > 1.0 + 1e-9:
            raise ScalingError(f"P^j coefficient bound violated: {val}")
    for (al, jj, kk), c in nf.b.items():
        val = abs(c) * td.tau1 ** (jj + kk) / math.sqrt(delta)
        if val > 1.0 + 1e-9:
            raise ScalingError(f"Q^j coefficient bound violated: {val}")

    D = PolyMap.affine(np.diag(1.0 / taus))
    S = D.compose(nf.phi)
    S_inv = nf.phi_inv.compose(PolyMap.affine(np.diag(taus)))
    bound = max(rho.degree() * max(S_inv.degree(), 1), rho.degree())
    rho_j = compose(rho, S_inv, bound).scaled(1.0 / delta)
    b_j = S(p_j)
    if np.max(np.abs(b_j[:n - 1])) > 1e-9:
        raise ScalingError("S(p_j) is not on the normal axis")
    if abs(rho_j.evaluate(np.zeros(n))) > 1e-10 * max(1.0, rho_j.scale()):
        raise ScalingError("normalization rho_j(0) = 0 violated")
    if rho_j.evaluate(b_j) >= 0:
        raise ScalingError("scaled base point b_j is not interior")
    return ScalingStep(j=j, kind="corank1", p_j=p_j, eps_or_delta=float(delta),
                       S=S, S_inv=S_inv, rho_j=rho_j, b_j=b_j, taus=taus, nf=nf)


def hausdorff_gap(step_or_jet, model: LocalModel, box: np.ndarray | None = None,
                  per_dim: int = 9) -> float:
    """Sup over a deterministic box grid of |rho_j - rho_inf|."""
    jet = step_or_jet.rho_j if isinstance(step_or_jet, ScalingStep) else step_or_jet
    n = jet.dim
    if box is None:
        box = np.tile([-2.0, 2.0], (2 * n, 1))
    box = np.asarray(box, dtype=float)
    pts = box_grid(box, per_dim)
    return float(np.max(np.abs(jet.evaluate_batch(pts)
                               - model.rho_inf.evaluate_batch(pts))))


# -- limit extraction ---------------------------------------------------------


def _aitken3(x0, x1, x2) -> complex:
    d = x2 - 2 * x1 + x0
    if abs(d) < 1e-14 * max(1.0, abs(x2)):
        return x2
    return x2 - (x2 - x1) ** 2 / d


def _extrapolate(seq: np.ndarray, levels: int = 2) -> complex:
    """Iterated Aitken acceleration (kills up to two geometric error terms)."""
    cur = list(seq)
    for _ in range(levels):
        if len(cur) < 3:
            break
        cur = [_aitken3(cur[i], cur[i + 1], cur[i + 2])
               for i in range(len(cur) - 2)]
    return cur[-1]


def _two_means(rows: np.ndarray):
    """Deterministic 2-means on complex coefficient rows (farthest-pair init)."""
    J = rows.shape[0]
    dists = np.linalg.norm(rows[:, None, :] - rows[None, :, :], axis=2)
    i, j = np.unravel_index(np.argmax(dists), dists.shape)
    centers = rows[[i, j]].copy()
    labels = np.zeros(J, dtype=int)
    for _ in range(50):
        d0 = np.linalg.norm(rows - centers[0], axis=1)
        d1 = np.linalg.norm(rows - centers[1], axis=1)
        new = (d1 < d0).astype(int)
        if np.all(new == labels) and _ > 0:
            break
        labels = new
        for c in (0, 1):
            sel = rows[labels == c]
            if len(sel):
                centers[c] = sel.mean(axis=0)
    within = sum(np.linalg.norm(rows[labels == c] - centers[c], axis=1).sum()
                 for c in (0, 1))
    return labels, within


def _is_cauchy(cols: np.ndarray, tol: float, scale: float) -> bool:
    """Last differences shrink geometrically (ratio <= 3/4) or are negligible."""
    if cols.shape[0] < 3:
        return True
    d_prev = np.abs(cols[-2] - cols[-3])
    d_last = np.abs(cols[-1] - cols[-2])
    ok = d_last <= 0.75 * d_prev + tol * scale
    return bool(np.all(ok))


def fit_local_model(steps: list[ScalingStep], kind: str,
                    cfg: RunConfig | None = None,
                    cauchy_tol: float = 2e-6) -> list[LocalModel]:
    """Limit models from jet coefficients across steps.

    Coefficients are extrapolated per monomial (Aitken on the last entries);
    when the coefficient rows cluster into two accumulation points, one model
    per cluster is returned, ordered by first occurrence.
    """
    cfg = cfg or RunConfig()
    if len(steps) < 3:
        raise ScalingError("need at least 3 scaling steps to extract a limit")
    if kind not in ("convex", "corank_one"):
        raise ScalingError(f"unknown model kind {kind!r}")
    keys = sorted({k for s in steps for k in s.rho_j.coeffs})
    C = np.array([[s.rho_j.coeffs.get(k, 0j) for k in keys] for s in steps])
    scale = float(np.max(np.abs(C))) or 1.0

    labels = np.zeros(len(steps), dtype=int)
    split = False
    if len(steps) >= 6:
        l2, w2 = _two_means(C)
        w1 = float(np.linalg.norm(C - C.mean(axis=0), axis=1).sum())
        if w2 < 0.25 * w1 and w1 > 1e-6 * scale * len(steps):
            # Stand-in for the gap statistic: accept the split only when it
            # explains most of the dispersion.
            both = all((l2 == c).sum() >= 3 for c in (0, 1))
            if both:
                labels, split = l2, True

    clusters = [0] if not split else sorted(set(labels),
                                            key=lambda c: int(np.argmax(labels == c)))
    models = []
    for c in clusters:
        rows = C[labels == c] if split else C
        if not _is_cauchy(rows, cauchy_tol, scale):
            if not split:
                raise ScalingError(
                    "coefficients are not Cauchy and do not split into two clusters")
            raise ScalingError("cluster coefficients are not Cauchy")
        limits = {k: _extrapolate(rows[:, i]) for i, k in enumerate(keys)}
        models.append(_assemble_model(limits, steps[0].rho_j.dim, kind, scale))
    return models


def _assemble_model(limits: dict, n: int, kind: str, scale: float,
                    drop_tol: float = 1e-6) -> LocalModel:
    zero = _zeros(n)
    coeffs = {}
    reports = []
    for (mu, nu), c in limits.items():
        if abs(c) < drop_tol * max(1.0, scale):
            continue
        coeffs[(mu, nu)] = c
        reports.append(((mu, nu), c))
    if kind == "convex":
        cst = coeffs.pop((zero, zero), 0j)
        if abs(cst + 1.0) > 1e-6:
            raise ScalingError(f"convex model constant {cst} is not -1")
        bad = [k for k in coeffs
               if (k[0][n - 1] or k[1][n - 1]) and sum(k[0]) + sum(k[1]) >= 2]
        if bad:
            raise ScalingError(f"convex model keeps z_n nonlinear terms: {bad}")
        degree = max((sum(m) + sum(v) for m, v in coeffs), default=1)
        jet = RealJet(n, max(degree, 1), {**coeffs, (zero, zero): -1.0})
        model = LocalModel("convex", jet, np.zeros(n, dtype=np.complex128))
        _check_convex_sections(jet, n)
        return model
    # corank_one
    lin = coeffs.pop((_unit(n - 1, n), zero), 0j)
    lin_bar = coeffs.pop((zero, _unit(n - 1, n)), 0j)
    if abs(lin - 1.0) > 1e-6 or abs(lin_bar - 1.0) > 1e-6:
        raise ScalingError("corank-one model linear part is not 2 Re z_n")
    for (mu, nu) in list(coeffs):
        zn = mu[n - 1] + nu[n - 1]
        if zn:
            raise ScalingError("corank-one model keeps extra z_n terms")
        star = sum(mu[i] + nu[i] for i in range(1, n - 1))
        z1 = mu[0] + nu[0]
        if star == 0 and z1 > 0 and (mu[0] == 0 or nu[0] == 0):
            raise ScalingError("corank-one model keeps harmonic z_1 terms")
        if star > 0 and not (star == 2 and z1 == 0 and sum(mu) == 1):
            raise ScalingError("corank-one model keeps non-Hermitian block terms")
    for a in range(1, n - 1):
        key = (_unit(a, n), _unit(a, n))
        if abs(coeffs.get(key, 0j) - 1.0) > 1e-6:
            raise ScalingError("corank-one model Hermitian block is not the identity")
    degree = max((sum(m) + sum(v) for m, v in coeffs), default=2)
    full = {**coeffs,
            (_unit(n - 1, n), zero): 1.0, (zero, _unit(n - 1, n)): 1.0}
    jet = RealJet(n, max(degree, 2), full)
    base = np.zeros(n, dtype=np.complex128)
    base[n - 1] = -1.0
    _check_subharmonic_profile(jet, n)
    return LocalModel("corank_one", jet, base)


def _check_convex_sections(jet: RealJet, n: int, samples: int = 48,
                           tol: float = 1e-9) -> None:
    """Sampled second differences along random real lines must be nonnegative."""
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(samples, 2 * n))
    dirs = rng.normal(size=(samples, 2 * n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    h = 0.25
    for x, d in zip(pts, dirs):
        zs = np.array([x, x + h * d, x - h * d])
        Z = zs[:, 0::2] + 1j * zs[:, 1::2]
        v0, vp, vm = jet.evaluate_batch(Z)
        if vp + vm - 2 * v0 < -tol:
            raise ScalingError("fitted convex model fails the midpoint test")


def _check_subharmonic_profile(jet: RealJet, n: int, tol: float = 1e-9) -> None:
    """Laplacian of the z_1 profile (other coordinates frozen at 0) >= 0 on a grid."""
    rad = np.linspace(0.1, 1.5, 8)
    th = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
    z1 = (rad[:, None] * np.exp(1j * th)[None, :]).ravel()
    lap = np.zeros(len(z1))
    for (mu, nu), c in jet.coeffs.items():
        if any(mu[i] + nu[i] for i in range(1, n)):
            continue
        j, k = mu[0], nu[0]
        if j >= 1 and k >= 1:
            lap += (4.0 * j * k
                    * (z1 ** (j - 1) * np.conj(z1) ** (k - 1) * c)).real
    if np.min(lap) < -tol:
        raise ScalingError("fitted corank-one profile is not subharmonic")
