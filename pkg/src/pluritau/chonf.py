"""Polynomial normal form at Levi corank-one points, and the distinguished radii.

The coordinate change is a composition of five polynomial automorphisms:
an affine map normalizing the linear part to 2 Re z_n, a unitary
diagonalizing the strong Hermitian block, its square-root rescaling, a shear
absorbing pure terms into z_n, and a shear removing conj(z_1)^j z_alpha
terms.  Coefficient extractors feed the radius tau(p, delta) and Catlin's
polydisc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .domain import DomainSpec, DomainError
from .polyjet import HoloPoly, PolyMap, RealJet, compose


class NormalFormError(DomainError):
    pass


class CorankError(NormalFormError):
    """Hermitian block not positive definite: Levi corank exceeds one."""


class TypeBoundError(NormalFormError):
    """All coefficient maxima A_l vanish: 1-type exceeds the declared 2m."""


def _unit(j: int, n: int) -> tuple[int, ...]:
    return tuple(1 if i == j else 0 for i in range(n))


def _zeros(n: int) -> tuple[int, ...]:
    return (0,) * n


@dataclass(frozen=True)
class ChoNormalForm:
    p: np.ndarray
    m: int
    phi: PolyMap
    phi_inv: PolyMap
    lambdas: np.ndarray
    a: dict
    b: dict
    det_at_p: complex
    residual: float
    normal_jet: RealJet
    invariants: dict

    def to_json_dict(self) -> dict:
        return {
            "p": [[z.real, z.imag] for z in self.p],
            "m": self.m,
            "phi": self.phi.to_json_dict(),
            "phi_inv": self.phi_inv.to_json_dict(),
            "lambdas": list(map(float, self.lambdas)),
            "a": [{"j": j, "k": k, "re": c.real, "im": c.imag}
                  for (j, k), c in sorted(self.a.items())],
            "b": [{"alpha": al, "j": j, "k": k, "re": c.real, "im": c.imag}
                  for (al, j, k), c in sorted(self.b.items())],
            "det_at_p": [self.det_at_p.real, self.det_at_p.imag],
            "residual": self.residual,
            "invariants": self.invariants,
        }


@dataclass(frozen=True)
class TauData:
    delta: float
    A: dict
    B: dict
    tau1: float
    tau1_with_b: float
    taus: tuple

    def to_json_dict(self) -> dict:
        return {
            "delta": self.delta,
            "A": {str(l): v for l, v in sorted(self.A.items())},
            "B": {str(l): v for l, v in sorted(self.B.items())},
            "tau1": self.tau1,
            "tau1_with_b": self.tau1_with_b,
            "taus": list(map(float, self.taus)),
        }


def _pre_rotation(g: np.ndarray, n: int) -> np.ndarray | None:
    """Unitary acting on z_2..z_n making the normal derivative land on z_n.

    Returns None when no rotation is needed.  z_1 is preserved: it carries
    the weak direction of the corank-one structure.
    """
    if abs(g[n - 1]) > 1e-8 * np.linalg.norm(g):
        return None
    tail = g[1:]
    nt = np.linalg.norm(tail)
    if nt == 0:
        raise NormalFormError(
            "normal derivative vanishes in z_2..z_n; cannot rotate z_1 away")
    R = np.zeros((n, n), dtype=np.complex128)
    R[0, 0] = 1.0
    last = tail / nt            # row so that new d rho/d z_n = |tail| > 0
    R[n - 1, 1:] = last
    # Complete rows 2..n-1 with an orthonormal basis of the complement.
    from scipy.linalg import null_space
    C = last[None, :].conj()
    B = null_space(C)
    for i in range(n - 2):
        R[1 + i, 1:] = B[:, i].conj()
    return R


def cho_normal_form(spec: DomainSpec, p, m: int,
                    cfg: RunConfig | None = None) -> ChoNormalForm:
    """Normal form of the defining function at p for a corank-one domain."""
    cfg = cfg or RunConfig()
    if not spec.corank_one:
        raise NormalFormError("domain is not flagged Levi corank one")
    if m < 1:
        raise NormalFormError("type parameter m must be >= 1")
    p = np.asarray(p, dtype=np.complex128)
    n = spec.dim
    bound = 2 * m + 1

    jet = spec.local_jet(p, bound)   # centered at p
    g = np.array([jet.coeff(_unit(j, n), _zeros(n)) for j in range(n)])
    if np.linalg.norm(g) == 0:
        raise NormalFormError("vanishing gradient at p")

    maps = []        # ambient phi_k, composed left to right
    inv_maps = []

    p_cur = p
    R = _pre_rotation(g, n)
    if R is not None:
        rot = PolyMap.affine(R)
        maps.append(rot)
        inv_maps.insert(0, rot.affine_inverse())
        jet = compose(jet, PolyMap.affine(np.conj(R.T)), bound)
        g = np.array([jet.coeff(_unit(j, n), _zeros(n)) for j in range(n)])
        p_cur = R @ p

    # Step 1: affine normalization of the linear part to 2 Re z_n.
    A1 = np.eye(n, dtype=np.complex128)
    A1[n - 1, :] = g
    phi1 = PolyMap.affine(A1, -A1 @ p_cur)
    phi1_lin = PolyMap.affine(A1)
    phi1_lin_inv = phi1_lin.affine_inverse()
    maps.append(phi1)
    inv_maps.insert(0, phi1.affine_inverse())
    jet = compose(jet, phi1_lin_inv, bound)

    # Step 2: unitary diagonalization of the strong Hermitian block.
    idx = list(range(1, n - 1))          # ambient coordinates z_2..z_{n-1}
    lambdas = np.array([])
    if idx:
        A = np.array([[jet.coeff(_unit(a, n), _unit(bb, n)) for bb in idx]
                      for a in idx])
        A = 0.5 * (A + A.conj().T)
        w, v = np.linalg.eigh(A)
        order = np.argsort(-w)
        w, v = w[order], v[:, order]
        if np.min(w) <= cfg.tolerances.levi_pos_tol:
            raise CorankError(
                f"Hermitian block has a nonpositive eigenvalue {np.min(w):.3e}")
        for c in range(v.shape[1]):
            k = int(np.argmax(np.abs(v[:, c])))
            ph = v[k, c]
            v[:, c] *= np.conj(ph) / abs(ph)
        lambdas = w
        M2 = np.eye(n, dtype=np.complex128)
        M2[np.ix_(idx, idx)] = v.T
        phi2 = PolyMap.affine(M2)
        maps.append(phi2)
        inv_maps.insert(0, phi2.affine_inverse())
        jet = compose(jet, phi2.affine_inverse(), bound)

        # Step 3: square-root rescaling making the block the identity.
        M3 = np.eye(n, dtype=np.complex128)
        for i, a in enumerate(idx):
            M3[a, a] = np.sqrt(w[i])
        phi3 = PolyMap.affine(M3)
        maps.append(phi3)
        inv_maps.insert(0, phi3.affine_inverse())
        jet = compose(jet, phi3.affine_inverse(), bound)

    # Step 4: absorb pure holomorphic terms in z_1..z_{n-1} into z_n.
    pure = {}
    for (mu, nu), c in jet.coeffs.items():
        if sum(nu) == 0 and mu[n - 1] == 0 and 2 <= sum(mu) <= 2 * m:
            pure[mu] = c
    phi4, phi4_inv = _shear_last(n, pure)
    maps.append(phi4)
    inv_maps.insert(0, phi4_inv)
    jet = compose(jet, phi4_inv, bound)

    # Step 5: remove conj(z_1)^k z_alpha terms via z_alpha shears.
    qcoeffs = {}
    for a in idx:
        for k in range(1, m + 1):
            c = jet.coeff(_unit(a, n), tuple(k if i == 0 else 0 for i in range(n)))
            if c != 0:
                qcoeffs[(a, k)] = np.conj(c)
    phi5, phi5_inv = _shear_block(n, idx, qcoeffs)
    maps.append(phi5)
    inv_maps.insert(0, phi5_inv)
    jet = compose(jet, phi5_inv, bound)

    phi = maps[-1]
    for mp in reversed(maps[:-1]):
        phi = phi.compose(mp)
    phi_inv = inv_maps[-1]
    for mp in reversed(inv_maps[:-1]):
        phi_inv = phi_inv.compose(mp)

    origin_image = phi(p)
    if np.max(np.abs(origin_image)) > 1e-10 * max(1.0, np.linalg.norm(p)):
        raise NormalFormError(f"phi(p) = {origin_image} is not 0")
    round_trip = phi.compose(phi_inv)
    ident = PolyMap.identity(n)
    err = _map_distance(round_trip, ident)
    if err > 1e-9:
        raise NormalFormError(f"phi o phi_inv differs from identity by {err:.2e}")

    det_at_p = complex(np.linalg.det(phi.jacobian(p)))

    a, b, invariants, residual = _extract(jet, n, m)
    scale = max(1.0, jet.scale())
    for name in ("pure", "bbar", "zalpha_sq", "linear", "hermitian", "holo_mixed"):
        if invariants[name] > 1e-10 * scale:
            raise NormalFormError(
                f"normal-form invariant {name} violated: {invariants[name]:.2e}")

    return ChoNormalForm(p=p, m=m, phi=phi, phi_inv=phi_inv, lambdas=lambdas,
                         a=a, b=b, det_at_p=det_at_p, residual=residual,
                         normal_jet=jet, invariants=invariants)


def _shear_last(n: int, pure: dict) -> tuple[PolyMap, PolyMap]:
    """t = z except t_n = z_n + Q(z'); inverse subtracts Q."""
    comps, inv_comps = [], []
    for j in range(n - 1):
        comps.append(HoloPoly(n, {_unit(j, n): 1.0}))
        inv_comps.append(HoloPoly(n, {_unit(j, n): 1.0}))
    last = {_unit(n - 1, n): 1.0 + 0j}
    last_inv = {_unit(n - 1, n): 1.0 + 0j}
    for mu, c in pure.items():
        last[mu] = last.get(mu, 0j) + c
        last_inv[mu] = last_inv.get(mu, 0j) - c
    comps.append(HoloPoly(n, last))
    inv_comps.append(HoloPoly(n, last_inv))
    return PolyMap(n, n, tuple(comps)), PolyMap(n, n, tuple(inv_comps))


def _shear_block(n: int, idx: list[int], qcoeffs: dict) -> tuple[PolyMap, PolyMap]:
    """zeta_a = t_a + Q_a(t_1) for a in the strong block; inverse subtracts."""
    comps, inv_comps = [], []
    for j in range(n):
        base = {_unit(j, n): 1.0 + 0j}
        base_inv = {_unit(j, n): 1.0 + 0j}
        if j in idx:
            for (a, k), q in qcoeffs.items():
                if a == j:
                    mu = tuple(k if i == 0 else 0 for i in range(n))
                    base[mu] = base.get(mu, 0j) + q
                    base_inv[mu] = base_inv.get(mu, 0j) - q
        comps.append(HoloPoly(n, base))
        inv_comps.append(HoloPoly(n, base_inv))
    return PolyMap(n, n, tuple(comps)), PolyMap(n, n, tuple(inv_comps))


def _map_distance(a: PolyMap, b: PolyMap) -> float:
    err = 0.0
    for ca, cb in zip(a.components, b.components):
        keys = set(ca.coeffs) | set(cb.coeffs)
        for k in keys:
            err = max(err, abs(ca.coeffs.get(k, 0j) - cb.coeffs.get(k, 0j)))
    return err


def _extract(jet: RealJet, n: int, m: int):
    """Read off a_{jk}, b^alpha_{jk}, invariant residual classes."""
    a, b = {}, {}
    inv = {"pure": 0.0, "bbar": 0.0, "zalpha_sq": 0.0, "linear": 0.0,
           "hermitian": 0.0, "holo_mixed": 0.0}
    residual = 0.0
    block = set(range(1, n - 1))
    for (mu, nu), c in jet.coeffs.items():
        deg = sum(mu) + sum(nu)
        if deg == 0:
            continue
        star = sum(mu[i] + nu[i] for i in block)
        zn = mu[n - 1] + nu[n - 1]
        z1 = mu[0] + nu[0]
        mag = abs(c)
        if deg == 1:
            if mu == _unit(n - 1, n) or nu == _unit(n - 1, n):
                inv["linear"] = max(inv["linear"], abs(c - 1.0))
            else:
                inv["linear"] = max(inv["linear"], mag)
            continue
        if zn > 0:
            continue  # O(|z_n||z|) remainder
        # Pure terms (all-holomorphic or all-antiholomorphic).
        if sum(nu) == 0 or sum(mu) == 0:
            e = mu if sum(nu) == 0 else nu
            if e[0] == deg and deg <= 2 * m:
                inv["pure"] = max(inv["pure"], mag)
                continue
            if star == deg and deg == 2:
                inv["zalpha_sq"] = max(inv["zalpha_sq"], mag)
                continue
            if star >= 2 or (star == 1 and z1 >= m + 1) or (star == 0 and z1 >= 2 * m + 1):
                continue  # remainder classes
            if star == 1 and deg <= 2 * m:
                inv["holo_mixed"] = max(inv["holo_mixed"], mag)
                continue
            residual += mag
            continue
        # Hermitian block: bidegree (1,1) terms within the strong directions.
        if deg == 2 and star == 2 and sum(mu) == 1 and sum(nu) == 1:
            al = next(i for i in block if mu[i] == 1)
            be = next(i for i in block if nu[i] == 1)
            off = abs(c - 1.0) if al == be else mag
            inv["hermitian"] = max(inv["hermitian"], off)
            continue
        # z_1 coefficient tower.
        if star == 0:
            if mu[0] > 0 and nu[0] > 0 and mu[0] + nu[0] <= 2 * m:
                a[(mu[0], nu[0])] = c
                continue
            if z1 >= 2 * m + 1:
                continue
            residual += mag
            continue
        if star == 1:
            al = next(i for i in block if mu[i] + nu[i] == 1)
            if mu[al] == 1:
                j, k = mu[0], nu[0]
            else:
                j, k = nu[0], mu[0]
                c = np.conj(c)
            if j > 0 and k > 0 and j + k <= m:
                if mu[al] == 1:   # record once; the conjugate twin carries the same data
                    b[(al + 1, j, k)] = 2.0 * c
                continue
            if k == 0 and j >= 1 and deg <= 2 * m:
                inv["holo_mixed"] = max(inv["holo_mixed"], mag)
                continue
            if j == 0 and 1 <= k <= m:
                inv["bbar"] = max(inv["bbar"], mag)
                continue
            if z1 >= m + 1:
                continue
            residual += mag
            continue
        if star == 2 and deg == 2:
            # remaining bidegree (2,0)/(0,2) in the block: z_alpha z_beta style
            inv["zalpha_sq"] = max(inv["zalpha_sq"], mag)
            continue
        # star >= 2, degree >= 3: O(|z_*|^2 |z|) remainder
        continue
    return a, b, inv, residual


def eq_det_reference(spec: DomainSpec, p, lambdas: np.ndarray) -> complex:
    """Reference determinant value: (d rho/d zbar_n)(p) * prod lambda^(1/2)."""
    g = spec.gradient(p)
    val = np.conj(g[-1])
    for lam in lambdas:
        val *= math.sqrt(lam)
    return complex(val)


def tau(nf: ChoNormalForm, delta: float, n: int | None = None) -> TauData:
    """Distinguished radii at (p, delta) from the normal-form coefficients."""
    if delta <= 0:
        raise NormalFormError("delta must be positive")
    m = nf.m
    n = n if n is not None else nf.phi.dim_in
    A = {}
    for l in range(2, 2 * m + 1):
        A[l] = max((abs(c) for (j, k), c in nf.a.items() if j + k == l), default=0.0)
    B = {}
    for lp in range(2, m + 1):
        B[lp] = max((abs(c) for (al, j, k), c in nf.b.items() if j + k == lp),
                    default=0.0)
    if all(v <= 1e-13 for v in A.values()):
        raise TypeBoundError("all A_l vanish up to 2m; declared type too small")
    tau1 = min((delta / A[l]) ** (1.0 / l) for l in A if A[l] > 1e-13)
    with_b = [tau1]
    for lp, Bv in B.items():
        if Bv > 1e-13:
            with_b.append((math.sqrt(delta) / Bv) ** (1.0 / lp))
    tau1_with_b = min(with_b)
    taus = (tau1,) + (math.sqrt(delta),) * (n - 2) + (delta,)
    return TauData(delta=float(delta), A=A, B=B, tau1=float(tau1),
                   tau1_with_b=float(tau1_with_b), taus=taus)


@dataclass(frozen=True)
class CatlinPolydisc:
    nf: ChoNormalForm
    data: TauData

    def contains(self, z) -> bool:
        w = self.nf.phi(np.asarray(z, dtype=np.complex128))
        return bool(np.all(np.abs(w) < np.asarray(self.data.taus)))

    def chart_map(self, shrink: float = 1.0) -> PolyMap:
        """Polynomial map sending the unit polydisc onto the region: Phi^{-1} o diag(tau)."""
        n = self.nf.phi.dim_in
        D = PolyMap.affine(np.diag(np.asarray(self.data.taus) * shrink))
        return self.nf.phi_inv.compose(D)


def catlin_polydisc(nf: ChoNormalForm, delta: float) -> CatlinPolydisc:
    return CatlinPolydisc(nf=nf, data=tau(nf, delta))
