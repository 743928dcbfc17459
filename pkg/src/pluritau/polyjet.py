"""Sparse truncated polynomials in (z_1..z_n, conj(z_1)..conj(z_n)).

``RealJet`` holds a real-valued polynomial germ (defining functions, scaled
defining functions, normal-form pushforwards); ``PolyMap`` holds holomorphic
polynomial maps (coordinate changes, dilations, extremal-map candidates).
Coefficients are stored sparsely, keyed by exponent pairs (mu, nu); degree
truncation is silent and the dropped l1 mass is tracked on the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from . import backend

Key = tuple[tuple[int, ...], tuple[int, ...]]

# Guard against runaway term counts in compositions.
MAX_TERMS = 200_000

REALITY_TOL = 1e-9
IMAG_EVAL_TOL = 1e-12


class JetError(ValueError):
    pass


class JetOverflowError(JetError):
    """Monomial count exceeded MAX_TERMS during a composition."""


class RealityError(JetError):
    """Conjugate-symmetry of coefficients is violated."""


def _degree(key: Key) -> int:
    return sum(key[0]) + sum(key[1])


def _mul(a: dict, b: dict, bound: int | None, dropped: list) -> dict:
    out: dict = {}
    for (mu1, nu1), c1 in a.items():
        for (mu2, nu2), c2 in b.items():
            c = c1 * c2
            if c == 0:
                continue
            mu = tuple(x + y for x, y in zip(mu1, mu2))
            nu = tuple(x + y for x, y in zip(nu1, nu2))
            if bound is not None and sum(mu) + sum(nu) > bound:
                dropped[0] += abs(c)
                continue
            key = (mu, nu)
            v = out.get(key, 0j) + c
            if v == 0:
                out.pop(key, None)
            else:
                out[key] = v
    if len(out) > MAX_TERMS:
        raise JetOverflowError(f"term count {len(out)} exceeds cap {MAX_TERMS}")
    return out


def _pow(a: dict, e: int, bound: int | None, dropped: list, dim: int) -> dict:
    result = {((0,) * dim, (0,) * dim): 1.0 + 0j}
    for _ in range(e):
        result = _mul(result, a, bound, dropped)
    return result


def _add_scaled(acc: dict, other: dict, c: complex) -> None:
    for key, v in other.items():
        w = acc.get(key, 0j) + c * v
        if w == 0:
            acc.pop(key, None)
        else:
            acc[key] = w


def _to_arrays(dim: int, coeffs: Mapping[Key, complex]):
    K = len(coeffs)
    mu = np.zeros((K, dim), dtype=np.int64)
    nu = np.zeros((K, dim), dtype=np.int64)
    coef = np.zeros(K, dtype=np.complex128)
    for k, (key, c) in enumerate(sorted(coeffs.items())):
        mu[k] = key[0]
        nu[k] = key[1]
        coef[k] = c
    return mu, nu, coef


@dataclass(frozen=True)
class RealJet:
    """Real-valued polynomial in (z, conj z), conjugate-symmetric coefficients."""

    dim: int
    degree_bound: int
    coeffs: Mapping[Key, complex]
    truncation_residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        clean = {}
        for key, c in self.coeffs.items():
            mu, nu = key
            if len(mu) != self.dim or len(nu) != self.dim:
                raise JetError(f"exponent length mismatch for dim {self.dim}: {key}")
            if _degree(key) > self.degree_bound:
                raise JetError(f"monomial {key} exceeds degree bound {self.degree_bound}")
            c = complex(c)
            if c != 0:
                clean[(tuple(mu), tuple(nu))] = c
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "_arr", None)
        object.__setattr__(self, "_grad_arr", None)
        scale = self.scale()
        tol = REALITY_TOL * max(1.0, scale)
        for (mu, nu), c in clean.items():
            mirror = clean.get((nu, mu), 0j)
            if abs(c - np.conj(mirror)) > tol:
                raise RealityError(
                    f"coefficient at {(mu, nu)} breaks conjugate symmetry: "
                    f"{c} vs conj({mirror})")

    # -- basic queries ---------------------------------------------------

    def coeff(self, mu: Iterable[int], nu: Iterable[int]) -> complex:
        return self.coeffs.get((tuple(mu), tuple(nu)), 0j)

    def degree(self) -> int:
        return max((_degree(k) for k in self.coeffs), default=0)

    def scale(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0.0)

    def arrays(self):
        if getattr(self, "_arr") is None:
            object.__setattr__(self, "_arr", _to_arrays(self.dim, self.coeffs))
        return getattr(self, "_arr")

    # -- evaluation ------------------------------------------------------

    def evaluate_batch(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.complex128)
        if Z.ndim != 2 or Z.shape[1] != self.dim:
            raise JetError(f"expected points of shape (M, {self.dim}), got {Z.shape}")
        mu, nu, coef = self.arrays()
        vals = backend.eval_jet_batch(np.ascontiguousarray(Z), mu, nu, coef)
        bad = np.abs(vals.imag) > IMAG_EVAL_TOL * np.maximum(1.0, np.abs(vals.real))
        if bad.any():
            raise RealityError("evaluation produced a non-real value")
        return vals.real

    def evaluate(self, z) -> float:
        z = np.asarray(z, dtype=np.complex128).reshape(1, -1)
        return float(self.evaluate_batch(z)[0])

    # -- Wirtinger derivatives --------------------------------------------

    def _derivative_coeffs(self, j: int, bar: bool) -> dict:
        out: dict = {}
        for (mu, nu), c in self.coeffs.items():
            e = nu[j] if bar else mu[j]
            if e == 0:
                continue
            if bar:
                nnu = list(nu)
                nnu[j] -= 1
                key = (mu, tuple(nnu))
            else:
                nmu = list(mu)
                nmu[j] -= 1
                key = (tuple(nmu), nu)
            out[key] = out.get(key, 0j) + e * c
        return out

    def _gradient_arrays(self):
        if getattr(self, "_grad_arr") is None:
            arrs = [_to_arrays(self.dim, self._derivative_coeffs(j, bar=False))
                    for j in range(self.dim)]
            object.__setattr__(self, "_grad_arr", arrs)
        return getattr(self, "_grad_arr")

    def gradient_batch(self, Z: np.ndarray) -> np.ndarray:
        """d rho / d z_j at each row of Z; shape (M, n) complex."""
        Z = np.ascontiguousarray(np.asarray(Z, dtype=np.complex128))
        out = np.empty((Z.shape[0], self.dim), dtype=np.complex128)
        for j, (mu, nu, coef) in enumerate(self._gradient_arrays()):
            out[:, j] = backend.eval_jet_batch(Z, mu, nu, coef)
        return out

    def gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128).reshape(1, -1)
        return self.gradient_batch(z)[0]

    def complex_hessian(self, z) -> np.ndarray:
        """Matrix d^2 rho / d z_j d conj(z_k) at z; Hermitian for real jets."""
        z = np.asarray(z, dtype=np.complex128).reshape(1, -1)
        H = np.empty((self.dim, self.dim), dtype=np.complex128)
        for j in range(self.dim):
            dj = self._derivative_coeffs(j, bar=False)
            for k in range(self.dim):
                acc = 0j
                for (mu, nu), c in dj.items():
                    if nu[k] == 0:
                        continue
                    nnu = list(nu)
                    nnu[k] -= 1
                    term = nu[k] * c
                    for a in range(self.dim):
                        term *= z[0, a] ** mu[a] * np.conj(z[0, a]) ** nnu[a]
                    acc += term
                H[j, k] = acc
        return H

    # -- algebra -----------------------------------------------------------

    def shifted(self, constant: float) -> "RealJet":
        zero = ((0,) * self.dim, (0,) * self.dim)
        coeffs = dict(self.coeffs)
        v = coeffs.get(zero, 0j) + constant
        if v == 0:
            coeffs.pop(zero, None)
        else:
            coeffs[zero] = v
        return RealJet(self.dim, self.degree_bound, coeffs, self.truncation_residual)

    def scaled(self, factor: float) -> "RealJet":
        return RealJet(self.dim, self.degree_bound,
                       {k: factor * c for k, c in self.coeffs.items()},
                       abs(factor) * self.truncation_residual)

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        terms = [{"mu": list(mu), "nu": list(nu), "re": c.real, "im": c.imag}
                 for (mu, nu), c in sorted(self.coeffs.items())]
        return {"dim": self.dim, "degree": self.degree_bound, "terms": terms}

    @staticmethod
    def from_json_dict(d: dict) -> "RealJet":
        coeffs = {(tuple(t["mu"]), tuple(t["nu"])): complex(t["re"], t["im"])
                  for t in d["terms"]}
        return RealJet(int(d["dim"]), int(d["degree"]), coeffs)


@dataclass(frozen=True)
class HoloPoly:
    """Holomorphic polynomial: exponents in z only."""

    dim: int
    coeffs: Mapping[tuple[int, ...], complex]

    def __post_init__(self):
        clean = {}
        for mu, c in self.coeffs.items():
            mu = tuple(mu)
            if len(mu) != self.dim:
                raise JetError(f"exponent length mismatch for dim {self.dim}: {mu}")
            c = complex(c)
            if c != 0:
                clean[mu] = c
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "_arr", None)

    def degree(self) -> int:
        return max((sum(m) for m in self.coeffs), default=0)

    def arrays(self):
        if getattr(self, "_arr") is None:
            K = len(self.coeffs)
            expo = np.zeros((K, self.dim), dtype=np.int64)
            coef = np.zeros(K, dtype=np.complex128)
            for k, (mu, c) in enumerate(sorted(self.coeffs.items())):
                expo[k] = mu
                coef[k] = c
            object.__setattr__(self, "_arr", (expo, coef))
        return getattr(self, "_arr")

    def evaluate_batch(self, Z: np.ndarray) -> np.ndarray:
        Z = np.ascontiguousarray(np.asarray(Z, dtype=np.complex128))
        expo, coef = self.arrays()
        return backend.eval_holo_batch(Z, expo, coef)

    def evaluate(self, z) -> complex:
        z = np.asarray(z, dtype=np.complex128).reshape(1, -1)
        return complex(self.evaluate_batch(z)[0])

    def derivative(self, j: int) -> "HoloPoly":
        out: dict = {}
        for mu, c in self.coeffs.items():
            if mu[j] == 0:
                continue
            m = list(mu)
            m[j] -= 1
            key = tuple(m)
            out[key] = out.get(key, 0j) + mu[j] * c
        return HoloPoly(self.dim, out)

    def _mixed(self, conjugated: bool) -> dict:
        zero = (0,) * self.dim
        if conjugated:
            return {(zero, mu): np.conj(c) for mu, c in self.coeffs.items()}
        return {(mu, zero): c for mu, c in self.coeffs.items()}

    def to_json_dict(self) -> dict:
        return {"dim": self.dim,
                "terms": [{"expo": list(mu), "re": c.real, "im": c.imag}
                          for mu, c in sorted(self.coeffs.items())]}

    @staticmethod
    def from_json_dict(d: dict) -> "HoloPoly":
        return HoloPoly(int(d["dim"]),
                        {tuple(t["expo"]): complex(t["re"], t["im"])
                         for t in d["terms"]})


@dataclass(frozen=True)
class PolyMap:
    """Holomorphic polynomial map C^dim_in -> C^dim_out."""

    dim_in: int
    dim_out: int
    components: tuple[HoloPoly, ...]

    def __post_init__(self):
        if len(self.components) != self.dim_out:
            raise JetError("component count does not match dim_out")
        for comp in self.components:
            if comp.dim != self.dim_in:
                raise JetError("component dimension does not match dim_in")
        object.__setattr__(self, "components", tuple(self.components))

    @staticmethod
    def identity(n: int) -> "PolyMap":
        comps = []
        for j in range(n):
            mu = tuple(1 if i == j else 0 for i in range(n))
            comps.append(HoloPoly(n, {mu: 1.0}))
        return PolyMap(n, n, tuple(comps))

    @staticmethod
    def affine(A: np.ndarray, b: np.ndarray | None = None) -> "PolyMap":
        """z -> A z + b."""
        A = np.asarray(A, dtype=np.complex128)
        n_out, n_in = A.shape
        b = np.zeros(n_out, dtype=np.complex128) if b is None else np.asarray(b, dtype=np.complex128)
        comps = []
        zero = (0,) * n_in
        for r in range(n_out):
            coeffs = {}
            if b[r] != 0:
                coeffs[zero] = b[r]
            for c in range(n_in):
                if A[r, c] != 0:
                    mu = tuple(1 if i == c else 0 for i in range(n_in))
                    coeffs[mu] = A[r, c]
            comps.append(HoloPoly(n_in, coeffs))
        return PolyMap(n_in, n_out, tuple(comps))

    def is_affine(self) -> bool:
        return all(comp.degree() <= 1 for comp in self.components)

    def linear_part(self) -> np.ndarray:
        A = np.zeros((self.dim_out, self.dim_in), dtype=np.complex128)
        for r, comp in enumerate(self.components):
            for mu, c in comp.coeffs.items():
                if sum(mu) == 1:
                    A[r, mu.index(1)] = c
        return A

    def constant_part(self) -> np.ndarray:
        zero = (0,) * self.dim_in
        return np.array([comp.coeffs.get(zero, 0j) for comp in self.components],
                        dtype=np.complex128)

    def affine_inverse(self) -> "PolyMap":
        if not self.is_affine() or self.dim_in != self.dim_out:
            raise JetError("affine_inverse requires a square affine map")
        A = self.linear_part()
        b = self.constant_part()
        Ainv = np.linalg.inv(A)
        return PolyMap.affine(Ainv, -Ainv @ b)

    def degree(self) -> int:
        return max((comp.degree() for comp in self.components), default=0)

    def evaluate_batch(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=np.complex128)
        out = np.empty((Z.shape[0], self.dim_out), dtype=np.complex128)
        for r, comp in enumerate(self.components):
            out[:, r] = comp.evaluate_batch(Z)
        return out

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.complex128).reshape(1, -1)
        return self.evaluate_batch(z)[0]

    def jacobian(self, z) -> np.ndarray:
        J = np.empty((self.dim_out, self.dim_in), dtype=np.complex128)
        for r, comp in enumerate(self.components):
            for c in range(self.dim_in):
                J[r, c] = comp.derivative(c).evaluate(z)
        return J

    def compose(self, inner: "PolyMap", degree_bound: int | None = None) -> "PolyMap":
        """self o inner, exact unless degree_bound is given."""
        if inner.dim_out != self.dim_in:
            raise JetError("map dimensions incompatible for composition")
        dropped = [0.0]
        dim = inner.dim_in
        zero = (0,) * dim
        inner_mixed = [comp._mixed(conjugated=False) for comp in inner.components]
        comps = []
        for comp in self.components:
            acc: dict = {}
            powers: dict = {}
            for mu, c in comp.coeffs.items():
                term = {(zero, zero): 1.0 + 0j}
                for j, e in enumerate(mu):
                    if e == 0:
                        continue
                    pk = (j, e)
                    if pk not in powers:
                        powers[pk] = _pow(inner_mixed[j], e, degree_bound, dropped, dim)
                    term = _mul(term, powers[pk], degree_bound, dropped)
                _add_scaled(acc, term, c)
            comps.append(HoloPoly(dim, {mu: c for (mu, _nu), c in acc.items()}))
        return PolyMap(dim, self.dim_out, tuple(comps))

    def to_json_dict(self) -> dict:
        return {"dim_in": self.dim_in, "dim_out": self.dim_out,
                "components": [c.to_json_dict() for c in self.components]}

    @staticmethod
    def from_json_dict(d: dict) -> "PolyMap":
        return PolyMap(int(d["dim_in"]), int(d["dim_out"]),
                       tuple(HoloPoly.from_json_dict(c) for c in d["components"]))


def compose(jet: RealJet, pmap: PolyMap, degree_bound: int) -> RealJet:
    """Truncation to degree_bound of jet o pmap; reality is preserved.

    The dropped-coefficient l1 mass lands in ``truncation_residual``.
    """
    if pmap.dim_out != jet.dim:
        raise JetError(f"map produces {pmap.dim_out} coordinates, jet expects {jet.dim}")
    if degree_bound < 1:
        raise JetError("degree_bound must be >= 1")
    dim = pmap.dim_in
    zero = (0,) * dim
    dropped = [0.0]
    holo = [comp._mixed(conjugated=False) for comp in pmap.components]
    anti = [comp._mixed(conjugated=True) for comp in pmap.components]
    powers: dict = {}

    def power(j: int, e: int, bar: bool) -> dict:
        key = (j, e, bar)
        if key not in powers:
            base = anti[j] if bar else holo[j]
            powers[key] = _pow(base, e, degree_bound, dropped, dim)
        return powers[key]

    acc: dict = {}
    for (mu, nu), c in jet.coeffs.items():
        term = {(zero, zero): 1.0 + 0j}
        for j, e in enumerate(mu):
            if e:
                term = _mul(term, power(j, e, False), degree_bound, dropped)
        for j, e in enumerate(nu):
            if e:
                term = _mul(term, power(j, e, True), degree_bound, dropped)
        _add_scaled(acc, term, c)

    # Roundoff can break conjugate symmetry at the 1e-16 level; project back.
    sym: dict = {}
    for (mu, nu), c in acc.items():
        sym[(mu, nu)] = 0.5 * (c + np.conj(acc.get((nu, mu), 0j)))
    return RealJet(dim, degree_bound, sym,
                   jet.truncation_residual + dropped[0])


def series_inverse(pm: PolyMap, degree: int) -> PolyMap:
    """Truncated compositional inverse: pm(q(z)) = z + O(degree+1).

    Requires an invertible linear part.  q sends pm's constant term back to 0.
    """
    if pm.dim_in != pm.dim_out:
        raise JetError("series_inverse needs a square map")
    n = pm.dim_in
    A = pm.linear_part()
    c0 = pm.constant_part()
    Ainv = np.linalg.inv(A)
    q = PolyMap.affine(Ainv, -Ainv @ c0)
    # Nonlinear remainder N = pm - (c0 + A t).
    zero = (0,) * n
    N_comps = []
    for a, comp in enumerate(pm.components):
        coeffs = {mu: c for mu, c in comp.coeffs.items() if sum(mu) >= 2}
        N_comps.append(HoloPoly(n, coeffs))
    N = PolyMap(n, n, tuple(N_comps))
    lin_Ainv = PolyMap.affine(Ainv)
    for _ in range(max(0, degree - 1)):
        NoQ = N.compose(q, degree_bound=degree)
        R_comps = []
        for a in range(n):
            coeffs = dict(NoQ.components[a].coeffs)
            for mu in list(coeffs):
                coeffs[mu] = -coeffs[mu]
            e_a = tuple(1 if i == a else 0 for i in range(n))
            coeffs[e_a] = coeffs.get(e_a, 0j) + 1.0
            coeffs[zero] = coeffs.get(zero, 0j) - c0[a]
            R_comps.append(HoloPoly(n, coeffs))
        q = lin_Ainv.compose(PolyMap(n, n, tuple(R_comps)), degree_bound=degree)
    return q


# -- Taylor jets -----------------------------------------------------------


def _fornberg_weights(m: int, offsets: np.ndarray) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at 0 on given nodes."""
    N = len(offsets)
    d = np.zeros((m + 1, N, N))
    d[0, 0, 0] = 1.0
    c1 = 1.0
    for nn in range(1, N):
        c2 = 1.0
        for v in range(nn):
            c3 = offsets[nn] - offsets[v]
            c2 *= c3
            for k in range(min(nn, m) + 1):
                d[k, nn, v] = (offsets[nn] * d[k, nn - 1, v]
                               - (k * d[k - 1, nn - 1, v] if k else 0.0)) / c3
        for k in range(min(nn, m) + 1):
            d[k, nn, nn] = c1 / c2 * ((k * d[k - 1, nn - 1, nn - 1] if k else 0.0)
                                      - offsets[nn - 1] * d[k, nn - 1, nn - 1])
        c1 = c2
    return d[m, N - 1]


def _real_partial(f_real, p_re: np.ndarray, alpha: tuple[int, ...], h: np.ndarray,
                  cache: dict) -> float:
    """Mixed partial D^alpha of f at p via tensor-product central stencils."""
    stencils = []
    for m in alpha:
        if m == 0:
            stencils.append((np.array([0]), np.array([1.0])))
        else:
            K = (m + 1) // 2 if m % 2 else m // 2
            K = max(K, (m + 1) // 2)
            offs = np.arange(-K, K + 1)
            stencils.append((offs, _fornberg_weights(m, offs.astype(float))))
    total = 0.0
    idx = [0] * len(alpha)
    dims = [len(s[0]) for s in stencils]

    def rec(d: int, weight: float, shift: tuple):
        nonlocal total
        if d == len(alpha):
            keyed = shift
            if keyed not in cache:
                x = p_re + np.array(shift) * h
                cache[keyed] = f_real(x)
            total += weight * cache[keyed]
            return
        offs, w = stencils[d]
        for i in range(dims[d]):
            if w[i] == 0.0:
                continue
            rec(d + 1, weight * w[i], shift + (int(offs[i]),))

    rec(0, 1.0, ())
    denom = 1.0
    for m, hh in zip(alpha, h):
        denom *= hh ** m
    return total / denom


def taylor_jet(f, p, degree_bound: int, base_step: float = 1e-3) -> RealJet:
    """Taylor jet of f at p in centered coordinates w = z - p.

    f may be a RealJet (exact recentering), an object with a
    ``jet(p, degree_bound)`` oracle, or a plain callable on complex
    n-vectors (central differences with one Richardson level).
    """
    if isinstance(f, RealJet):
        p = np.asarray(p, dtype=np.complex128)
        if len(p) != f.dim:
            raise JetError("point dimension mismatch")
        shift = PolyMap.affine(np.eye(f.dim), p)
        return compose(f, shift, degree_bound)
    oracle = getattr(f, "jet", None)
    if callable(oracle):
        jet = oracle(np.asarray(p, dtype=np.complex128), degree_bound)
        if not isinstance(jet, RealJet):
            raise JetError("jet oracle must return a RealJet")
        return jet
    if not callable(f):
        raise JetError("taylor_jet needs a RealJet, a jet oracle, or a callable")
    return _taylor_jet_fd(f, p, degree_bound, base_step)


def _taylor_jet_fd(f: Callable, p, degree_bound: int, base_step: float) -> RealJet:
    p = np.asarray(p, dtype=np.complex128)
    n = len(p)
    p_re = np.empty(2 * n)
    p_re[0::2] = p.real
    p_re[1::2] = p.imag

    def f_real(x: np.ndarray) -> float:
        return float(f(x[0::2] + 1j * x[1::2]))

    eps = np.finfo(float).eps
    scale = np.maximum(1.0, np.abs(p_re))

    # Real mixed partials, cached per (order, alpha); one Richardson level
    # (central stencils are O(h^2), the pair combination is O(h^4)).
    partials: dict[tuple[int, ...], float] = {}
    caches: dict[float, dict] = {}

    def partial(alpha: tuple[int, ...]) -> float:
        if alpha in partials:
            return partials[alpha]
        m = sum(alpha)
        if m == 0:
            val = f_real(p_re)
        else:
            h0 = max(base_step, eps ** (1.0 / (m + 4)))
            h = h0 * scale
            c1 = caches.setdefault(h0, {})
            c2 = caches.setdefault(h0 / 2, {})
            a = _real_partial(f_real, p_re, alpha, h, c1)
            b = _real_partial(f_real, p_re, alpha, h / 2, c2)
            val = (4.0 * b - a) / 3.0
        partials[alpha] = val
        return val

    def exponent_vectors(total_max: int, length: int):
        if length == 0:
            yield ()
            return
        for head in range(total_max + 1):
            for tail in exponent_vectors(total_max - head, length - 1):
                yield (head,) + tail

    coeffs: dict[Key, complex] = {}
    for mu in exponent_vectors(degree_bound, n):
        for nu in exponent_vectors(degree_bound - sum(mu), n):
            # Wirtinger coefficient c_{mu,nu} as a combination of real partials.
            val = 0j
            factor = 1.0
            for mj, nj in zip(mu, nu):
                factor *= math.factorial(mj) * math.factorial(nj) * 2.0 ** (mj + nj)
            combos = [((), 1.0 + 0j)]
            for j in range(n):
                mj, nj = mu[j], nu[j]
                new = []
                for prefix, w in combos:
                    for a in range(mj + 1):
                        for b in range(nj + 1):
                            ww = (w * math.comb(mj, a) * math.comb(nj, b)
                                  * (-1j) ** (mj - a) * (1j) ** (nj - b))
                            new.append((prefix + (a + b, mj + nj - a - b), ww))
                combos = new
            for alpha, w in combos:
                if w == 0:
                    continue
                val += w * partial(alpha)
            c = val / factor
            if c != 0:
                coeffs[(mu, nu)] = c

    # f is real-valued: project onto conjugate-symmetric coefficients and
    # drop pure FD noise relative to the jet scale.
    sym: dict[Key, complex] = {}
    for (mu, nu), c in coeffs.items():
        sym[(mu, nu)] = 0.5 * (c + np.conj(coeffs.get((nu, mu), 0j)))
    scale_c = max((abs(c) for c in sym.values()), default=1.0)
    cleaned = {k: c for k, c in sym.items() if abs(c) > 1e-8 * max(1.0, scale_c)}
    return RealJet(n, degree_bound, cleaned)
