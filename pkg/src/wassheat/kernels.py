"""Symmetric kernels Phi on (R^d)^k with first and second derivative blocks.

All evaluation methods are batched: ``X`` has shape ``(N, k, d)`` and holds N
tuples ``(x_1, ..., x_k)``.

* ``value(X)``  -> (N,)
* ``grad1(X)``  -> (N, d), gradient in the first slot
* ``hess11(X)`` -> (N, d, d), second derivative in the first slot
* ``hess12(X)`` -> (N, d, d), entry ``[a, b] = d^2 Phi / d(x_1)_a d(x_2)_b``

Other slots are reached by permuting the tuple, which is legitimate because
every kernel is symmetric.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ArityGuardExceeded, DimensionMismatch

MAX_SYMMETRIZE_ARITY = 8


def _perms(k: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(k))), dtype=int).reshape(-1, k)


def _slot_order(k: int, first: int, second: Optional[int] = None) -> list:
    lead = [first] if second is None else [first, second]
    return lead + [j for j in range(k) if j not in lead]


class SymmetricKernel:
    """Base class. Subclasses implement the four batched maps."""

    arity: int
    dim: int
    sup_hess: float = math.inf
    support_radius: Optional[float] = None
    is_complex: bool = False

    def value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad1(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess11(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess12(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def functional(self, m):
        """Closed-form ``F_Phi[m]`` when the family has one, else ``None``."""
        return None

    @property
    def dtype(self):
        return complex if self.is_complex else float

    def _prep(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[None]
        if X.shape[1:] != (self.arity, self.dim):
            raise DimensionMismatch(
                f"expected tuples of shape ({self.arity}, {self.dim}), got {X.shape[1:]}"
            )
        return X

    def __call__(self, x):
        """Value at a single tuple of shape (k, d)."""
        return self.value(self._prep(x))[0]

    # -- derived blocks -------------------------------------------------------

    def grad_slot(self, X, p: int) -> np.ndarray:
        X = self._prep(X)
        return self.grad1(X[:, _slot_order(self.arity, p), :])

    def hess_block(self, X, p: int, q: int) -> np.ndarray:
        """``d^2 Phi / d(x_p)_a d(x_q)_b`` for every tuple."""
        X = self._prep(X)
        if p == q:
            return self.hess11(X[:, _slot_order(self.arity, p), :])
        return self.hess12(X[:, _slot_order(self.arity, p, q), :])

    def full_hessian(self, X) -> np.ndarray:
        """The (N, k d, k d) Hessian assembled from the two derivative blocks."""
        X = self._prep(X)
        k, d = self.arity, self.dim
        H = np.zeros((X.shape[0], k * d, k * d), dtype=self.dtype)
        for p in range(k):
            for q in range(k):
                H[:, p * d:(p + 1) * d, q * d:(q + 1) * d] = self.hess_block(X, p, q)
        return H

    def theta(self, X, eps: float = 0.0) -> np.ndarray:
        """Pointwise ``(1+eps) sum_j Lap_{x_j} Phi + sum_{j != l} div_{x_j} grad_{x_l} Phi``."""
        X = self._prep(X)
        k = self.arity
        out = np.zeros(X.shape[0], dtype=self.dtype)
        for p in range(k):
            out += (1.0 + eps) * np.trace(self.hess_block(X, p, p), axis1=1, axis2=2)
            for q in range(k):
                if q != p:
                    out += np.trace(self.hess_block(X, p, q), axis1=1, axis2=2)
        return out

    def __add__(self, other):
        return LinearCombination([self, other], [1.0, 1.0])

    def __rmul__(self, c):
        return LinearCombination([self], [c])

    __mul__ = __rmul__


class LinearCombination(SymmetricKernel):
    def __init__(self, kernels: Sequence[SymmetricKernel], coefs: Sequence[complex]):
        kernels = list(kernels)
        if not kernels:
            raise ValueError("need at least one kernel")
        k, d = kernels[0].arity, kernels[0].dim
        if any(K.arity != k or K.dim != d for K in kernels):
            raise DimensionMismatch("kernels must share arity and dimension")
        self.kernels, self.coefs = kernels, list(coefs)
        self.arity, self.dim = k, d
        self.is_complex = any(K.is_complex for K in kernels) or any(
            isinstance(c, complex) for c in self.coefs
        )
        self.sup_hess = sum(abs(c) * K.sup_hess for c, K in zip(self.coefs, kernels))
        radii = [K.support_radius for K in kernels]
        self.support_radius = None if None in radii else max(radii)

    def _mix(self, name, X):
        X = self._prep(X)
        return sum(c * getattr(K, name)(X) for c, K in zip(self.coefs, self.kernels))

    def value(self, X):
        return self._mix("value", X)

    def grad1(self, X):
        return self._mix("grad1", X)

    def hess11(self, X):
        return self._mix("hess11", X)

    def hess12(self, X):
        return self._mix("hess12", X)

    def functional(self, m):
        parts = [K.functional(m) for K in self.kernels]
        if any(p is None for p in parts):
            return None
        return sum(c * p for c, p in zip(self.coefs, parts))


class ExponentialKernel(SymmetricKernel):
    """Symmetrized plane wave ``(1/k!) sum_sigma exp(-2 pi i sum_j <xi_sigma(j), x_j>)``."""

    is_complex = True

    def __init__(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 1:
            xi = xi[:, None]
        self.xi = xi
        self.arity, self.dim = xi.shape
        if self.arity > MAX_SYMMETRIZE_ARITY:
            raise ArityGuardExceeded(f"arity {self.arity} > {MAX_SYMMETRIZE_ARITY}")
        self._P = _perms(self.arity)
        self._xiP = xi[self._P]  # (S, k, d)
        self.sup_hess = 4 * np.pi**2 * float(np.sum(xi * xi))

    def _waves(self, X):
        X = self._prep(X)
        phase = np.einsum("njd,sjd->ns", X, self._xiP)
        return np.exp(-2j * np.pi * phase) / len(self._P)

    def value(self, X):
        return self._waves(X).sum(axis=1)

    def grad1(self, X):
        return -2j * np.pi * self._waves(X) @ self._xiP[:, 0, :]

    def hess11(self, X):
        v = self._xiP[:, 0, :]
        return -4 * np.pi**2 * np.einsum("ns,sa,sb->nab", self._waves(X), v, v)

    def hess12(self, X):
        if self.arity < 2:
            return np.zeros((np.asarray(X).reshape(-1, 1, self.dim).shape[0], self.dim, self.dim), complex)
        return -4 * np.pi**2 * np.einsum(
            "ns,sa,sb->nab", self._waves(X), self._xiP[:, 0, :], self._xiP[:, 1, :]
        )

    def functional(self, m):
        from .measures import char_fn

        return complex(np.prod(char_fn(m, self.xi))) / self.arity


class TensorPolynomial(SymmetricKernel):
    """Symmetrized sum of monomials ``c prod_j prod_a (x_j)_a^{E[j, a]}``.

    ``terms`` is a list of ``(coef, E)`` with ``E`` of shape (k, d).
    """

    def __init__(self, terms, arity: Optional[int] = None, dim: Optional[int] = None):
        parsed = []
        for coef, E in terms:
            E = np.asarray(E, dtype=int)
            if E.ndim == 1:
                E = E[:, None]
            parsed.append((float(coef), E))
        if not parsed:
            raise ValueError("empty polynomial")
        self.arity, self.dim = parsed[0][1].shape
        if any(E.shape != (self.arity, self.dim) for _, E in parsed):
            raise DimensionMismatch("all exponent arrays must share shape (k, d)")
        if self.arity > MAX_SYMMETRIZE_ARITY:
            raise ArityGuardExceeded(f"arity {self.arity} > {MAX_SYMMETRIZE_ARITY}")
        self.terms = parsed
        P = _perms(self.arity)
        mono = {}
        for coef, E in parsed:
            for perm in P:
                key = E[perm].tobytes()
                c, _ = mono.get(key, (0.0, E[perm]))
                mono[key] = (c + coef / len(P), E[perm])
        self._mono = [(c, E) for c, E in mono.values() if c != 0.0]
        degree = max(int(E.sum()) for _, E in parsed)
        if degree <= 2:
            H = self.full_hessian(np.zeros((1, self.arity, self.dim)))[0]
            self.sup_hess = float(np.linalg.norm(H, 2))

    @classmethod
    def monomial(cls, exponents, coef: float = 1.0):
        return cls([(coef, exponents)])

    @staticmethod
    def _eval_mono(X, c, E):
        return c * np.prod(np.power(X, E[None]), axis=(1, 2))

    def _sum(self, X, derivs):
        """Sum of monomials differentiated along the (slot, coord) pairs in ``derivs``."""
        X = self._prep(X)
        out = np.zeros(X.shape[0])
        for c, E in self._mono:
            E = E.copy()
            for j, a in derivs:
                if E[j, a] == 0:
                    c = 0.0
                    break
                c = c * E[j, a]
                E[j, a] -= 1
            if c != 0.0:
                out = out + self._eval_mono(X, c, E)
        return out

    def value(self, X):
        return self._sum(X, [])

    def grad1(self, X):
        X = self._prep(X)
        return np.stack([self._sum(X, [(0, a)]) for a in range(self.dim)], axis=1)

    def _hess(self, X, s):
        X = self._prep(X)
        d = self.dim
        out = np.empty((X.shape[0], d, d))
        for a in range(d):
            for b in range(d):
                out[:, a, b] = self._sum(X, [(0, a), (s, b)])
        return out

    def hess11(self, X):
        return self._hess(X, 0)

    def hess12(self, X):
        if self.arity < 2:
            return np.zeros((self._prep(X).shape[0], self.dim, self.dim))
        return self._hess(X, 1)


# -- radial difference kernels ------------------------------------------------

def _profile(name: str, scale: float, dim: int):
    """Even C^2 profiles f(z) with gradient, Hessian and a bound on |Hess f|."""
    s = float(scale)
    eye = np.eye(dim)

    if name == "gauss":
        def f(z):
            return np.exp(-np.sum(z * z, -1) / (2 * s * s))

        def g(z):
            return -z / s**2 * f(z)[:, None]

        def h(z):
            return (np.einsum("na,nb->nab", z, z) / s**4 - eye / s**2) * f(z)[:, None, None]

        return f, g, h, 1.0 / s**2
    if name == "cauchy":
        def f(z):
            return 1.0 / (1.0 + np.sum(z * z, -1) / s**2)

        def g(z):
            return -2 * z / s**2 * (f(z) ** 2)[:, None]

        def h(z):
            q = f(z)
            return (-2 / s**2 * (q**2)[:, None, None] * eye
                    + 8 / s**4 * (q**3)[:, None, None] * np.einsum("na,nb->nab", z, z))

        return f, g, h, 2.0 / s**2
    if name == "quadratic":
        def f(z):
            return np.sum(z * z, -1) / s**2

        def g(z):
            return 2 * z / s**2

        def h(z):
            return np.broadcast_to(2 * eye / s**2, (z.shape[0], dim, dim)).copy()

        return f, g, h, 2.0 / s**2
    if name == "cos":
        omega = np.zeros(dim)
        omega[0] = 1.0 / s

        def f(z):
            return np.cos(2 * np.pi * z @ omega)

        def g(z):
            return -2 * np.pi * np.sin(2 * np.pi * z @ omega)[:, None] * omega

        def h(z):
            return (-4 * np.pi**2 * np.cos(2 * np.pi * z @ omega)[:, None, None]
                    * np.outer(omega, omega))

        return f, g, h, 4 * np.pi**2 / s**2
    if name == "abs_cubed":
        # C^2 but not C^3 at the origin.
        def f(z):
            return np.linalg.norm(z, axis=-1) ** 3 / s**3

        def g(z):
            return 3 * np.linalg.norm(z, axis=-1)[:, None] * z / s**3

        def h(z):
            r = np.linalg.norm(z, axis=-1)
            safe = np.where(r > 0, r, 1.0)
            outer = np.einsum("na,nb->nab", z, z) / safe[:, None, None]
            return 3 / s**3 * (r[:, None, None] * eye + outer)

        return f, g, h, math.inf
    raise ValueError(f"unknown radial profile {name!r}")


RADIAL_PROFILES = ("gauss", "cauchy", "quadratic", "cos", "abs_cubed")


class RadialDifference(SymmetricKernel):
    """``Phi(x, y) = f(x - y)`` for an even profile ``f``."""

    arity = 2

    def __init__(self, f: str = "gauss", scale: float = 1.0, dim: int = 1):
        self.name, self.scale, self.dim = f, float(scale), int(dim)
        self._f, self._g, self._h, bound = _profile(f, scale, self.dim)
        self.sup_hess = 2.0 * bound

    def value(self, X):
        X = self._prep(X)
        return self._f(X[:, 0] - X[:, 1])

    def grad1(self, X):
        X = self._prep(X)
        return self._g(X[:, 0] - X[:, 1])

    def hess11(self, X):
        X = self._prep(X)
        return self._h(X[:, 0] - X[:, 1])

    def hess12(self, X):
        return -self.hess11(X)

    def laplacian_profile(self, z) -> np.ndarray:
        """``Lap f`` at the difference vectors ``z`` (N, d)."""
        return np.trace(self._h(np.asarray(z, float)), axis1=1, axis2=2)


# -- compactly supported bumps ------------------------------------------------

class BumpProduct(SymmetricKernel):
    """Symmetrized product of C^3 bumps ``(1 - |x - c|^2/rho^2)_+^4``.

    ``centers`` has shape (k, d); slot j carries a bump centred at
    ``centers[sigma(j)]`` and the product is averaged over permutations.
    """

    def __init__(self, radius: float = 1.0, centers=None, arity: int = 1, dim: int = 1,
                 amplitude: float = 1.0):
        if centers is None:
            centers = np.zeros((arity, dim))
        centers = np.asarray(centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        self.centers = centers
        self.arity, self.dim = centers.shape
        if self.arity > MAX_SYMMETRIZE_ARITY:
            raise ArityGuardExceeded(f"arity {self.arity} > {MAX_SYMMETRIZE_ARITY}")
        self.rho = float(radius)
        self.amplitude = float(amplitude)
        self._C = centers[_perms(self.arity)]  # (S, k, d)
        self.support_radius = float(np.max(np.linalg.norm(centers, axis=1))) + self.rho
        b1, b2 = self._profile_bounds()
        k = self.arity
        self.sup_hess = abs(self.amplitude) * math.sqrt(k * b2**2 + k * (k - 1) * b1**4)

    def _profile_bounds(self):
        r = np.linspace(0.0, self.rho, 20001)
        u = (r / self.rho) ** 2
        grad = 8 * (1 - u) ** 3 * r / self.rho**2
        trans = 8 * (1 - u) ** 3 / self.rho**2
        radial = np.abs(-8 * (1 - u) ** 3 / self.rho**2 + 48 * (1 - u) ** 2 * r**2 / self.rho**4)
        # grid maxima of smooth profiles, padded for the grid spacing
        return 1.001 * grad.max(), 1.001 * max(trans.max(), radial.max())

    def _parts(self, X):
        X = self._prep(X)
        z = X[:, None, :, :] - self._C[None]  # (N, S, k, d)
        u = np.sum(z * z, -1) / self.rho**2
        inside = u < 1.0
        t = np.where(inside, 1.0 - u, 0.0)
        b = t**4
        db = (-8 * t**3 / self.rho**2)[..., None] * z  # gradient of each factor
        return z, t, b, db

    @staticmethod
    def _rest(b, skip):
        keep = [j for j in range(b.shape[-1]) if j not in skip]
        return np.prod(b[..., keep], axis=-1)

    def value(self, X):
        _, _, b, _ = self._parts(X)
        return self.amplitude * np.prod(b, axis=-1).mean(axis=1)

    def grad1(self, X):
        _, _, b, db = self._parts(X)
        return self.amplitude * np.einsum("nsa,ns->na", db[:, :, 0], self._rest(b, {0})) / b.shape[1]

    def hess11(self, X):
        z, t, b, _ = self._parts(X)
        z0, t0 = z[:, :, 0], t[:, :, 0]
        eye = np.eye(self.dim)
        H = (-8 * t0**3 / self.rho**2)[..., None, None] * eye + (
            48 * t0**2 / self.rho**4
        )[..., None, None] * np.einsum("nsa,nsb->nsab", z0, z0)
        return self.amplitude * np.einsum("nsab,ns->nab", H, self._rest(b, {0})) / b.shape[1]

    def hess12(self, X):
        _, _, b, db = self._parts(X)
        if self.arity < 2:
            return np.zeros((b.shape[0], self.dim, self.dim))
        outer = np.einsum("nsa,nsb->nsab", db[:, :, 0], db[:, :, 1])
        return self.amplitude * np.einsum("nsab,ns->nab", outer, self._rest(b, {0, 1})) / b.shape[1]


# -- user callbacks -------------------------------------------------------------

class GenericCallback(SymmetricKernel):
    """Kernel from a batched callable; derivatives by central differences.

    First derivatives use step ``1e-5 (1 + |x|)``; second derivatives use
    ``1e-4 (1 + |x|)`` so that rounding stays well below the truncation error.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], arity: int, dim: int,
                 sup_hess: float = math.inf, support_radius: Optional[float] = None,
                 is_complex: bool = False):
        self.fn, self.arity, self.dim = fn, int(arity), int(dim)
        self.sup_hess, self.support_radius, self.is_complex = sup_hess, support_radius, is_complex

    def value(self, X):
        X = self._prep(X)
        return np.asarray(self.fn(X), dtype=self.dtype).reshape(X.shape[0])

    def _step(self, X, rel):
        return rel * (1.0 + np.linalg.norm(X.reshape(X.shape[0], -1), axis=1))

    def grad1(self, X):
        X = self._prep(X)
        h = self._step(X, 1e-5)
        out = np.empty((X.shape[0], self.dim), dtype=self.dtype)
        for a in range(self.dim):
            E = np.zeros_like(X)
            E[:, 0, a] = h
            out[:, a] = (self.value(X + E) - self.value(X - E)) / (2 * h)
        return out

    def _mixed(self, X, s):
        h = self._step(X, 1e-4)
        out = np.empty((X.shape[0], self.dim, self.dim), dtype=self.dtype)
        for a in range(self.dim):
            for b in range(self.dim):
                Ea = np.zeros_like(X)
                Eb = np.zeros_like(X)
                Ea[:, 0, a] = h
                Eb[:, s, b] = h
                out[:, a, b] = (
                    self.value(X + Ea + Eb) - self.value(X + Ea - Eb)
                    - self.value(X - Ea + Eb) + self.value(X - Ea - Eb)
                ) / (4 * h * h)
        return out

    def hess11(self, X):
        return self._mixed(self._prep(X), 0)

    def hess12(self, X):
        X = self._prep(X)
        if self.arity < 2:
            return np.zeros((X.shape[0], self.dim, self.dim), dtype=self.dtype)
        return self._mixed(X, 1)


def symmetrize(raw: Callable[[np.ndarray], np.ndarray], k: int, d: int, **kwargs) -> GenericCallback:
    """Average ``raw`` over all slot permutations.

    ``raw`` maps an (N, k, d) batch to (N,) values.
    """
    if k > MAX_SYMMETRIZE_ARITY:
        raise ArityGuardExceeded(f"k={k} exceeds {MAX_SYMMETRIZE_ARITY} ({math.factorial(k)} terms)")
    P = _perms(k)

    def fn(X):
        return sum(np.asarray(raw(X[:, p, :])) for p in P) / len(P)

    return GenericCallback(fn, k, d, **kwargs)


# -- config ---------------------------------------------------------------------

def kernel_from_config(cfg: dict, dim: int = 1, arity: Optional[int] = None) -> SymmetricKernel:
    """Build a kernel from its JSON description."""
    family = cfg.get("family")
    if family == "exponential":
        return ExponentialKernel(cfg["xi"])
    if family == "tensor_poly":
        if "terms" in cfg:
            return TensorPolynomial([(t.get("coef", 1.0), t["exponents"]) for t in cfg["terms"]])
        return TensorPolynomial([(cfg.get("coef", 1.0), cfg["exponents"])])
    if family == "radial_difference":
        return RadialDifference(cfg.get("f", "gauss"), cfg.get("scale", 1.0), cfg.get("dim", dim))
    if family == "bump_product":
        centers = cfg.get("centers")
        return BumpProduct(
            radius=cfg.get("radius", 1.0),
            centers=centers,
            arity=cfg.get("arity", arity or 1),
            dim=cfg.get("dim", dim),
            amplitude=cfg.get("amplitude", 1.0),
        )
    raise ValueError(f"unknown kernel family {family!r}")
