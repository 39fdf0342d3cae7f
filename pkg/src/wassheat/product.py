"""Signed measures on pairs of measures built from Lebesgue measure on balls.

A tuple ``x`` uniform on ``B_R^k`` is pushed to the pair ``(m_{x_I}, m_{x_J})``
of empirical sub-measures. ``P^{I,J,R}`` is that push-forward (with total mass
``vol(B_R)^k``) and

    P^{k,R} = k^2/(k!)^3 sum_{r,p} (-1)^(r+p) r^k p^k sum_{|I|=r, |J|=p} P^{I,J,R}.

All (I, J) terms share the same samples of x.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import calculus
from .errors import ArityGuardExceeded, DimensionMismatch, SupportExceedsBall
from .kernels import SymmetricKernel
from .measures import DiscreteMeasure, RngStream, make_discrete

PKR_GUARD = 5
QUAD_MAX_DIM = 3


@dataclass(frozen=True)
class ProductMeasureSpec:
    k: int
    R: float
    dim: int
    n_samples: int
    rng: RngStream

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be > 0")
        if self.k < 1 or self.dim < 1 or self.n_samples < 2:
            raise ValueError("need k >= 1, dim >= 1 and at least two samples")

    @property
    def volume(self) -> float:
        return ball_volume(self.R, self.dim) ** self.k


@dataclass
class DualityResult:
    lhs: float
    rhs: float
    stderr: float
    z: float


def ball_volume(R: float, d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * R**d


def sample_ball_tuple(R: float, d: int, k: int, n: int, rng: RngStream) -> np.ndarray:
    """``n`` tuples with independent points uniform in the d-ball; shape (n, k, d)."""
    gen = rng.generator()
    g = gen.standard_normal((n, k, d))
    direction = g / np.linalg.norm(g, axis=-1, keepdims=True)
    radius = R * gen.random((n, k, 1)) ** (1.0 / d)
    return direction * radius


def _index_sets(k: int):
    return [(r, [np.array(I) for I in itertools.combinations(range(k), r)]) for r in range(1, k + 1)]


def _as_batch(H, batched: bool):
    if batched:
        return H

    def loop(XI, XJ):
        return np.array([H(make_discrete(a), make_discrete(b)) for a, b in zip(XI, XJ)])

    return loop


def _summary(vals):
    vals = np.asarray(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


def integrate_PIJ(H: Callable, I, J, spec: ProductMeasureSpec, batched: bool = False):
    """``(estimate, stderr)`` of ``int_{B_R^k} H(m_{x_I}, m_{x_J}) dx``.

    ``I`` and ``J`` are 1-based index tuples. ``H`` takes two measures, or two
    (N, r, d) configuration batches when ``batched``.
    """
    X = sample_ball_tuple(spec.R, spec.dim, spec.k, spec.n_samples, spec.rng)
    I0, J0 = np.asarray(I) - 1, np.asarray(J) - 1
    vals = np.asarray(_as_batch(H, batched)(X[:, I0], X[:, J0]), dtype=float) * spec.volume
    return _summary(vals)


def pkr_term_table(k: int):
    """``[(I, J, coefficient)]`` with 0-based index tuples."""
    c0 = k**2 / math.factorial(k) ** 3
    out = []
    for r, fam_r in _index_sets(k):
        for p, fam_p in _index_sets(k):
            coef = c0 * (-1) ** (r + p) * r**k * p**k
            out.extend((tuple(I), tuple(J), coef) for I in fam_r for J in fam_p)
    return out


def _signed_samples(H, spec: ProductMeasureSpec, batched: bool) -> np.ndarray:
    if spec.k > PKR_GUARD:
        raise ArityGuardExceeded(f"k={spec.k} exceeds {PKR_GUARD}")
    X = sample_ball_tuple(spec.R, spec.dim, spec.k, spec.n_samples, spec.rng)
    Hb = _as_batch(H, batched)
    acc = np.zeros(spec.n_samples)
    for I, J, coef in pkr_term_table(spec.k):
        acc += coef * np.asarray(Hb(X[:, list(I)], X[:, list(J)]), dtype=float)
    return acc * spec.volume


def _separable_samples(f, g, spec: ProductMeasureSpec, X=None) -> np.ndarray:
    """Signed aggregate for ``H(m1, m2) = <f(m1), g(m2)>``; costs O(2^k) per sample.

    ``f`` and ``g`` map (N, r, d) batches to (N,) or (N, c) arrays.
    """
    k = spec.k
    if k > PKR_GUARD:
        raise ArityGuardExceeded(f"k={k} exceeds {PKR_GUARD}")
    if X is None:
        X = sample_ball_tuple(spec.R, spec.dim, k, spec.n_samples, spec.rng)

    def side(fn):
        tot = 0.0
        for r, fam in _index_sets(k):
            tot = tot + (-1) ** r * r**k * sum(np.asarray(fn(X[:, I]), float) for I in fam)
        return tot

    a, b = side(f), side(g)
    prod = a * b if np.ndim(a) == 1 else np.sum(a * b, axis=-1)
    return k**2 / math.factorial(k) ** 3 * prod * spec.volume


def integrate_PkR(H: Callable, spec: ProductMeasureSpec, batched: bool = False, separable=None):
    """``(value, stderr)`` of ``int H dP^{k,R}`` with common samples for all terms.

    ``separable=(f, g)`` declares ``H(m1, m2) = <f(m1), g(m2)>`` on configuration
    batches and switches to the factorized sum.
    """
    if separable is not None:
        return _summary(_separable_samples(*separable, spec))
    return _summary(_signed_samples(H, spec, batched))


def _check_support(spec, *kernels):
    for K in kernels:
        if K.dim != spec.dim or K.arity != spec.k:
            raise DimensionMismatch("kernel arity/dimension differ from the spec")
        if K.support_radius is None or K.support_radius > spec.R + 1e-12:
            raise SupportExceedsBall(f"support radius {K.support_radius} exceeds R={spec.R}")


def quadrature_pairing(phi: SymmetricKernel, psi: SymmetricKernel, R: float, n_nodes: int = 64,
                       integrand=None) -> float:
    """``(1/k!) int_{[-R, R]^{dk}} phi psi`` by tensor Gauss-Legendre quadrature.

    Both kernels must vanish outside the ball, so the cube gives the ball integral.
    """
    k, d = phi.arity, phi.dim
    if k * d > QUAD_MAX_DIM:
        raise ValueError(f"tensor quadrature limited to {QUAD_MAX_DIM} dimensions")
    # split [-R, R] into panels so kinks at the support edge fall on panel ends
    x, w = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(-R, R, max(n_nodes // 16, 1) + 1)
    nodes = np.concatenate([(a + b) / 2 + (b - a) / 2 * x for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([(b - a) / 2 * w for a, b in zip(edges[:-1], edges[1:])])
    grids = np.meshgrid(*([nodes] * (k * d)), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1).reshape(-1, k, d)
    W = np.ones(1)
    for _ in range(k * d):
        W = np.multiply.outer(W, weights).ravel()
    vals = integrand(X) if integrand is not None else phi.value(X) * psi.value(X)
    return float(np.real(W @ vals)) / math.factorial(k)


def duality_check(phi: SymmetricKernel, psi: SymmetricKernel, spec: ProductMeasureSpec,
                  n_nodes: int = 64) -> DualityResult:
    """Compare ``(1/k!) int phi psi`` with ``int F_phi[m1] F_psi[m2] dP^{k,R}``."""
    _check_support(spec, phi, psi)
    lhs = quadrature_pairing(phi, psi, spec.R, n_nodes)
    f = lambda X: calculus.eval_F_uniform_batch(phi, X)  # noqa: E731
    g = lambda X: calculus.eval_F_uniform_batch(psi, X)  # noqa: E731
    rhs, se = integrate_PkR(None, spec, separable=(f, g))
    z = abs(lhs - rhs) / se if se > 0 else (0.0 if abs(lhs - rhs) < 1e-12 else math.inf)
    return DualityResult(lhs, rhs, se, z)


def d2_bilinear(phi: SymmetricKernel, psi: SymmetricKernel, m1: DiscreteMeasure,
                m2: DiscreteMeasure) -> float:
    """``iint <grad_w F_phi[m1](q1), grad_w F_psi[m2](q2)> dm1 dm2`` as a double atom sum."""
    if phi.dim != psi.dim or m1.dim != m2.dim or phi.dim != m1.dim:
        raise DimensionMismatch("dimensions differ")
    G1 = calculus.grad_w(phi, m1, m1.atoms)
    G2 = calculus.grad_w(psi, m2, m2.atoms)
    total = 0.0
    for i in range(m1.size):
        for j in range(m2.size):
            total += m1.weights[i] * m2.weights[j] * (G1[i] @ G2[j])
    return total


def ibp_measure_check(phi: SymmetricKernel, psi: SymmetricKernel, spec: ProductMeasureSpec) -> DualityResult:
    """``-int Lap_w F_phi[m1] F_psi[m2] dP`` against ``int D2 dP`` on common samples.

    The z-score uses the standard error of the per-sample difference.
    """
    _check_support(spec, phi, psi)
    X = sample_ball_tuple(spec.R, spec.dim, spec.k, spec.n_samples, spec.rng)
    lap = lambda Y: calculus.laplacian_uniform_batch(phi, Y)  # noqa: E731
    Fpsi = lambda Y: calculus.eval_F_uniform_batch(psi, Y)  # noqa: E731
    gphi = lambda Y: calculus.mean_grad_uniform_batch(phi, Y)  # noqa: E731
    gpsi = lambda Y: calculus.mean_grad_uniform_batch(psi, Y)  # noqa: E731
    left = -_separable_samples(lap, Fpsi, spec, X)
    right = _separable_samples(gphi, gpsi, spec, X)
    diff = left - right
    se = float(diff.std(ddof=1) / math.sqrt(len(diff)))
    lhs, rhs = float(left.mean()), float(right.mean())
    z = abs(lhs - rhs) / se if se > 0 else (0.0 if abs(lhs - rhs) < 1e-12 else math.inf)
    return DualityResult(lhs, rhs, se, z)
