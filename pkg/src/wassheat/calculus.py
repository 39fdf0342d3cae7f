"""Polynomial functionals F_Phi[m] = (1/k) int Phi dm^k and their Wasserstein derivatives.

Every integral against a discrete product measure is an exact weighted sum
over index tuples, evaluated in fixed-size chunks. Each chunk is reduced to an
exact expansion (a short list of floats with the same exact sum) and the
expansions are combined with ``math.fsum``, so the result is the correctly
rounded sum of all terms: independent of chunking and of atom order.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, TensorGuardExceeded
from .kernels import SymmetricKernel
from .measures import DiscreteMeasure, make_discrete

TENSOR_GUARD = 10**7
CHUNK = 1024 * 64


def _check(phi: SymmetricKernel, m: DiscreteMeasure):
    if phi.dim != m.dim:
        raise DimensionMismatch(f"kernel dim {phi.dim} != measure dim {m.dim}")


def _expansion(terms: list) -> list:
    """Floats whose exact sum equals the exact sum of ``terms``."""
    out = []
    while True:
        s = math.fsum(terms + [-c for c in out])
        if s == 0.0:
            return out
        out.append(s)


class _ExactAccumulator:
    """Column-wise exact accumulation of (N, ...) term blocks."""

    def __init__(self):
        self.shape = None
        self.cols = None
        self.complex = False

    def add(self, terms: np.ndarray):
        if self.shape is None:
            self.shape = terms.shape[1:]
            self.complex = np.iscomplexobj(terms)
            width = int(np.prod(self.shape, dtype=int))
            self.cols = [[] for _ in range(width * (2 if self.complex else 1))]
        flat = terms.reshape(terms.shape[0], -1)
        blocks = [flat.real, flat.imag] if self.complex else [flat]
        c = 0
        for b in blocks:
            for col in b.T:
                self.cols[c].extend(_expansion(col.tolist()))
                c += 1

    def total(self):
        vals = np.array([math.fsum(c) for c in self.cols])
        if self.complex:
            half = len(vals) // 2
            vals = vals[:half] + 1j * vals[half:]
        return vals.reshape(self.shape)


def tensor_sum(fn, m: DiscreteMeasure, k: int, fixed=None):
    """``sum_J w_J fn(X_J)`` over tuples whose leading slots are ``fixed``.

    ``fixed`` is an (f, d) array of points occupying slots 0..f-1; the other
    ``k - f`` slots run over all atoms of ``m``. ``fn`` maps an (N, k, d)
    batch to an array with leading axis N.
    """
    d = m.dim
    fixed = np.zeros((0, d)) if fixed is None else np.asarray(fixed, float).reshape(-1, d)
    free = k - fixed.shape[0]
    n = m.size
    total = n**free
    if total > TENSOR_GUARD:
        raise TensorGuardExceeded(f"{n}^{free} = {total} tuples exceeds {TENSOR_GUARD}")
    acc = _ExactAccumulator()
    for start in range(0, total, CHUNK):
        flat = np.arange(start, min(start + CHUNK, total))
        idx = np.stack(np.unravel_index(flat, (n,) * free), axis=1) if free else np.zeros((1, 0), int)
        X = np.concatenate(
            [np.broadcast_to(fixed, (idx.shape[0],) + fixed.shape), m.atoms[idx]], axis=1
        )
        w = np.prod(m.weights[idx], axis=1)
        vals = np.asarray(fn(X))
        acc.add(w.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals)
    return acc.total()


def _scalar(x):
    x = complex(x)
    return x.real if x.imag == 0 else x


def eval_F(phi: SymmetricKernel, m: DiscreteMeasure, fast: bool = True):
    """``F_Phi[m]``; plane-wave kernels use the product of transforms when ``fast``."""
    _check(phi, m)
    if fast:
        val = phi.functional(m)
        if val is not None:
            return _scalar(val)
    return _scalar(tensor_sum(phi.value, m, phi.arity) / phi.arity)


def _points(x, d):
    x = np.asarray(x, float)
    single = x.ndim <= 1
    return x.reshape(-1, d), single


def grad_w(phi: SymmetricKernel, m: DiscreteMeasure, x1) -> np.ndarray:
    """``A_m(x1) = int grad_{x1} Phi(x1, x2, ...) dm(x2)...dm(xk)``; ``x1`` may be (p, d)."""
    _check(phi, m)
    pts, single = _points(x1, m.dim)
    out = np.stack([tensor_sum(phi.grad1, m, phi.arity, p[None]) for p in pts])
    return out[0] if single else out


def grad_grad_w(phi: SymmetricKernel, m: DiscreteMeasure, x1) -> np.ndarray:
    """``int Hess_{x1 x1} Phi dm^{k-1}`` at ``x1``."""
    _check(phi, m)
    pts, single = _points(x1, m.dim)
    out = np.stack([tensor_sum(phi.hess11, m, phi.arity, p[None]) for p in pts])
    return out[0] if single else out


def hess_offdiag(phi: SymmetricKernel, m: DiscreteMeasure, x1, x2) -> np.ndarray:
    """``A_mm(x1, x2) = (k-1) int d^2 Phi / dx2 dx1 dm^{k-2}``; zero when k = 1.

    Entry ``[a, b]`` is the derivative in ``(x1)_a`` and ``(x2)_b``.
    """
    _check(phi, m)
    d = m.dim
    if phi.arity == 1:
        return np.zeros((d, d), dtype=phi.dtype)
    fixed = np.stack([np.asarray(x1, float).reshape(d), np.asarray(x2, float).reshape(d)])
    return (phi.arity - 1) * tensor_sum(phi.hess12, m, phi.arity, fixed)


def _field(z, m: DiscreteMeasure) -> np.ndarray:
    z = np.asarray(z)
    if z.ndim == 1:
        z = np.broadcast_to(z, (m.size, m.dim))
    if z.shape != (m.size, m.dim):
        raise DimensionMismatch(f"vector field must be ({m.size}, {m.dim}), got {z.shape}")
    return z


def hess_quadratic_form(phi: SymmetricKernel, m: DiscreteMeasure, zeta1, zeta2):
    """``int <A~ z1, z2> dm + iint <A_mm(x, a) z1(a), z2(x)> dm(x) dm(a)``.

    Fields are given by their values at the atoms; a single vector means a
    constant field. The form is bilinear (no conjugation).
    """
    _check(phi, m)
    z1, z2 = _field(zeta1, m), _field(zeta2, m)
    At = grad_grad_w(phi, m, m.atoms)  # (n, d, d)
    diag = np.einsum("i,iab,ib,ia->", m.weights, At, z1, z2)
    off = 0.0
    if phi.arity > 1:
        for i, x in enumerate(m.atoms):
            for a, y in enumerate(m.atoms):
                Amm = hess_offdiag(phi, m, x, y)
                off = off + m.weights[i] * m.weights[a] * (z2[i] @ Amm @ z1[a])
    return _scalar(diag + off)


def _theta_fn(phi: SymmetricKernel, eps: float):
    k = phi.arity

    def fn(X):
        out = (1.0 + eps) * np.trace(phi.hess11(X), axis1=1, axis2=2)
        if k > 1:
            out = out + (k - 1) * np.trace(phi.hess12(X), axis1=1, axis2=2)
        return out

    return fn


def laplacian_w(phi: SymmetricKernel, m: DiscreteMeasure, eps: float = 0.0):
    """``Delta_{w,eps} F_Phi[m]`` as one pass over k-tuples.

    By symmetry of Phi and of ``m^k`` the pointwise sum over slots collapses
    to ``(1+eps) k tr H11 + k(k-1) tr H12``; dividing by k as in ``F`` leaves
    the integrand used here.
    """
    _check(phi, m)
    return _scalar(tensor_sum(_theta_fn(phi, eps), m, phi.arity))


def laplacian_decomposition(phi: SymmetricKernel, m: DiscreteMeasure, eps: float = 0.0):
    """The two summands ``(1+eps) int tr A~ dm`` and ``iint tr A_mm dm dm``.

    Computed from :func:`grad_grad_w` and :func:`hess_offdiag`, independently
    of :func:`laplacian_w`.
    """
    _check(phi, m)
    At = grad_grad_w(phi, m, m.atoms)
    local = (1.0 + eps) * np.einsum("i,iaa->", m.weights, At)
    cross = 0.0
    if phi.arity > 1:
        for i, x in enumerate(m.atoms):
            for a, y in enumerate(m.atoms):
                cross = cross + m.weights[i] * m.weights[a] * np.trace(hess_offdiag(phi, m, x, y))
    return _scalar(local), _scalar(cross)


def _config(x, d):
    x = np.asarray(x, float)
    return x.reshape(-1, d)


def empirical_laplacian(phi: SymmetricKernel, x, method: str = "symbolic", h: float = 1e-4):
    """``Delta_w U[m_x]`` for ``U = F_Phi`` and the uniform measure ``m_x`` on the rows of x.

    ``symbolic`` sums the pointwise operator ``Theta_0`` (derivatives in every
    slot, cross terms included) over all tuples of configuration points.
    ``fd`` differentiates ``u(x) = U(m_x)`` directly: the operator is
    ``sum_i (sum_j d/d(x_j)_i)^2 u``, a second difference along the common
    shift of all points.
    """
    pts = _config(x, phi.dim)
    n, d, k = pts.shape[0], phi.dim, phi.arity
    if method == "symbolic":
        idx = np.stack(np.unravel_index(np.arange(n**k), (n,) * k), axis=1)
        if n**k > TENSOR_GUARD:
            raise TensorGuardExceeded(f"{n}^{k} tuples exceeds {TENSOR_GUARD}")
        acc = _ExactAccumulator()
        for s in range(0, len(idx), CHUNK):
            acc.add(np.asarray(phi.theta(pts[idx[s:s + CHUNK]], 0.0)))
        return _scalar(acc.total() / (k * n**k))
    if method == "fd":
        def u(p):
            return eval_F(phi, make_discrete(p))

        base = u(pts)
        total = 0.0
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            total += (u(pts + e) - 2 * base + u(pts - e)) / h**2
        return _scalar(total)
    raise ValueError(f"unknown method {method!r}")


# -- batched evaluators on uniform empirical measures -------------------------

def _multi_indices(r: int, k: int) -> np.ndarray:
    return np.stack(np.unravel_index(np.arange(r**k), (r,) * k), axis=1)


def eval_F_uniform_batch(phi: SymmetricKernel, X: np.ndarray) -> np.ndarray:
    """``F_Phi[m_x]`` for each configuration; ``X`` has shape (N, r, d)."""
    X = np.asarray(X, float)
    r = X.shape[1]
    idx = _multi_indices(r, phi.arity)
    acc = sum(phi.value(X[:, J, :]) for J in idx)
    return acc / (len(idx) * phi.arity)


def laplacian_uniform_batch(phi: SymmetricKernel, X: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """``Delta_{w,eps} F_Phi[m_x]`` for each configuration in (N, r, d)."""
    X = np.asarray(X, float)
    r = X.shape[1]
    idx = _multi_indices(r, phi.arity)
    fn = _theta_fn(phi, eps)
    return sum(fn(X[:, J, :]) for J in idx) / len(idx)


def mean_grad_uniform_batch(phi: SymmetricKernel, X: np.ndarray) -> np.ndarray:
    """``int grad_w F_Phi[m_x] dm_x`` for each configuration, shape (N, d)."""
    X = np.asarray(X, float)
    r = X.shape[1]
    idx = _multi_indices(r, phi.arity)
    return sum(phi.grad1(X[:, J, :]) for J in idx) / len(idx)
