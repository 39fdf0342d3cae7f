"""Exact optimal couplings, W2, and first/second order Taylor checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse import coo_matrix

from . import calculus
from .errors import DimensionMismatch, SizeGuardExceeded
from .kernels import SymmetricKernel
from .measures import DiscreteMeasure

SIZE_GUARD = 10**6
MARGINAL_TOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    left: DiscreteMeasure
    right: DiscreteMeasure
    pairs: tuple  # ((i, j, mass), ...) sorted by (i, j)

    def matrix(self) -> np.ndarray:
        G = np.zeros((self.left.size, self.right.size))
        for i, j, w in self.pairs:
            G[i, j] += w
        return G

    def cost(self) -> float:
        return float(sum(w * np.sum((self.left.atoms[i] - self.right.atoms[j]) ** 2)
                         for i, j, w in self.pairs))

    def check_marginals(self, tol: float = MARGINAL_TOL) -> bool:
        G = self.matrix()
        return bool(np.all(G >= 0)
                    and np.allclose(G.sum(1), self.left.weights, rtol=0, atol=tol)
                    and np.allclose(G.sum(0), self.right.weights, rtol=0, atol=tol))


def identity_coupling(m: DiscreteMeasure) -> Coupling:
    return Coupling(m, m, tuple((i, i, float(w)) for i, w in enumerate(m.weights)))


def cost_matrix(m: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    diff = m.atoms[:, None, :] - nu.atoms[None, :, :]
    return np.sum(diff * diff, axis=-1)


def _is_uniform(m: DiscreteMeasure) -> bool:
    return bool(np.all(m.weights == m.weights[0]))


def _transport_lp(a, b, C):
    n, p = C.shape
    rows = np.repeat(np.arange(n), p)
    cols = np.tile(np.arange(p), n)
    var = np.arange(n * p)
    A = coo_matrix(
        (np.ones(2 * n * p), (np.concatenate([rows, n + cols]), np.concatenate([var, var]))),
        shape=(n + p, n * p),
    ).tocsr()
    # one marginal constraint is redundant; drop the last column sum
    res = linprog(
        C.ravel(), A_eq=A[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    G = res.x.reshape(n, p)
    G[G < 1e-14] = 0.0
    return G


def _repair(G, a, b):
    """Nudge an LP plan onto the exact marginals without moving its support."""
    for _ in range(50):
        r = G.sum(1)
        G = G * np.where(r > 0, a / np.where(r > 0, r, 1), 0)[:, None]
        c = G.sum(0)
        G = G * np.where(c > 0, b / np.where(c > 0, c, 1), 0)[None, :]
        if np.abs(G.sum(1) - a).max() < 1e-15:
            break
    return G


def optimal_coupling(m: DiscreteMeasure, nu: DiscreteMeasure):
    """Return ``(coupling, W2)`` for an exact minimizer of the quadratic cost.

    Equal-size uniform measures are solved as an assignment problem; everything
    else as a transportation LP.
    """
    if m.dim != nu.dim:
        raise DimensionMismatch(f"dims {m.dim} and {nu.dim} differ")
    n, p = m.size, nu.size
    if n * p > SIZE_GUARD:
        raise SizeGuardExceeded(f"{n} x {p} coupling exceeds {SIZE_GUARD} entries")
    C = cost_matrix(m, nu)
    if n == p and _is_uniform(m) and _is_uniform(nu):
        rows, cols = linear_sum_assignment(C)
        pairs = tuple(sorted((int(i), int(j), 1.0 / n) for i, j in zip(rows, cols)))
    else:
        G = _repair(_transport_lp(m.weights, nu.weights, C), m.weights, nu.weights)
        pairs = tuple((int(i), int(j), float(G[i, j])) for i, j in zip(*np.nonzero(G)))
    cpl = Coupling(m, nu, pairs)
    return cpl, float(np.sqrt(max(cpl.cost(), 0.0)))


def w2(m: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return optimal_coupling(m, nu)[1]


def taylor_first_order(phi: SymmetricKernel, m: DiscreteMeasure, nu: DiscreteMeasure):
    """``(remainder, bound)`` for the first-order expansion of ``F_Phi`` at ``m``.

    remainder = |F[nu] - F[m] - int <A_m(x), y - x> dgamma0|, and
    bound = (C k / 2) W2^2 with C the kernel's declared Hessian bound.
    """
    cpl, dist = optimal_coupling(m, nu)
    lin = 0.0
    grads = calculus.grad_w(phi, m, m.atoms)
    for i, j, w in cpl.pairs:
        lin = lin + w * (grads[i] @ (nu.atoms[j] - m.atoms[i]))
    rem = abs(calculus.eval_F(phi, nu) - calculus.eval_F(phi, m) - lin)
    return float(rem), float(phi.sup_hess * phi.arity / 2.0 * dist**2)


def p_gamma(phi: SymmetricKernel, m: DiscreteMeasure, coupling: Coupling, x, y) -> np.ndarray:
    """``A~[m](x)(y - x) + int A_mm(x, a)(b - a) dgamma(a, b)``."""
    x = np.asarray(x, float).reshape(-1)
    y = np.asarray(y, float).reshape(-1)
    if x.shape != (m.dim,) or y.shape != (m.dim,):
        raise DimensionMismatch("x and y must be points of the base space")
    out = calculus.grad_grad_w(phi, m, x) @ (y - x)
    if phi.arity > 1:
        for i, j, w in coupling.pairs:
            a, b = coupling.left.atoms[i], coupling.right.atoms[j]
            out = out + w * calculus.hess_offdiag(phi, m, x, a) @ (b - a)
    return out


def second_order_defect(phi: SymmetricKernel, m: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """``max |A_nu(y) - A_m(x) - P_gamma(x, y)| / (|x - y| + W2)`` over optimal pairs."""
    cpl, dist = optimal_coupling(m, nu)
    worst = 0.0
    for i, j, _ in cpl.pairs:
        x, y = m.atoms[i], nu.atoms[j]
        diff = calculus.grad_w(phi, nu, y) - calculus.grad_w(phi, m, x) - p_gamma(phi, m, cpl, x, y)
        scale = np.linalg.norm(x - y) + dist
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(diff)) / scale)
    return worst
