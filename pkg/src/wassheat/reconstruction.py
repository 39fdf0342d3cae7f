"""Recovering symmetric kernels from functionals by inclusion-exclusion.

For ``x = (x_1, ..., x_k)`` and ``I`` a nonempty subset of ``{1..k}`` let
``m_{x_I}`` be the uniform measure on the selected points. Then

    O_k(F)(x) = (1/k!) sum_r (-1)^(k-r) r^k sum_{|I| = r} F(m_{x_I})

inverts ``Phi -> F_Phi`` on kernels of arity k up to the factor 1/k.
A graded functional ``F = sum_k F_{Phi_k}/k!`` is split into degrees through
``lambda -> F[lambda, m] = sum_k lambda^k F_{Phi_k}[m]/k!``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import calculus
from .errors import ArityGuardExceeded, IllConditioned, IndexOutOfRange, NotStabilized
from .kernels import SymmetricKernel
from .measures import DiscreteMeasure, make_discrete

SUBSET_GUARD = 20
OK_GUARD = 12
VANDERMONDE_GUARD = 12
COND_GUARD = 1e12
STABLE_RTOL = 1e-8


@dataclass
class GradedFunctional:
    """``F = sum_k (1/k!) F_{Phi_k}`` or a black-box evaluator on measures."""

    evaluator: Optional[Callable[[DiscreteMeasure], complex]] = None
    declared_max_degree: Optional[int] = None
    underlying: Optional[Sequence[tuple]] = None  # [(k, kernel), ...]
    declared_support: Optional[float] = None  # kernels vanish outside this radius

    def __post_init__(self):
        if self.underlying is not None:
            self.underlying = [(int(k), K) for k, K in self.underlying]
            for k, K in self.underlying:
                if K.arity != k:
                    raise ValueError(f"kernel listed for degree {k} has arity {K.arity}")
            if self.declared_max_degree is None:
                self.declared_max_degree = max((k for k, _ in self.underlying), default=0)
        if self.evaluator is None and self.underlying is None:
            raise ValueError("need an evaluator or underlying kernels")

    @classmethod
    def from_kernels(cls, kernels: Sequence[SymmetricKernel]):
        return cls(underlying=[(K.arity, K) for K in kernels])

    @classmethod
    def zero(cls, max_degree: int = 1):
        return cls(evaluator=lambda m: 0.0, declared_max_degree=max_degree)

    def exact(self, m: DiscreteMeasure):
        return sum(calculus.eval_F(K, m) / math.factorial(k) for k, K in self.underlying)

    def __call__(self, m: DiscreteMeasure):
        if self.evaluator is not None:
            return self.evaluator(m)
        return self.exact(m)

    def support_radius(self) -> Optional[float]:
        if self.underlying is None:
            return self.declared_support
        radii = [K.support_radius for _, K in self.underlying]
        return None if None in radii else max(radii)


def _call(F, m):
    return F(m)


def subsets(k: int) -> dict:
    """``{r: [I, ...]}`` with every nonempty increasing index tuple, 1-based."""
    if k > SUBSET_GUARD:
        raise ArityGuardExceeded(f"k={k} exceeds {SUBSET_GUARD}")
    return {r: list(itertools.combinations(range(1, k + 1), r)) for r in range(1, k + 1)}


def empirical_from_index(x, I) -> DiscreteMeasure:
    """Uniform measure on the points ``x_i``, i in I (1-based, repeats allowed)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    idx = np.asarray(I, dtype=int).reshape(-1)
    if idx.size == 0 or idx.min() < 1 or idx.max() > x.shape[0]:
        raise IndexOutOfRange(f"index set {tuple(idx)} not within 1..{x.shape[0]}")
    return make_discrete(x[idx - 1])


def apply_Ok(F, x) -> complex:
    """Inclusion-exclusion combination of ``F`` over the sub-configurations of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    k = x.shape[0]
    if k > OK_GUARD:
        raise ArityGuardExceeded(f"k={k} exceeds {OK_GUARD}")
    total = 0.0
    for r, family in subsets(k).items():
        inner = sum(_call(F, empirical_from_index(x, I)) for I in family)
        total += (-1) ** (k - r) * r**k * inner
    return total / math.factorial(k)


def default_y_far(F: GradedFunctional, m: DiscreteMeasure) -> float:
    R = F.support_radius() or 0.0
    diam = float(np.max(np.linalg.norm(m.atoms[:, None] - m.atoms[None], axis=-1)))
    return 10.0 * (R + diam + 1.0 + m.radius())


def _far_mix(F, lam, m: DiscreteMeasure, y_far: float):
    y = np.zeros(m.dim)
    y[0] = y_far
    mix = DiscreteMeasure(np.vstack([m.atoms, y]), np.append(lam * m.weights, 1.0 - lam))
    return _call(F, mix)


def extension_F_lambda(F: GradedFunctional, lam: float, m: DiscreteMeasure,
                       y_far: Optional[float] = None, use_known: bool = True):
    """``F[lambda, m] = sum_k lambda^k F_{Phi_k}[m] / k!``.

    With known kernels the sum is evaluated directly. Otherwise ``F`` is
    evaluated at ``lambda m + (1 - lambda) delta_y`` far from everything, and
    the result must be unchanged (relative 1e-8) when ``|y|`` doubles.
    """
    if use_known and F.underlying is not None:
        return sum(lam**k * calculus.eval_F(K, m) / math.factorial(k) for k, K in F.underlying)
    if y_far is None:
        y_far = default_y_far(F, m)
    a = _far_mix(F, lam, m, y_far)
    b = _far_mix(F, lam, m, 2 * y_far)
    if abs(a - b) > STABLE_RTOL * max(abs(a), abs(b), 1e-300) and abs(a - b) > 1e-300:
        raise NotStabilized(f"F changes by {abs(a - b):.3g} when |y| doubles from {y_far}")
    return b


def lambda_nodes(N: int) -> np.ndarray:
    return np.arange(1, N + 1) / (N + 1)


def _vandermonde(N: int) -> np.ndarray:
    if N > VANDERMONDE_GUARD:
        raise IllConditioned(f"N={N} exceeds {VANDERMONDE_GUARD}")
    lam = lambda_nodes(N)
    V = lam[:, None] ** np.arange(1, N + 1)[None, :]
    if np.linalg.cond(V) > COND_GUARD:
        raise IllConditioned(f"Vandermonde condition number {np.linalg.cond(V):.3g}")
    return V


def project_all(F: GradedFunctional, m: DiscreteMeasure, use_known: bool = True,
                y_far: Optional[float] = None) -> np.ndarray:
    """Coefficients of ``lambda^1..lambda^N`` in ``F[lambda, m]``."""
    N = F.declared_max_degree
    if N is None:
        raise IllConditioned("projection needs a finite declared degree")
    V = _vandermonde(N)
    vals = np.array([extension_F_lambda(F, lam, m, y_far, use_known) for lam in lambda_nodes(N)])
    return np.linalg.solve(V, vals)


def project_pi_k(F: GradedFunctional, k: int, m: DiscreteMeasure, use_known: bool = True,
                 y_far: Optional[float] = None):
    """Degree-k part ``F_{Phi_k}[m] / k!`` by exact polynomial interpolation in lambda."""
    N = F.declared_max_degree
    if not 1 <= k <= (N or 0):
        raise IndexOutOfRange(f"k={k} outside 1..{N}")
    c = project_all(F, m, use_known, y_far)[k - 1]
    return c.real if np.isrealobj(c) else complex(c)


def projected(F: GradedFunctional, k: int, use_known: bool = True) -> GradedFunctional:
    """``pi_k(F)`` as a graded functional of declared degree k."""
    if use_known and F.underlying is not None:
        return GradedFunctional(underlying=[(j, K) for j, K in F.underlying if j == k],
                                declared_max_degree=k)
    return GradedFunctional(evaluator=lambda m: project_pi_k(F, k, m, use_known),
                            declared_max_degree=k, declared_support=F.support_radius())


def recover_kernel(F: GradedFunctional, k: int, x, use_known: bool = True):
    """``Phi_k(x) = k k! O_k(pi_k F)(x)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != k:
        raise IndexOutOfRange(f"need {k} points, got {x.shape[0]}")
    return k * math.factorial(k) * apply_Ok(lambda mu: project_pi_k(F, k, mu, use_known), x)


def embed(kernels: Sequence[SymmetricKernel], black_box: bool = False) -> GradedFunctional:
    """Graded functional ``sum_k F_{Phi_k}/k!``.

    With ``black_box`` the kernels are hidden behind an evaluator, so every
    degree split has to go through the far-point extension.
    """
    G = GradedFunctional.from_kernels(kernels)
    if not black_box:
        return G
    return GradedFunctional(evaluator=G.exact, declared_max_degree=G.declared_max_degree,
                            declared_support=G.support_radius())


def continuity_constant(N: int) -> float:
    """``C_N`` with ``sup |O_k pi_k F| <= C_N sup |F|`` for k <= N.

    ``Psi = sum_k c_k sum_{|I| = k} Phi_k(x_I)`` with ``c_k = N (N-k)! / (k N!)``
    satisfies ``F = F_Psi`` and ``|Psi| <= N^(N+2)/N! sup|F|``. Sending all but
    k points to infinity isolates ``c_k Phi_k`` plus lower-degree terms, which
    gives a recursive bound on ``|Phi_k|``; finally ``O_k pi_k F = Phi_k/(k k!)``.
    """
    B = N ** (N + 2) / math.factorial(N)
    c = {k: N * math.factorial(N - k) / (k * math.factorial(N)) for k in range(1, N + 1)}
    bound = {}
    for k in range(1, N + 1):
        lower = sum(math.comb(k, j) * c[j] * bound[j] for j in range(1, k))
        bound[k] = (B + lower) / c[k]
    return max(bound[k] / (k * math.factorial(k)) for k in range(1, N + 1))
