"""Spectral representation of functionals on measures.

A functional is stored through coefficient functions ``a_k`` sampled on a
quadrature grid in ``(R^d)^k``; it acts on a measure by

    U[m] = sum_k (1/k!) sum_nodes w a_k(xi) F^k_xi[m],   F^k_xi[m] = (1/k) prod_j m_hat(xi_j).

Each plane-wave mode is an eigenfunction of the partial Laplacian, so the
Laplacian, the heat semigroup and the Sobolev pairings all act node by node.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DimensionMismatch, GridMismatch, GridMissing
from .measures import char_fn

FOUR_PI2 = 4.0 * np.pi**2


@dataclass(frozen=True)
class SpectralGrid:
    nodes: np.ndarray  # (n, k, d)
    quad_weights: np.ndarray  # (n,)
    symmetrized: bool = False
    grid_id: str = field(default="", compare=False)

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 3:
            raise DimensionMismatch(f"nodes must be (n, k, d), got {nodes.shape}")
        w = np.array(self.quad_weights, dtype=float).reshape(-1)
        if w.shape != (nodes.shape[0],):
            raise DimensionMismatch("one quadrature weight per node")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        nodes.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "quad_weights", w)
        h = hashlib.sha256(np.asarray(nodes.shape, np.int64).tobytes() + nodes.tobytes() + w.tobytes())
        object.__setattr__(self, "grid_id", h.hexdigest()[:16])

    @property
    def degree(self) -> int:
        return self.nodes.shape[1]

    @property
    def dim(self) -> int:
        return self.nodes.shape[2]

    def __len__(self):
        return self.nodes.shape[0]


@dataclass(frozen=True)
class SpectralCoefficients:
    """``{k: (grid, values)}`` plus optional declared decay constants ``(C, delta)``."""

    degrees: Dict[int, tuple]
    decay: Optional[tuple] = None

    def __post_init__(self):
        clean = {}
        for k, (grid, vals) in sorted(self.degrees.items()):
            vals = np.array(vals, dtype=complex).reshape(-1)
            if grid.degree != k:
                raise DimensionMismatch(f"grid for degree {k} has nodes of degree {grid.degree}")
            if vals.shape != (len(grid),):
                raise DimensionMismatch("one value per node")
            vals.setflags(write=False)
            clean[int(k)] = (grid, vals)
        dims = {g.dim for g, _ in clean.values()}
        if len(dims) > 1:
            raise DimensionMismatch("all degrees must share the base dimension")
        object.__setattr__(self, "degrees", clean)

    @property
    def dim(self) -> int:
        return next(iter(self.degrees.values()))[0].dim

    def map_values(self, fn) -> "SpectralCoefficients":
        """Apply ``fn(k, grid, values) -> values`` degree by degree."""
        return replace(self, degrees={k: (g, fn(k, g, v)) for k, (g, v) in self.degrees.items()})

    def __add__(self, other):
        out = dict(self.degrees)
        for k, (g, v) in other.degrees.items():
            if k in out:
                g0, v0 = out[k]
                if g0.grid_id != g.grid_id:
                    raise GridMismatch(f"degree {k}: grids differ")
                out[k] = (g0, v0 + v)
            else:
                out[k] = (g, v)
        return SpectralCoefficients(out)

    def scale(self, c) -> "SpectralCoefficients":
        return self.map_values(lambda k, g, v: c * v)


@dataclass(frozen=True)
class EigenvalueSpec:
    k: int
    xi: np.ndarray
    eps: float
    lambda_sq_base: float
    lambda_sq_eps: float


def single_mode(xi, value: complex = 1.0, weight: float = 1.0) -> SpectralCoefficients:
    """Coefficients with one node ``xi`` of shape (k, d)."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    grid = SpectralGrid(xi[None], [weight])
    return SpectralCoefficients({xi.shape[0]: (grid, [value])})


def symmetrize_grid(grid: SpectralGrid, values) -> tuple:
    """Close a grid under block permutations, splitting each node's weight evenly."""
    k = grid.degree
    perms = list(itertools.permutations(range(k)))
    nodes = np.concatenate([grid.nodes[:, p, :] for p in perms])
    w = np.tile(grid.quad_weights / len(perms), len(perms))
    vals = np.tile(np.asarray(values, complex), len(perms))
    return SpectralGrid(nodes, w, symmetrized=True), vals


def conjugate_pairs(grid: SpectralGrid, values) -> tuple:
    """Add the mirrored nodes ``-xi`` with conjugate values (real-valued functional)."""
    nodes = np.concatenate([grid.nodes, -grid.nodes])
    w = np.concatenate([grid.quad_weights, grid.quad_weights])
    vals = np.asarray(values, complex)
    return SpectralGrid(nodes, w, grid.symmetrized), np.concatenate([vals, np.conj(vals)])


# -- eigenfunctions -------------------------------------------------------------

def eigenfunction(xi, m) -> complex:
    """``F^k_xi[m] = (1/k) prod_j m_hat(xi_j)``; ``xi`` has shape (k, d)."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None] if m.dim == 1 else xi[None, :]
    return complex(np.prod(char_fn(m, xi))) / xi.shape[0]


def eigenfunction_nodes(nodes, m) -> np.ndarray:
    """Vectorized :func:`eigenfunction` over nodes (n, k, d)."""
    nodes = np.asarray(nodes, dtype=float)
    return np.prod(np.atleast_2d(char_fn(m, nodes)), axis=-1) / nodes.shape[1]


def lambda_sq_nodes(nodes, eps: float = 0.0) -> np.ndarray:
    """``4 pi^2 (|sum_j xi_j|^2 + eps sum_j |xi_j|^2)`` for each node."""
    nodes = np.asarray(nodes, dtype=float)
    total = nodes.sum(axis=1)
    return FOUR_PI2 * (np.sum(total**2, -1) + eps * np.sum(nodes**2, axis=(1, 2)))


def lambda_sq(xi, k: Optional[int] = None, eps: float = 0.0) -> EigenvalueSpec:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    if k is not None and xi.shape[0] != k:
        raise DimensionMismatch(f"xi has {xi.shape[0]} blocks, expected {k}")
    base = float(lambda_sq_nodes(xi[None], 0.0)[0])
    full = float(lambda_sq_nodes(xi[None], eps)[0])
    return EigenvalueSpec(xi.shape[0], xi, float(eps), base, full)


# -- functionals and pairings -------------------------------------------------

def eval_superposition(A: SpectralCoefficients, m) -> complex:
    if not A.degrees:
        raise GridMissing("no degrees present")
    total = 0.0 + 0.0j
    for k, (grid, vals) in A.degrees.items():
        F = eigenfunction_nodes(grid.nodes, m)
        total += np.sum(grid.quad_weights * vals * F) / math.factorial(k)
    return complex(total)


def hs_inner(A: SpectralCoefficients, B: SpectralCoefficients, s: float = 0.0) -> complex:
    """``sum_k (1/k!) int a_k conj(b_k) (1 + lambda_k^2)^s dxi`` on shared grids."""
    total = 0.0 + 0.0j
    for k in sorted(set(A.degrees) & set(B.degrees)):
        ga, va = A.degrees[k]
        gb, vb = B.degrees[k]
        if ga.grid_id != gb.grid_id:
            raise GridMismatch(f"degree {k}: grid {ga.grid_id} vs {gb.grid_id}")
        weight = ga.quad_weights * (1.0 + lambda_sq_nodes(ga.nodes)) ** s
        total += np.sum(weight * va * np.conj(vb)) / math.factorial(k)
    return complex(total)


def hs_norm(A: SpectralCoefficients, s: float = 0.0) -> float:
    return math.sqrt(max(hs_inner(A, A, s).real, 0.0))


def laplacian_multiplier(nodes, eps: float, beta: float) -> np.ndarray:
    """``-beta lambda^2_{k, eps/beta}`` per node."""
    nodes = np.asarray(nodes, dtype=float)
    total = nodes.sum(axis=1)
    return -FOUR_PI2 * (beta * np.sum(total**2, -1) + eps * np.sum(nodes**2, axis=(1, 2)))


def apply_laplacian_spectral(A: SpectralCoefficients, eps: float = 0.0, beta: float = 1.0):
    return A.map_values(lambda k, g, v: laplacian_multiplier(g.nodes, eps, beta) * v)


def mean_gradient_spectral(A: SpectralCoefficients) -> list:
    """Component n carries ``-2 pi i (sum_j xi_j)_n a_k``."""
    return [
        A.map_values(lambda k, g, v, n=n: -2j * np.pi * g.nodes.sum(axis=1)[:, n] * v)
        for n in range(A.dim)
    ]


def eval_vector(V: list, m) -> np.ndarray:
    return np.array([eval_superposition(c, m) for c in V])


def ibp_check(A: SpectralCoefficients, B: SpectralCoefficients):
    """``(lhs, rhs)`` with lhs = -<Lap A; B>_{H^0} and rhs = <grad A; grad B>_{H^0}."""
    lhs = -hs_inner(apply_laplacian_spectral(A, 0.0, 1.0), B, 0.0)
    ga, gb = mean_gradient_spectral(A), mean_gradient_spectral(B)
    rhs = sum(hs_inner(a, b, 0.0) for a, b in zip(ga, gb))
    return complex(lhs), complex(rhs)


# -- decay conditions -----------------------------------------------------------

DECAY_CONDITIONS = ("uniform", "grad1", "cross", "third", "strong3")


@dataclass
class DecayReport:
    passed: bool
    first_violation: Optional[int]
    rows: list  # (k, label, value, bound)


def _block_moments(nodes: np.ndarray) -> dict:
    """Per-node moments averaged over the coordinate blocks (so over symmetrizations)."""
    r = np.linalg.norm(nodes, axis=-1)  # (n, k)
    k = r.shape[1]
    out = {"1": np.ones(len(r)), "x1": r.mean(1), "x1^2": (r**2).mean(1), "x1^3": (r**3).mean(1)}
    if k >= 2:
        s1, s2 = r.sum(1), (r**2).sum(1)
        pairs = k * (k - 1)
        out["x1x2"] = (s1**2 - s2) / pairs
        out["x1^2x2"] = (s2 * s1 - (r**3).sum(1)) / pairs
    else:
        out["x1x2"] = np.zeros(len(r))
        out["x1^2x2"] = np.zeros(len(r))
    return out


def _decay_terms(condition: str):
    """(moment, power of k in the denominator excluding delta)."""
    return {
        "uniform": [("1", 0)],
        "grad1": [("x1", 1), ("x1^2", 1)],
        "cross": [("x1x2", 2)],
        "third": [("x1^3", 1), ("x1^2x2", 3)],
        "strong3": [("1", 3)],
    }[condition]


def decay_check(A: SpectralCoefficients, C: float, delta: float, condition: str,
                rel_slack: float = 1e-12) -> DecayReport:
    """Check ``int |a_k| M(xi) dxi <= C k! / k^(p + delta)`` for every degree present."""
    if condition not in DECAY_CONDITIONS:
        raise ValueError(f"condition must be one of {DECAY_CONDITIONS}")
    rows, first = [], None
    for k, (grid, vals) in A.degrees.items():
        mom = _block_moments(grid.nodes)
        mass = grid.quad_weights * np.abs(vals)
        for label, p in _decay_terms(condition):
            value = float(np.sum(mass * mom[label]))
            bound = C * math.factorial(k) / k ** (p + delta)
            ok = value <= bound * (1 + rel_slack)
            rows.append((k, label, value, bound, ok))
            if not ok and first is None:
                first = k
    return DecayReport(first is None, first, rows)


def smoothing_constant(n: int, t: float) -> float:
    """``inf_{a >= 0} (n! + (a t)^n) / (n! (1 + a)^n)``."""
    fn = math.factorial(n)

    def g(a):
        return (fn + (a * t) ** n) / (fn * (1 + a) ** n)

    best = min(g(0.0), t**n / fn)  # endpoint values at a = 0 and a -> infinity
    for hi in (1.0, 10.0, 1e3, 1e6):
        res = minimize_scalar(g, bounds=(0.0, hi), method="bounded", options={"xatol": 1e-12})
        best = min(best, float(res.fun))
    return best


def smoothed_decay_constant(C: float, t: float, eps: float) -> float:
    """Constant for grad1/cross/third decay of ``-beta lambda^2 b_k(t)``.

    Uses ``x e^{-x t} |xi_1|^p <= sup_x x^{1+p/2} e^{-xt} / (4 pi^2 eps)^{p/2}`` with
    ``x = beta lambda^2_{k, eps/beta} >= 4 pi^2 eps |xi_j|^2`` and p <= 3; the
    strong k-decay of the input covers every power of k needed.
    """
    if eps <= 0 or t <= 0:
        return math.inf
    vals = []
    for p in range(4):
        q = 1 + p / 2
        vals.append((q / (math.e * t)) ** q / (FOUR_PI2 * eps) ** (p / 2))
    return C * max(vals)


# -- JSON -----------------------------------------------------------------------

def coefficients_to_dict(A: SpectralCoefficients) -> dict:
    out = {"degrees": []}
    for k, (g, v) in A.degrees.items():
        out["degrees"].append({
            "k": k, "nodes": g.nodes.tolist(), "quad_weights": g.quad_weights.tolist(),
            "values_re": v.real.tolist(), "values_im": v.imag.tolist(),
            "symmetrized": g.symmetrized,
        })
    if A.decay is not None:
        out["decay"] = {"C": A.decay[0], "delta": A.decay[1]}
    return out


def coefficients_from_dict(data: dict) -> SpectralCoefficients:
    degrees = {}
    for entry in data["degrees"]:
        k = int(entry["k"])
        nodes = np.asarray(entry["nodes"], dtype=float)
        if nodes.ndim == 2:  # d = 1 written as (n, k)
            nodes = nodes[..., None]
        grid = SpectralGrid(nodes, entry["quad_weights"], bool(entry.get("symmetrized", False)))
        vals = np.asarray(entry["values_re"], float) + 1j * np.asarray(
            entry.get("values_im", [0.0] * len(entry["values_re"])), float)
        if k in degrees:
            raise ValueError(f"degree {k} listed twice")
        degrees[k] = (grid, vals)
    decay = data.get("decay")
    return SpectralCoefficients(degrees, None if decay is None else (decay["C"], decay["delta"]))


def load_coefficients(path) -> SpectralCoefficients:
    return coefficients_from_dict(json.loads(Path(path).read_text()))


def save_coefficients(A: SpectralCoefficients, path):
    Path(path).write_text(json.dumps(coefficients_to_dict(A), indent=2))


def random_coefficients(rng: np.random.Generator, degrees=(1, 2, 3), dim: int = 1,
                        n_nodes: int = 50, scale: float = 1.0) -> SpectralCoefficients:
    """Random complex coefficients on random grids (for tests and demos)."""
    out = {}
    for k in degrees:
        nodes = scale * rng.normal(size=(n_nodes, k, dim))
        w = rng.uniform(0.5, 1.5, size=n_nodes) / n_nodes
        vals = rng.normal(size=n_nodes) + 1j * rng.normal(size=n_nodes)
        out[k] = (SpectralGrid(nodes, w), vals)
    return SpectralCoefficients(out)
