"""Brownian motion on measures and Monte Carlo checks of the heat semigroup.

The flow is ``sigma_t = (id + sqrt(2 beta) W_t)_# (G_{eps t} * m)`` where
``G_{eps t}`` is the Gaussian of per-coordinate variance ``2 eps t`` and W
is a standard Brownian motion shared by all mass.

Randomness is drawn in blocks of paths; block b always uses the child stream
``rng.child(b)``, so results are independent of the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import calculus
from .errors import DimensionMismatch
from .kernels import ExponentialKernel, SymmetricKernel
from .measures import (
    DiscreteMeasure,
    RngStream,
    SmoothedMeasure,
    char_fn,
    sample,
    smooth,
    translate_pushforward,
)
from .spectral import (
    SpectralCoefficients,
    apply_laplacian_spectral,
    eigenfunction_nodes,
    eval_superposition,
    laplacian_multiplier,
    single_mode,
)

BLOCK = 1024


@dataclass(frozen=True)
class FlowParams:
    beta: float = 1.0
    eps: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if not self.eps >= 0:
            raise ValueError("eps must be >= 0")
        if not self.t >= 0:
            raise ValueError("t must be >= 0")


@dataclass
class MCResult:
    mean: complex
    stderr: float
    n_paths: int
    bias: float = 0.0

    def z(self, target) -> float:
        diff = abs(self.mean - target)
        if self.stderr == 0:
            return 0.0 if diff <= 1e-12 * (1 + abs(target)) else math.inf
        return diff / self.stderr


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("WASSHEAT_THREADS", "1")))
    except ValueError:
        return 1


def _blocks(n_paths: int):
    return [(b, min(BLOCK, n_paths - b * BLOCK)) for b in range((n_paths + BLOCK - 1) // BLOCK)]


def _map_blocks(fn, n_paths: int) -> np.ndarray:
    blocks = _blocks(n_paths)
    workers = min(n_workers(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda bs: fn(*bs), blocks))
    else:
        parts = [fn(b, size) for b, size in blocks]
    return np.concatenate(parts)


def _summary(vals: np.ndarray) -> MCResult:
    vals = np.asarray(vals)
    n = len(vals)
    if n < 2:
        raise ValueError("need at least two paths")
    if np.all(vals == vals[0]):
        return MCResult(complex(vals[0]) if np.iscomplexobj(vals) else float(vals[0]), 0.0, n)
    mean = vals.mean()
    var = np.var(vals.real, ddof=1) + (np.var(vals.imag, ddof=1) if np.iscomplexobj(vals) else 0.0)
    m = complex(mean) if np.iscomplexobj(vals) else float(mean)
    return MCResult(m, float(math.sqrt(var / n)), n)


def flow_state(m: DiscreteMeasure, p: FlowParams, w) -> SmoothedMeasure:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (m.dim,):
        raise DimensionMismatch(f"W_t must have {m.dim} components")
    return translate_pushforward(smooth(m, p.eps * p.t), math.sqrt(2 * p.beta) * w)


# -- evaluation of functionals along the flow -------------------------------------

Functional = Union[SpectralCoefficients, SymmetricKernel]


def _as_spectral(U):
    if isinstance(U, SpectralCoefficients):
        return U
    if isinstance(U, ExponentialKernel):
        return single_mode(U.xi, value=math.factorial(U.arity))
    return None


def _spectral_paths(A: SpectralCoefficients, base, shifts: np.ndarray) -> np.ndarray:
    """``U[(id + shift)_# base]`` for each shift (N, d), using the translation phase."""
    out = np.zeros(shifts.shape[0], dtype=complex)
    for k, (grid, vals) in A.degrees.items():
        coef = grid.quad_weights * vals * eigenfunction_nodes(grid.nodes, base) / math.factorial(k)
        phase = np.exp(-2j * np.pi * shifts @ grid.nodes.sum(axis=1).T)  # (N, n)
        out += phase @ coef
    return out


def evaluate(U: Functional, meas, rng: RngStream = None, inner_samples: int = 4096):
    """``U`` at a discrete or smoothed measure.

    Kernels without a closed form are averaged over ``inner_samples``
    independent k-tuples drawn from a smoothed measure.
    """
    A = _as_spectral(U)
    if A is not None:
        return eval_superposition(A, meas)
    val = U.functional(meas)
    if val is not None:
        return val
    if isinstance(meas, SmoothedMeasure):
        if meas.variance == 0:
            return calculus.eval_F(U, meas.base)
        if rng is None:
            raise ValueError("sampling a smoothed measure needs an RngStream")
        X = sample(meas, inner_samples * U.arity, rng).reshape(inner_samples, U.arity, meas.dim)
        return U.value(X).mean() / U.arity
    return calculus.eval_F(U, meas)


def mc_expectation(U: Functional, m: DiscreteMeasure, p: FlowParams, n_paths: int,
                   rng: RngStream, inner_samples: int = 4096) -> MCResult:
    """Sample mean and standard error of ``U(sigma_t)`` over terminal values of W_t."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    d = m.dim
    A = _as_spectral(U)
    base = smooth(m, p.eps * p.t)
    scale = math.sqrt(2 * p.beta * p.t)

    def block(b, size):
        gen = rng.child(b).generator()
        shifts = scale * gen.standard_normal((size, d))
        if A is not None:
            return _spectral_paths(A, base, shifts)
        sub = rng.child(b).child(1)
        return np.array([
            evaluate(U, translate_pushforward(base, s), sub.child(i), inner_samples)
            for i, s in enumerate(shifts)
        ])

    return _summary(_map_blocks(block, n_paths))


def semigroup_closed_form(A: SpectralCoefficients, p: FlowParams) -> SpectralCoefficients:
    """``b_k(t, xi) = a_k(xi) exp(-beta lambda^2_{k, eps/beta}(xi) t)``."""
    return A.map_values(lambda k, g, v: v * np.exp(laplacian_multiplier(g.nodes, p.eps, p.beta) * p.t))


def semigroup_agreement(A: Functional, m: DiscreteMeasure, p: FlowParams, n_paths: int,
                        rng: RngStream) -> dict:
    spec = _as_spectral(A)
    if spec is None:
        raise TypeError("closed form needs spectral coefficients or a plane-wave kernel")
    closed = eval_superposition(semigroup_closed_form(spec, p), m)
    res = mc_expectation(spec, m, p, n_paths, rng)
    return {"closed_form": closed, "mc_mean": res.mean, "mc_stderr": res.stderr,
            "z_score": res.z(closed), "n_paths": n_paths}


def heat_residual(A: SpectralCoefficients, m, p: FlowParams, dt: float = None) -> float:
    """``|d/dt V - beta Lap_{w, eps/beta} V|`` at time t, with d/dt a central difference."""
    if dt is None:
        dt = 1e-4 * max(p.t, 1.0)

    def V(t):
        return eval_superposition(
            A.map_values(lambda k, g, v: v * np.exp(laplacian_multiplier(g.nodes, p.eps, p.beta) * t)), m)

    lhs = (V(p.t + dt) - V(p.t - dt)) / (2 * dt)
    rhs = eval_superposition(apply_laplacian_spectral(semigroup_closed_form(A, p), p.eps, p.beta), m)
    return float(abs(lhs - rhs))


def richardson_ratio(A: SpectralCoefficients, m, p: FlowParams, dt: float) -> float:
    return heat_residual(A, m, p, dt) / heat_residual(A, m, p, dt / 2)


# -- Ito formula in expectation ----------------------------------------------------

def _brownian_grid(gen, size, d, s, r, M):
    """W at times s + i (r - s)/M, i = 0..M, started from W_s ~ N(0, s)."""
    dt = (r - s) / M
    W0 = math.sqrt(s) * gen.standard_normal((size, 1, d))
    inc = math.sqrt(dt) * gen.standard_normal((size, M, d))
    return np.concatenate([W0, W0 + np.cumsum(inc, axis=1)], axis=1)  # (size, M+1, d)


def _euler_defect(values, drift, dt):
    """``values[-1] - values[0] - sum_i drift[i] dt`` on a grid; arrays (N, M+1)."""
    return values[:, -1] - values[:, 0] - drift[:, :-1].sum(axis=1) * dt


def ito_residual(A: SpectralCoefficients, m: DiscreteMeasure, p: FlowParams, s: float, r: float,
                 n_paths: int, M_steps: int, rng: RngStream) -> MCResult:
    """Mean and stderr of ``V(r, sigma_r) - V(s, sigma_s) - int_s^r (d_t + beta Lap) V dt``.

    ``V(t, .)`` is the closed-form heat evolution of ``A``; the time integral
    is left-point Euler on ``M_steps`` steps. ``bias`` is the change in the
    mean when the same paths are used on a grid of half the resolution.
    """
    if not 0 < s < r:
        raise ValueError("need 0 < s < r")
    if M_steps < 2 or M_steps % 2:
        raise ValueError("M_steps must be an even integer >= 2")
    d = m.dim
    times = np.linspace(s, r, M_steps + 1)
    gain = math.sqrt(2 * p.beta)
    modes = []
    for k, (grid, vals) in A.degrees.items():
        mult = laplacian_multiplier(grid.nodes, p.eps, p.beta)
        smooth_rate = 4 * np.pi**2 * p.eps * np.sum(grid.nodes**2, axis=(1, 2))
        coef = grid.quad_weights * vals * eigenfunction_nodes(grid.nodes, m) / math.factorial(k)
        modes.append((coef, mult, smooth_rate, grid.nodes.sum(axis=1)))

    def block(b, size):
        gen = rng.child(b).generator()
        W = _brownian_grid(gen, size, d, s, r, M_steps)
        V = np.zeros((size, M_steps + 1), dtype=complex)
        D = np.zeros_like(V)
        for coef, mult, rate, total in modes:
            # F_xi along the flow: smoothing damps, translation rotates the phase
            time_fac = np.exp(np.outer(times, mult) - np.outer(times, rate))  # (M+1, n)
            phase = np.exp(-2j * np.pi * gain * np.einsum("pmd,nd->pmn", W, total))
            vals = phase * (time_fac * coef)[None]
            V += vals.sum(axis=2)
            D += (vals * (2 * mult)[None, None]).sum(axis=2)
        fine = _euler_defect(V, D, (r - s) / M_steps)
        coarse = _euler_defect(V[:, ::2], D[:, ::2], 2 * (r - s) / M_steps)
        return np.stack([fine, coarse], axis=1)

    both = _map_blocks(block, n_paths)
    res = _summary(both[:, 0])
    res.bias = float(abs(both[:, 0].mean() - both[:, 1].mean()))
    return res


# -- weak form with test functions -----------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """C^2 test function with closed-form integrals against Gaussian mixtures.

    kinds: ``one``; ``linear`` (<c, x>); ``quadratic`` (|x - c|^2);
    ``gauss`` (exp(-|x - c|^2 / 2 s^2)); ``wave`` (exp(-2 pi i <c, x>)).
    """

    __test__ = False  # not a pytest class

    kind: str
    center: tuple = ()
    scale: float = 1.0

    def _c(self, d):
        return np.zeros(d) if not self.center else np.asarray(self.center, float).reshape(d)

    def value(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        c = self._c(x.shape[1])
        if self.kind == "one":
            return np.ones(len(x))
        if self.kind == "linear":
            return x @ c
        if self.kind == "quadratic":
            return np.sum((x - c) ** 2, 1)
        if self.kind == "gauss":
            return np.exp(-np.sum((x - c) ** 2, 1) / (2 * self.scale**2))
        if self.kind == "wave":
            return np.exp(-2j * np.pi * x @ c)
        raise ValueError(f"unknown test function {self.kind!r}")

    def integrals(self, atoms, weights, shifts, variance):
        """``(int phi dmu, int Lap phi dmu)`` for ``mu = sum_j w_j N(x_j + shift, v I)``.

        ``shifts`` is (N, d); returns two arrays of length N.
        """
        d = atoms.shape[1]
        c = self._c(d)
        a = atoms[None, :, :] + shifts[:, None, :]  # (N, n, d)
        v = variance
        if self.kind == "one":
            one = np.ones(len(shifts))
            return one, 0.0 * one
        if self.kind == "linear":
            return (a @ c) @ weights, np.zeros(len(shifts))
        if self.kind == "quadratic":
            val = (np.sum((a - c) ** 2, -1) + d * v) @ weights
            return val, np.full(len(shifts), 2.0 * d)
        if self.kind == "gauss":
            S = self.scale**2 + v
            q = np.sum((a - c) ** 2, -1)
            psi = (self.scale**2 / S) ** (d / 2) * np.exp(-q / (2 * S))
            return psi @ weights, (psi * (q / S**2 - d / S)) @ weights
        if self.kind == "wave":
            val = (np.exp(-2j * np.pi * a @ c) @ weights) * np.exp(-2 * np.pi**2 * v * (c @ c))
            return val, -4 * np.pi**2 * (c @ c) * val
        raise ValueError(f"unknown test function {self.kind!r}")


def weak_form_check(m: DiscreteMeasure, p: FlowParams, phi: TestFunction, s: float, r: float,
                    n_paths: int, rng: RngStream, M_steps: int = 128) -> MCResult:
    """Mean defect of ``int phi dsigma_r - int phi dsigma_s - int (eps+beta) int Lap phi dsigma dt``."""
    if not 0 <= s < r:
        raise ValueError("need 0 <= s < r")
    if M_steps < 2 or M_steps % 2:
        raise ValueError("M_steps must be an even integer >= 2")
    d = m.dim
    times = np.linspace(s, r, M_steps + 1)
    gain = math.sqrt(2 * p.beta)

    def block(b, size):
        gen = rng.child(b).generator()
        W = _brownian_grid(gen, size, d, s, r, M_steps)
        cols = [phi.integrals(m.atoms, m.weights, gain * W[:, i], 2 * p.eps * t)
                for i, t in enumerate(times)]
        V = np.stack([c[0] for c in cols], axis=1)
        D = (p.eps + p.beta) * np.stack([np.broadcast_to(c[1], (size,)) for c in cols], axis=1)
        fine = _euler_defect(V, D, (r - s) / M_steps)
        coarse = _euler_defect(V[:, ::2], D[:, ::2], 2 * (r - s) / M_steps)
        return np.stack([fine, coarse], axis=1)

    both = _map_blocks(block, n_paths)
    res = _summary(both[:, 0])
    res.bias = float(abs(both[:, 0].mean() - both[:, 1].mean()))
    return res


def char_fn_flow(m: DiscreteMeasure, p: FlowParams, w, xi) -> complex:
    """Closed form of the transform of ``flow_state(m, p, w)``."""
    xi = np.asarray(xi, float).reshape(-1)
    w = np.asarray(w, float).reshape(-1)
    return complex(np.exp(-2j * np.pi * math.sqrt(2 * p.beta) * (xi @ w)) * char_fn(m, xi)
                   * np.exp(-4 * np.pi**2 * p.eps * p.t * (xi @ xi)))
