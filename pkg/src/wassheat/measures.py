"""Finitely supported probability measures on R^d and their Gaussian smoothings.

Fourier convention used throughout the package::

    m_hat(xi) = sum_j w_j exp(-2 pi i <xi, x_j>)

so that a Gaussian of per-coordinate variance ``v`` has transform
``exp(-2 pi^2 v |xi|^2)``.
"""

from __future__ import annotations

import math
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import (
    DegenerateWeightSum,
    DimensionMismatch,
    EmptySupport,
    NegativeVariance,
    NegativeWeight,
)

WEIGHT_INPUT_TOL = 1e-9
WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure ``sum_j w_j delta_{x_j}`` on R^d.

    Build instances with :func:`make_discrete`; the constructor does not
    renormalize.
    """

    atoms: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if atoms.ndim != 2:
            raise DimensionMismatch(f"atoms must be (n, d), got shape {atoms.shape}")
        if atoms.shape[0] == 0:
            raise EmptySupport("measure has no atoms")
        if weights.shape != (atoms.shape[0],):
            raise DimensionMismatch("weights and atoms disagree in length")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        if np.any(weights < 0):
            raise NegativeWeight("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise DegenerateWeightSum(f"weights sum to {weights.sum()!r}, not 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def __len__(self):
        return self.size

    def radius(self) -> float:
        """Largest atom norm."""
        return float(np.max(np.linalg.norm(self.atoms, axis=1)))

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def permuted(self, order) -> "DiscreteMeasure":
        order = np.asarray(order)
        return DiscreteMeasure(self.atoms[order], self.weights[order])


@dataclass(frozen=True)
class SmoothedMeasure:
    """The Gaussian mixture ``N(0, variance I) * base``."""

    base: DiscreteMeasure
    variance: float = 0.0

    def __post_init__(self):
        if not self.variance >= 0:
            raise NegativeVariance(f"variance must be >= 0, got {self.variance}")
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def dim(self) -> int:
        return self.base.dim


Measure = Union[DiscreteMeasure, SmoothedMeasure]


@dataclass(frozen=True)
class RngStream:
    """Named random stream: ``(master_seed, stream_index)`` fixes every draw.

    Each call to :meth:`generator` returns a fresh generator positioned at the
    start of the stream, so reusing a stream reproduces its samples.
    """

    master_seed: int
    stream_index: int = 0
    _sub: tuple = field(default=(), repr=False)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(
            int(self.master_seed) % 2**64,
            spawn_key=(int(self.stream_index),) + tuple(self._sub),
        )
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream, e.g. for one block of Monte Carlo paths."""
        return RngStream(self.master_seed, self.stream_index, self._sub + (int(index),))


def make_discrete(points, weights=None) -> DiscreteMeasure:
    """Normalized discrete measure from a point list.

    ``points`` may be a flat list (read as d=1) or an (n, d) array. Weights
    default to uniform and are rescaled to sum to one.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptySupport("no points given")
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DimensionMismatch(f"points must be 1-D or 2-D, got shape {pts.shape}")
    n = pts.shape[0]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape != (n,):
            raise DimensionMismatch("weights and points disagree in length")
        if np.any(w < 0):
            raise NegativeWeight("weights must be nonnegative")
        total = math.fsum(w)
        if not total >= WEIGHT_INPUT_TOL:
            raise DegenerateWeightSum(f"weight sum {total!r} is too small to normalize")
        w = w / total
    return DiscreteMeasure(pts, w)


def uniform_empirical(points) -> DiscreteMeasure:
    """``(1/k) sum_j delta_{x_j}``; coincident points are kept as separate atoms."""
    return make_discrete(points)


def _check_dim(meas_dim: int, vec: np.ndarray):
    if vec.shape[-1] != meas_dim:
        raise DimensionMismatch(f"expected last axis {meas_dim}, got {vec.shape[-1]}")


def translate_pushforward(m: Measure, v) -> Measure:
    """Push ``m`` forward by ``x -> x + v``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if isinstance(m, SmoothedMeasure):
        return SmoothedMeasure(translate_pushforward(m.base, v), m.variance)
    _check_dim(m.dim, v)
    return DiscreteMeasure(m.atoms + v, m.weights)


def smooth(m: DiscreteMeasure, eps_t: float) -> SmoothedMeasure:
    """Convolve with the heat kernel at ``eps*t = eps_t`` (variance ``2 eps_t``)."""
    if not eps_t >= 0:
        raise NegativeVariance(f"eps_t must be >= 0, got {eps_t}")
    if isinstance(m, SmoothedMeasure):
        return SmoothedMeasure(m.base, m.variance + 2.0 * eps_t)
    return SmoothedMeasure(m, 2.0 * eps_t)


def char_fn(m: Measure, xi):
    """Fourier transform at ``xi``; ``xi`` may carry leading batch axes."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi.reshape(1)
    _check_dim(m.dim, xi)
    if isinstance(m, SmoothedMeasure):
        damp = np.exp(-2.0 * np.pi**2 * m.variance * np.sum(xi * xi, axis=-1))
        return char_fn(m.base, xi) * damp
    phase = xi @ m.atoms.T  # (..., n)
    out = np.exp(-2j * np.pi * phase) @ m.weights
    return out[()] if out.ndim == 0 else out


def sample(m: Measure, n: int, rng: RngStream) -> np.ndarray:
    """``n`` i.i.d. draws as an (n, d) array."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng.generator()
    base = m.base if isinstance(m, SmoothedMeasure) else m
    idx = gen.choice(base.size, size=n, p=base.weights)
    out = base.atoms[idx].copy()
    if isinstance(m, SmoothedMeasure) and m.variance > 0:
        out += np.sqrt(m.variance) * gen.standard_normal(out.shape)
    return out


def second_moment(m: Measure) -> float:
    if isinstance(m, SmoothedMeasure):
        return second_moment(m.base) + m.dim * m.variance
    return float(m.weights @ np.sum(m.atoms**2, axis=1))


# -- JSON ---------------------------------------------------------------------

def measure_to_dict(m: Measure) -> dict:
    base = m.base if isinstance(m, SmoothedMeasure) else m
    out = {"dim": base.dim, "atoms": base.atoms.tolist(), "weights": base.weights.tolist()}
    if isinstance(m, SmoothedMeasure):
        out["variance"] = m.variance
    return out


def measure_from_dict(data: dict) -> Measure:
    atoms = np.asarray(data["atoms"], dtype=float)
    dim = int(data.get("dim", atoms.shape[-1] if atoms.ndim == 2 else 1))
    atoms = atoms.reshape(-1, dim)
    m = make_discrete(atoms, data.get("weights"))
    if data.get("variance") is not None:
        return SmoothedMeasure(m, float(data["variance"]))
    return m


def load_measure(path) -> Measure:
    return measure_from_dict(json.loads(Path(path).read_text()))


def save_measure(m: Measure, path):
    Path(path).write_text(json.dumps(measure_to_dict(m), indent=2))
