"""Independent reference computations used by the tests.

Everything here is written with plain Python loops, ``cmath`` and
``itertools`` and shares no code with the package.
"""

import cmath
import itertools
import math


def char_fn(atoms, weights, xi):
    """Direct sum of w_j exp(-2 pi i <xi, x_j>) for lists of tuples."""
    return sum(w * cmath.exp(-2j * math.pi * sum(a * b for a, b in zip(xi, x)))
               for x, w in zip(atoms, weights))


def plane_wave_kernel(xi, x):
    """(1/k!) sum over permutations of exp(-2 pi i sum_j <xi_sigma(j), x_j>)."""
    k = len(xi)
    tot = 0
    for perm in itertools.permutations(range(k)):
        phase = sum(sum(a * b for a, b in zip(xi[perm[j]], x[j])) for j in range(k))
        tot += cmath.exp(-2j * math.pi * phase)
    return tot / math.factorial(k)


def functional(phi, k, atoms, weights):
    """(1/k) sum over all k-tuples of w_J phi(x_J); phi takes a list of k points."""
    tot = 0
    for J in itertools.product(range(len(atoms)), repeat=k):
        w = 1.0
        for j in J:
            w *= weights[j]
        tot += w * phi([atoms[j] for j in J])
    return tot / k


def brute_w2_sq(xs, ys):
    """Min over bijections of the mean squared distance (uniform, equal size)."""
    n = len(xs)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        c = sum(sum((a - b) ** 2 for a, b in zip(xs[i], ys[perm[i]])) for i in range(n)) / n
        best = min(best, c)
    return best


def inclusion_exclusion(F, pts):
    """(1/k!) sum_r (-1)^(k-r) r^k sum_{|I|=r} F(points in I) on tuples of points."""
    k = len(pts)
    tot = 0
    for r in range(1, k + 1):
        for I in itertools.combinations(range(k), r):
            tot += (-1) ** (k - r) * r**k * F([pts[i] for i in I])
    return tot / math.factorial(k)


def pkr_constant_mass(k, vol):
    """Signed mass of P^{k,R} by explicit enumeration of (I, J) pairs."""
    tot = 0
    for r in range(1, k + 1):
        for p in range(1, k + 1):
            n_terms = math.comb(k, r) * math.comb(k, p)
            tot += (-1) ** (r + p) * r**k * p**k * n_terms
    return k**2 / math.factorial(k) ** 3 * tot * vol**k


def midpoint(f, a, b, n=2000):
    """Composite midpoint rule (plain reference quadrature)."""
    h = (b - a) / n
    return sum(f(a + (i + 0.5) * h) for i in range(n)) * h
