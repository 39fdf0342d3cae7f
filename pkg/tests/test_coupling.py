import numpy as np
import pytest

import oracles
from conftest import random_measure
from wassheat import errors
from wassheat.calculus import grad_w
from wassheat.coupling import (
    _transport_lp,
    cost_matrix,
    identity_coupling,
    optimal_coupling,
    p_gamma,
    second_order_defect,
    taylor_first_order,
    w2,
)
from wassheat.kernels import BumpProduct, ExponentialKernel, TensorPolynomial
from wassheat.measures import make_discrete, translate_pushforward


def test_identical_measures(rng):
    m = random_measure(rng, 4, 2)
    cpl, d = optimal_coupling(m, m)
    assert d == pytest.approx(0.0, abs=1e-12)
    assert cpl.check_marginals()
    assert np.allclose(cpl.matrix(), np.diag(m.weights), atol=1e-10)


def test_dirac_pair():
    cpl, d = optimal_coupling(make_discrete([[0.0, 0.0]]), make_discrete([[3.0, 4.0]]))
    assert d == pytest.approx(5.0)
    assert cpl.pairs == ((0, 0, 1.0),)


def test_two_by_two_brute_force():
    m, nu = make_discrete([0.0, 1.0]), make_discrete([2.0, 3.0])
    assert w2(m, nu) ** 2 == pytest.approx(4.0)
    assert oracles.brute_w2_sq([(0,), (1,)], [(2,), (3,)]) == 4


def test_uniform_against_brute_force(rng):
    for _ in range(20):
        n, d = int(rng.integers(1, 5)), int(rng.integers(1, 3))
        xs, ys = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        ref = oracles.brute_w2_sq([tuple(x) for x in xs], [tuple(y) for y in ys])
        assert w2(make_discrete(xs), make_discrete(ys)) ** 2 == pytest.approx(ref, rel=1e-10, abs=1e-14)


def test_lp_matches_assignment_and_is_permutation(rng):
    n = 5
    m, nu = make_discrete(rng.normal(size=(n, 2))), make_discrete(rng.normal(size=(n, 2)))
    G = _transport_lp(m.weights, nu.weights, cost_matrix(m, nu))
    assert np.all((np.abs(G) < 1e-10) | (np.abs(G - 1 / n) < 1e-10))
    assert np.sum(G * cost_matrix(m, nu)) == pytest.approx(w2(m, nu) ** 2, rel=1e-9)


def test_general_lp_marginals_and_symmetry(rng):
    for _ in range(10):
        m, nu = random_measure(rng, 4, 2), random_measure(rng, 3, 2)
        cpl, d = optimal_coupling(m, nu)
        assert cpl.check_marginals()
        assert all(w >= 0 for _, _, w in cpl.pairs)
        assert abs(d - w2(nu, m)) <= 1e-10
        assert list(cpl.pairs) == sorted(cpl.pairs)


def test_triangle_inequality(rng):
    for _ in range(10):
        a, b, c = (random_measure(rng, 3, 1) for _ in range(3))
        assert w2(a, c) <= w2(a, b) + w2(b, c) + 1e-9


def test_deterministic(rng):
    m, nu = random_measure(rng, 4), random_measure(rng, 5)
    assert optimal_coupling(m, nu)[0].pairs == optimal_coupling(m, nu)[0].pairs


def test_guards():
    with pytest.raises(errors.DimensionMismatch):
        optimal_coupling(make_discrete([[0.0]]), make_discrete([[0.0, 1.0]]))
    big = make_discrete(np.zeros((1001, 1)))
    with pytest.raises(errors.SizeGuardExceeded):
        optimal_coupling(big, big)


def test_taylor_examples(rng):
    sq = TensorPolynomial([(1.0, [[2]])])
    m = random_measure(rng, 3)
    assert taylor_first_order(sq, m, m)[0] == pytest.approx(0.0, abs=1e-14)
    for _ in range(10):
        m, nu = random_measure(rng, 3), random_measure(rng, 4)
        rem, bound = taylor_first_order(sq, m, nu)
        assert bound == pytest.approx(w2(m, nu) ** 2)
        assert rem <= bound + 1e-12
    prod = TensorPolynomial([(1.0, [[1], [1]])])
    h = 0.3
    rem, bound = taylor_first_order(prod, make_discrete([0.0]), make_discrete([h]))
    assert rem == pytest.approx(h**2 / 2)
    assert bound == pytest.approx(h**2)


def test_p_gamma_identity_and_k1(rng):
    K = BumpProduct(3.0, [[0.1], [0.0]])
    m = random_measure(rng, 3)
    x = m.atoms[0]
    assert np.allclose(p_gamma(K, m, identity_coupling(m), x, x), 0.0)
    sq = TensorPolynomial([(1.0, [[2]])])
    nu = random_measure(rng, 3)
    cpl, _ = optimal_coupling(m, nu)
    y = nu.atoms[cpl.pairs[0][1]]
    assert p_gamma(sq, m, cpl, x, y) == pytest.approx(2 * (y - x))
    with pytest.raises(errors.DimensionMismatch):
        p_gamma(sq, m, cpl, np.zeros(2), y)


def test_p_gamma_quadratic_kernel_exact():
    # second derivatives of a quadratic kernel are constant, so the expansion is exact
    K = TensorPolynomial([(1.0, [[2], [0]]), (0.7, [[1], [1]])])
    m = make_discrete([-0.3, 0.4, 1.1])
    nu = translate_pushforward(m, 0.05)
    cpl, _ = optimal_coupling(m, nu)
    for i, j, _ in cpl.pairs:
        x, y = m.atoms[i], nu.atoms[j]
        lhs = grad_w(K, nu, y) - grad_w(K, m, x)
        assert lhs == pytest.approx(p_gamma(K, m, cpl, x, y), abs=1e-12)


def test_second_order_defect_decays(rng):
    K = ExponentialKernel([[0.3], [-0.2]])
    m = random_measure(rng, 4)
    v = rng.normal(size=(4, 1))
    ratios = []
    for h in (1e-1, 1e-2, 1e-3, 1e-4):
        nu = make_discrete(m.atoms + h * v, m.weights)
        ratios.append(second_order_defect(K, m, nu))
    assert all(b <= 1.1 * a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 1e-2 * ratios[0]
