import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_measure
from wassheat import errors
from wassheat.calculus import (
    empirical_laplacian,
    eval_F,
    eval_F_uniform_batch,
    grad_grad_w,
    grad_w,
    hess_offdiag,
    hess_quadratic_form,
    laplacian_decomposition,
    laplacian_uniform_batch,
    laplacian_w,
    mean_grad_uniform_batch,
    tensor_sum,
)
from wassheat.kernels import (
    BumpProduct,
    ExponentialKernel,
    RadialDifference,
    TensorPolynomial,
    symmetrize,
)
from wassheat.measures import DiscreteMeasure, make_discrete, translate_pushforward


def _shift_atom(m, i, v):
    atoms = m.atoms.copy()
    atoms[i] += v
    return make_discrete(atoms, m.weights)


def test_constant_kernel_normalization(rng):
    for k in range(1, 5):
        one = TensorPolynomial([(1.0, [[0]] * k)])
        assert eval_F(one, random_measure(rng, 4)) == pytest.approx(1.0 / k, rel=1e-14)


def test_product_kernel_symmetric_measure():
    phi = TensorPolynomial([(1.0, [[1], [1]])])
    assert eval_F(phi, make_discrete([[-1.0], [1.0]])) == pytest.approx(0.0, abs=1e-15)


def test_exponential_fast_path_matches_tensor_sum(rng):
    m = make_discrete([[0.0], [1.0]])
    K = ExponentialKernel([[0.3], [0.5]])
    fast = eval_F(K, m)
    slow = eval_F(K, m, fast=False)
    assert fast == pytest.approx(slow, rel=1e-12)
    ref = oracles.char_fn([(0,), (1,)], [0.5, 0.5], (0.3,)) * \
        oracles.char_fn([(0,), (1,)], [0.5, 0.5], (0.5,)) / 2
    assert fast == pytest.approx(ref, rel=1e-12)


def test_frozen_values():
    m = make_discrete([[0.0], [1.0]])
    assert eval_F(ExponentialKernel([[0.3], [0.2]]), m) == pytest.approx(-0.23776412907378844j, abs=1e-14)
    xi = [(0.3, -0.1), (0.2, 0.4), (-0.5, 0.1)]
    atoms = [(0, 0.3), (1, -0.2), (0.4, 0.4)]
    w = [0.2, 0.5, 0.3]
    val = eval_F(ExponentialKernel(xi), make_discrete(atoms, w), fast=False)
    assert val == pytest.approx(0.039034084020089725 + 0.007002112904497419j, rel=1e-12)


def test_eval_F_against_oracle(rng):
    for _ in range(10):
        k, d = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        m = random_measure(rng, int(rng.integers(1, 4)), d)
        xi = rng.normal(size=(k, d))
        ref = oracles.functional(
            lambda pts: oracles.plane_wave_kernel([tuple(r) for r in xi], pts),
            k, [tuple(a) for a in m.atoms], list(m.weights))
        assert eval_F(ExponentialKernel(xi), m, fast=False) == pytest.approx(ref, rel=1e-11, abs=1e-13)
        assert eval_F(ExponentialKernel(xi), m) == pytest.approx(ref, rel=1e-11, abs=1e-13)


def test_tensor_guard():
    m = make_discrete(np.arange(20.0)[:, None])
    with pytest.raises(errors.TensorGuardExceeded):
        eval_F(TensorPolynomial([(1.0, [[1]] * 6)]), m)


def test_dimension_mismatch():
    with pytest.raises(errors.DimensionMismatch):
        eval_F(ExponentialKernel([[0.1, 0.2]]), make_discrete([[0.0]]))


def test_grad_examples(rng):
    m = random_measure(rng, 4)
    sq = TensorPolynomial([(1.0, [[2]])])
    x = np.array([0.7])
    assert grad_w(sq, m, x) == pytest.approx(2 * x)
    assert grad_grad_w(sq, m, x) == pytest.approx(np.array([[2.0]]))
    prod = TensorPolynomial([(1.0, [[1], [1]])])
    mu = float(m.weights @ m.atoms[:, 0])
    assert grad_w(prod, m, x) == pytest.approx([mu], rel=1e-12)
    assert grad_grad_w(prod, m, x) == pytest.approx(np.zeros((1, 1)))
    assert hess_offdiag(prod, m, x, -x) == pytest.approx(np.ones((1, 1)))
    triple = TensorPolynomial([(1.0, [[1], [1], [1]])])
    assert hess_offdiag(triple, m, x, -x)[0, 0] == pytest.approx(2 * mu, rel=1e-12)
    assert hess_offdiag(sq, m, x, x) == pytest.approx(np.zeros((1, 1)))


def test_grad_matches_pushforward_fd(rng):
    h = 1e-6
    for K in (ExponentialKernel(rng.normal(size=(2, 2))),
              BumpProduct(2.0, [[0.1, 0.0], [0.0, 0.2], [-0.1, 0.1]]),
              RadialDifference("cauchy", 0.7, 2)):
        m = random_measure(rng, 3, 2, scale=0.4)
        G = grad_w(K, m, m.atoms)
        for i in range(m.size):
            for a in range(2):
                e = np.zeros(2)
                e[a] = h
                fd = (eval_F(K, _shift_atom(m, i, e)) - eval_F(K, _shift_atom(m, i, -e))) / (2 * h)
                assert m.weights[i] * G[i, a] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_grad_grad_symmetric_and_fd(rng):
    K = ExponentialKernel(rng.normal(size=(2, 2)))
    m = random_measure(rng, 3, 2)
    x = rng.normal(size=2)
    H = grad_grad_w(K, m, x)
    assert np.allclose(H, H.T, atol=1e-12)
    h = 1e-5
    for b in range(2):
        e = np.zeros(2)
        e[b] = h
        col = (grad_w(K, m, x + e) - grad_w(K, m, x - e)) / (2 * h)
        assert np.allclose(H[:, b], col, rtol=1e-6, atol=1e-7)


def test_quadratic_form_zero_and_symmetry(rng):
    K = BumpProduct(2.0, [[0.1], [0.0]])
    m = random_measure(rng, 3)
    z = rng.normal(size=(3, 1))
    assert hess_quadratic_form(K, m, np.zeros((3, 1)), z) == 0
    a = hess_quadratic_form(K, m, z, 2 * z[::-1])
    b = hess_quadratic_form(K, m, 2 * z[::-1], z)
    assert a == pytest.approx(b, rel=1e-10)


def test_quadratic_form_constant_fields_give_laplacian(rng):
    K = ExponentialKernel(rng.normal(size=(2, 2)))
    m = random_measure(rng, 3, 2)
    total = sum(hess_quadratic_form(K, m, e, e) for e in np.eye(2))
    assert total == pytest.approx(laplacian_w(K, m), rel=1e-10)


def test_quadratic_form_second_difference(rng):
    h = 1e-3
    for K in (ExponentialKernel(0.5 * rng.normal(size=(3, 1))),
              BumpProduct(2.0, [[0.1], [0.0], [-0.2]])):
        m = random_measure(rng, 3, scale=0.5)
        v = np.array([0.8])
        f = lambda t: eval_F(K, translate_pushforward(m, t * v))  # noqa: E731
        fd = (f(h) - 2 * f(0) + f(-h)) / h**2
        assert hess_quadratic_form(K, m, v, v) == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_laplacian_eigen(rng):
    for k in range(1, 4):
        xi = rng.normal(size=(k, 2))
        K = ExponentialKernel(xi)
        m = random_measure(rng, 3, 2)
        lam = 4 * np.pi**2 * np.sum(xi.sum(0) ** 2)
        assert laplacian_w(K, m) == pytest.approx(-lam * eval_F(K, m), rel=1e-11)


def test_harmonic_radial(rng):
    m = random_measure(rng, 4)
    K = RadialDifference("gauss", 0.6, 1)
    assert abs(laplacian_w(K, m)) < 1e-10
    local, cross = laplacian_decomposition(K, m, 0.5)
    val = laplacian_w(K, m, 0.5)
    assert abs(val) > 1e-3
    assert val == pytest.approx(local + cross, rel=1e-10)
    # the eps-part alone
    l0, c0 = laplacian_decomposition(K, m, 0.0)
    assert val - laplacian_w(K, m, 0.0) == pytest.approx(0.5 * l0, rel=1e-10)


def test_decomposition_matches_single_pass(rng):
    for K in (BumpProduct(2.0, [[0.1], [0.0], [0.2]]),
              TensorPolynomial([(1.0, [[2], [1]]), (0.3, [[1], [1]])]),
              symmetrize(lambda X: np.sin(X[:, 0, 0] - 2 * X[:, 1, 0]), 2, 1)):
        m = random_measure(rng, 3)
        for eps in (0.0, 0.5):
            local, cross = laplacian_decomposition(K, m, eps)
            assert local + cross == pytest.approx(laplacian_w(K, m, eps), rel=1e-6, abs=1e-9)


def test_empirical_laplacian_examples():
    sq = TensorPolynomial([(1.0, [[2]])])
    assert empirical_laplacian(sq, [[0.4]]) == pytest.approx(2.0)
    prod = TensorPolynomial([(1.0, [[1], [1]])])
    x = [[0.3], [-1.2]]
    # u(x) = mean^2 / 2: the common-shift second derivative is 1
    assert empirical_laplacian(prod, x) == pytest.approx(1.0, rel=1e-12)
    assert empirical_laplacian(prod, x, method="fd") == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ValueError):
        empirical_laplacian(prod, x, method="bogus")


def test_empirical_laplacian_paths_agree(rng):
    for k in range(1, 5):
        K = BumpProduct(3.0, 0.1 * rng.normal(size=(k, 1)))
        x = rng.uniform(-0.5, 0.5, size=(k, 1))
        sym = empirical_laplacian(K, x)
        assert sym == pytest.approx(laplacian_w(K, make_discrete(x), 0.0), abs=1e-9)
        assert sym == pytest.approx(empirical_laplacian(K, x, method="fd"), abs=1e-5)


def test_linearity(rng):
    A = ExponentialKernel(rng.normal(size=(2, 1)))
    B = TensorPolynomial([(1.0, [[1], [2]])])
    m = random_measure(rng, 3)
    C = 1.5 * A + (-0.5) * B
    x = np.array([0.2])
    assert eval_F(C, m) == pytest.approx(1.5 * eval_F(A, m) - 0.5 * eval_F(B, m), rel=1e-12)
    assert grad_w(C, m, x) == pytest.approx(1.5 * grad_w(A, m, x) - 0.5 * grad_w(B, m, x), rel=1e-12)
    assert laplacian_w(C, m) == pytest.approx(1.5 * laplacian_w(A, m) - 0.5 * laplacian_w(B, m), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_permutation_invariance(seed):
    gen = np.random.default_rng(seed)
    m = random_measure(gen, 5)
    K = BumpProduct(3.0, [[0.1], [0.0]])
    perm = gen.permutation(5)
    assert eval_F(K, m) == eval_F(K, DiscreteMeasure(m.atoms[perm], m.weights[perm]))


def test_tensor_sum_chunk_independent(rng, monkeypatch):
    from wassheat import calculus
    m = random_measure(rng, 30)
    K = TensorPolynomial([(1.0, [[1], [1], [2]])])
    a = tensor_sum(K.value, m, 3)
    monkeypatch.setattr(calculus, "CHUNK", 777)
    assert tensor_sum(K.value, m, 3) == a


def test_uniform_batches_match_scalar(rng):
    K = BumpProduct(3.0, [[0.1], [0.0]])
    X = rng.uniform(-1, 1, size=(4, 3, 1))
    F = eval_F_uniform_batch(K, X)
    L = laplacian_uniform_batch(K, X, 0.5)
    G = mean_grad_uniform_batch(K, X)
    for n in range(4):
        m = make_discrete(X[n])
        assert F[n] == pytest.approx(eval_F(K, m), rel=1e-12)
        assert L[n] == pytest.approx(laplacian_w(K, m, 0.5), rel=1e-12)
        assert G[n] == pytest.approx(m.weights @ grad_w(K, m, m.atoms), rel=1e-12)
