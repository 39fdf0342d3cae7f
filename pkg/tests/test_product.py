import math

import numpy as np
import pytest

import oracles
from wassheat import errors
from wassheat.calculus import eval_F_uniform_batch, grad_w
from wassheat.coupling import w2
from wassheat.kernels import BumpProduct, TensorPolynomial
from wassheat.measures import RngStream, make_discrete
from wassheat.product import (
    ProductMeasureSpec,
    ball_volume,
    d2_bilinear,
    duality_check,
    ibp_measure_check,
    integrate_PIJ,
    integrate_PkR,
    pkr_term_table,
    quadrature_pairing,
    sample_ball_tuple,
)


def _spec(k, R=1.0, d=1, n=20_000, seed=0):
    return ProductMeasureSpec(k, R, d, n, RngStream(seed))


def test_spec_validation():
    with pytest.raises(ValueError):
        _spec(1, R=0.0)
    with pytest.raises(ValueError):
        _spec(0)
    assert len(pkr_term_table(3)) == (2**3 - 1) ** 2


def test_ball_volume():
    assert ball_volume(2.0, 1) == pytest.approx(4.0)
    assert ball_volume(1.0, 2) == pytest.approx(math.pi)
    assert ball_volume(1.0, 3) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_ball_sampling(d):
    n, R = 100_000, 1.5
    X = sample_ball_tuple(R, d, 2, n, RngStream(4))
    r = np.linalg.norm(X, axis=-1).ravel()
    assert r.max() <= R
    p = 0.5**d
    frac = np.mean(r <= R / 2)
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / r.size)
    if d == 1:
        se = r.std() / math.sqrt(r.size)
        assert abs(r.mean() - R / 2) <= 3 * se


def test_ball_sampling_deterministic():
    a = sample_ball_tuple(1.0, 2, 3, 100, RngStream(5))
    b = sample_ball_tuple(1.0, 2, 3, 100, RngStream(5))
    assert np.array_equal(a, b)


def test_PIJ_examples():
    one = lambda XI, XJ: np.ones(len(XI))  # noqa: E731
    val, se = integrate_PIJ(one, (1,), (2,), _spec(2), batched=True)
    assert val == pytest.approx(4.0, rel=1e-14) and se == pytest.approx(0.0, abs=1e-12)

    def chi(m1, m2):
        inside = lambda m: float(np.all(np.linalg.norm(m.atoms, axis=1) <= 1.0))  # noqa: E731
        return inside(m1) * inside(m2)

    val, _ = integrate_PIJ(chi, (1, 2), (2,), _spec(2, n=500))
    assert val == pytest.approx(4.0, rel=1e-14)
    mean1 = lambda XI, XJ: XI[:, :, 0].mean(1)  # noqa: E731
    val, se = integrate_PIJ(mean1, (1, 2), (1,), _spec(2), batched=True)
    assert abs(val) <= 3 * se


def test_PkR_constant_mass():
    one = lambda XI, XJ: np.ones(len(XI))  # noqa: E731
    for k, R in ((1, 1.0), (2, 1.0), (3, 0.5)):
        val, se = integrate_PkR(one, _spec(k, R=R, n=100), batched=True)
        assert val == pytest.approx(oracles.pkr_constant_mass(k, 2 * R), rel=1e-12)
        assert se == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(errors.ArityGuardExceeded):
        integrate_PkR(one, _spec(6, n=10), batched=True)


def test_PkR_k1_collapse():
    f = lambda XI, XJ: np.cos(XI[:, 0, 0]) * XJ[:, 0, 0] ** 2  # noqa: E731
    a, _ = integrate_PkR(f, _spec(1, seed=3), batched=True)
    b, _ = integrate_PIJ(f, (1,), (1,), _spec(1, seed=3), batched=True)
    assert a == pytest.approx(b, rel=1e-13)


def test_separable_matches_generic():
    phi = BumpProduct(0.8, [[0.1], [-0.1]])
    psi = BumpProduct(0.9, [[0.0], [0.05]])
    H = lambda XI, XJ: eval_F_uniform_batch(phi, XI) * eval_F_uniform_batch(psi, XJ)  # noqa: E731
    f = lambda X: eval_F_uniform_batch(phi, X)  # noqa: E731
    g = lambda X: eval_F_uniform_batch(psi, X)  # noqa: E731
    a, sa = integrate_PkR(H, _spec(2, n=2000), batched=True)
    b, sb = integrate_PkR(None, _spec(2, n=2000), separable=(f, g))
    assert a == pytest.approx(b, rel=1e-10)
    assert sa == pytest.approx(sb, rel=1e-8)


def test_quadrature_pairing():
    phi = BumpProduct(1.0, [[0.0]])
    # int (1 - x^2)^8 over [-1, 1]
    assert quadrature_pairing(phi, phi, 1.0) == pytest.approx(65536 / 109395, rel=1e-12)
    ref = oracles.midpoint(lambda x: (1 - x * x) ** 8, -1.0, 1.0, 4000)
    assert quadrature_pairing(phi, phi, 1.0) == pytest.approx(ref, rel=1e-6)
    with pytest.raises(ValueError):
        big = BumpProduct(1.0, np.zeros((2, 2)))
        quadrature_pairing(big, big, 1.0)


def test_duality_examples():
    phi = BumpProduct(1.0, [[0.0]])
    zero = BumpProduct(1.0, [[0.0]], amplitude=0.0)
    res = duality_check(phi, zero, _spec(1))
    assert res.lhs == 0 and res.rhs == 0 and res.z == 0
    res = duality_check(phi, phi, _spec(1, n=100_000, seed=1))
    assert res.z <= 3
    phi2 = BumpProduct(0.7, [[0.2], [-0.1]])
    res = duality_check(phi2, phi2, _spec(2, n=100_000, seed=2))
    assert res.z <= 3


def test_duality_support_guard():
    phi = BumpProduct(1.0, [[0.5]])
    with pytest.raises(errors.SupportExceedsBall):
        duality_check(phi, phi, _spec(1))
    with pytest.raises(errors.DimensionMismatch):
        duality_check(phi, phi, _spec(2, R=2.0))
    with pytest.raises(errors.SupportExceedsBall):
        duality_check(TensorPolynomial([(1.0, [[1]])]), phi, _spec(1, R=2.0))


def test_duality_bilinear():
    phi = BumpProduct(0.8, [[0.1]])
    a, b = BumpProduct(0.6, [[0.2]]), BumpProduct(0.9, [[-0.05]])
    combo = 2.0 * a + (-0.5) * b
    r = duality_check(phi, combo, _spec(1, seed=9))
    ra, rb = duality_check(phi, a, _spec(1, seed=9)), duality_check(phi, b, _spec(1, seed=9))
    assert r.lhs == pytest.approx(2 * ra.lhs - 0.5 * rb.lhs, rel=1e-12)
    assert r.rhs == pytest.approx(2 * ra.rhs - 0.5 * rb.rhs, rel=1e-10)


def test_d2_bilinear(rng):
    lin = TensorPolynomial([(1.0, [[1, 0]]), (2.0, [[0, 1]])])  # gradient (1, 2)
    lin2 = TensorPolynomial([(-1.0, [[1, 0]]), (0.5, [[0, 1]])])
    m1 = make_discrete(rng.normal(size=(3, 2)))
    m2 = make_discrete(rng.normal(size=(2, 2)))
    assert d2_bilinear(lin, lin2, m1, m2) == pytest.approx(-1 + 1.0)
    # mean gradient of |x|^2 over a symmetric measure vanishes
    sq = TensorPolynomial([(1.0, [[2]])])
    phi = BumpProduct(2.0, [[0.2], [0.1]])
    msym = make_discrete([-0.7, 0.7])
    assert d2_bilinear(phi, sq, make_discrete([0.1, 0.4]), msym) == pytest.approx(0.0, abs=1e-14)
    m1, m2 = make_discrete([0.1, 0.4, -0.3]), make_discrete([0.2, -0.5])
    fact = (m1.weights @ grad_w(phi, m1, m1.atoms)) @ (m2.weights @ grad_w(sq, m2, m2.atoms))
    assert d2_bilinear(phi, sq, m1, m2) == pytest.approx(fact, rel=1e-13)
    with pytest.raises(errors.DimensionMismatch):
        d2_bilinear(lin, sq, m1, m2)


def test_ibp_measure_examples():
    phi = BumpProduct(1.0, [[0.0]])
    zero = BumpProduct(1.0, [[0.0]], amplitude=0.0)
    res = ibp_measure_check(phi, zero, _spec(1))
    assert res.lhs == 0 and res.rhs == 0
    res = ibp_measure_check(BumpProduct(0.9, [[0.05]]), BumpProduct(0.8, [[-0.1]]), _spec(1, n=100_000, seed=3))
    assert res.z <= 3
    phi2, psi2 = BumpProduct(0.7, [[0.1], [-0.1]]), BumpProduct(0.8, [[0.0], [0.1]])
    res = ibp_measure_check(phi2, psi2, _spec(2, n=200_000, seed=4))
    assert res.z <= 3


def test_pushforward_lipschitz(rng):
    for _ in range(20):
        r = int(rng.integers(1, 4))
        x, y = rng.normal(size=(r, 2)), rng.normal(size=(r, 2))
        assert w2(make_discrete(x), make_discrete(y)) <= np.linalg.norm(x - y) + 1e-12


def test_ibp_k1_against_spectral_lattice():
    from wassheat.spectral import SpectralCoefficients, SpectralGrid, ibp_check

    phi, psi = BumpProduct(0.9, [[0.05]]), BumpProduct(0.8, [[-0.1]])
    x, w = np.polynomial.legendre.leggauss(400)
    h, L = 0.02, 40.0
    xi = np.arange(-L, L + h / 2, h)
    grid = SpectralGrid(xi[:, None, None], np.full(len(xi), h))

    def coeffs(K):
        vals = K.value(x[:, None, None])
        return np.exp(2j * np.pi * np.outer(xi, x)) @ (w * vals)

    A = SpectralCoefficients({1: (grid, coeffs(phi))})
    B = SpectralCoefficients({1: (grid, coeffs(psi))})
    lhs, rhs = ibp_check(A, B)
    direct = quadrature_pairing(phi, psi, 1.0, n_nodes=1024, integrand=lambda X: phi.grad1(X)[:, 0] * psi.grad1(X)[:, 0])
    assert lhs.real == pytest.approx(direct, rel=1e-6)
    assert rhs.real == pytest.approx(direct, rel=1e-6)
