import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_discrete_lyapunov, toeplitz
from scipy.stats import multivariate_normal

from ssmgrad import kalman
from ssmgrad.errors import NonStationary
from ssmgrad.models_arma import (
    ArmaModel,
    autocovariance,
    autocovariance_derivatives,
    companion_radius,
    impulse_response,
    impulse_response_derivatives,
    initial_covariance,
    initial_covariance_derivatives,
    simulate_arma,
    transform_arma_params,
)

ORDERS = [(1, 0), (0, 1), (1, 1), (2, 1), (5, 3)]


def random_arma(m, l, rng):
    a, b, _ = transform_arma_params(rng.uniform(-2.5, 2.5, m + l), m, l)
    return a, b


def long_acov(a, b, sigma2, upto, terms=4000):
    # truncated MA(infinity) sum, independent of the linear-system solve
    g = impulse_response(a, b, terms)
    return np.array([sigma2 * np.dot(g[: terms + 1 - k], g[k:]) for k in range(upto + 1)])


def test_impulse_response_values():
    assert np.allclose(impulse_response([0.5], [], 3), [1, 0.5, 0.25, 0.125])
    assert np.allclose(impulse_response([0.5], [0.2], 2), [1, 0.3, 0.15])
    assert np.allclose(impulse_response([], [0.4], 2), [1, -0.4, 0])


def test_ar1_autocovariance_values():
    C = autocovariance([0.5], [], 1.0, 2)
    assert np.allclose(C, [4 / 3, 2 / 3, 1 / 3], rtol=1e-14)
    # dC0/da = 2a / (1 - a^2)^2 = 16/9 at a = 0.5
    dCa, _ = autocovariance_derivatives([0.5], [], 1.0, 0)
    assert dCa[0, 0] == pytest.approx(16 / 9, rel=1e-12)


@pytest.mark.parametrize("m,l", [(1, 1), (2, 1), (5, 3), (3, 0), (0, 2)])
def test_autocovariance_matches_ma_infinity_sum(m, l):
    rng = np.random.default_rng(m * 10 + l)
    a, b = random_arma(m, l, rng)
    if m:
        a = 0.8 * a  # keep the truncated sum well converged
        a = a if companion_radius(a) < 0.9 else a * 0.5
    C = autocovariance(a, b, 1.7, 8)
    assert np.allclose(C, long_acov(a, b, 1.7, 8), rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("m,l", ORDERS)
def test_initial_covariance_solves_lyapunov(m, l):
    rng = np.random.default_rng(7)
    model = ArmaModel(m, l, transformed=False)
    for _ in range(10):
        a, b = random_arma(m, l, rng)
        _, mm, ic = model.evaluate(np.concatenate([a, b]))
        V = solve_discrete_lyapunov(mm.F, mm.G @ mm.G.T)
        assert np.allclose(ic.V0, V, rtol=1e-9, atol=1e-11 * np.max(np.abs(V)))
        assert np.allclose(initial_covariance(a, b, 2.0), 2.0 * ic.V0, rtol=1e-13)


@pytest.mark.parametrize("m,l", ORDERS)
def test_initial_covariance_derivatives(m, l):
    rng = np.random.default_rng(11)
    a, b = random_arma(m, l, rng)
    da, db = initial_covariance_derivatives(a, b)
    h = 1e-6
    for j in range(m):
        e = np.eye(m)[j] * h
        fd = (initial_covariance(a + e, b) - initial_covariance(a - e, b)) / (2 * h)
        assert np.allclose(da[j], fd, rtol=1e-6, atol=1e-7 * np.max(np.abs(fd)) + 1e-9)
    for j in range(l):
        e = np.eye(l)[j] * h
        fd = (initial_covariance(a, b + e) - initial_covariance(a, b - e)) / (2 * h)
        assert np.allclose(db[j], fd, rtol=1e-6, atol=1e-7 * np.max(np.abs(fd)) + 1e-9)


def test_impulse_response_derivatives():
    a, b = np.array([0.6, -0.2]), np.array([0.3])
    dga, dgb = impulse_response_derivatives(a, b, 6)
    h = 1e-7
    for j in range(2):
        e = np.eye(2)[j] * h
        fd = (impulse_response(a + e, b, 6) - impulse_response(a - e, b, 6)) / (2 * h)
        assert np.allclose(dga[j], fd, atol=1e-7)
    fd = (impulse_response(a, b + h, 6) - impulse_response(a, b - h, 6)) / (2 * h)
    assert np.allclose(dgb[0], fd, atol=1e-7)


def test_arma21_structure():
    model = ArmaModel(2, 1, transformed=False)
    _, mm, _ = model.evaluate(np.array([1.41, -0.68, 0.34]))
    assert np.allclose(mm.F, [[1.41, 1.0], [-0.68, 0.0]])
    assert np.allclose(mm.G[:, 0], [1.0, -0.34])
    assert np.array_equal(mm.H, [1.0, 0.0])
    assert mm.R == 0.0


def test_raw_nonstationary_rejected():
    with pytest.raises(NonStationary):
        ArmaModel(1, 0, transformed=False).evaluate(np.array([1.2]))
    with pytest.raises(NonStationary):
        simulate_arma(np.array([1.0]), np.array([]), 1.0, 10, np.random.default_rng(0))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 10**6))
def test_transform_is_stationary_and_invertible(m, l, seed):
    if m + l == 0:
        return
    theta = np.random.default_rng(seed).uniform(-5, 5, m + l)
    a, b, J = transform_arma_params(theta, m, l)
    assert companion_radius(a) < 1.0
    assert companion_radius(b) < 1.0
    assert J.shape == (m + l, m + l)


def test_transform_jacobian_matches_differences():
    theta = np.array([0.4, -1.1, 0.8, 0.2])
    _, _, J = transform_arma_params(theta, 2, 2)
    h = 1e-6
    for j in range(4):
        e = np.eye(4)[j] * h
        ap, bp, _ = transform_arma_params(theta + e, 2, 2)
        am, bm, _ = transform_arma_params(theta - e, 2, 2)
        assert np.allclose(J[:, j], (np.r_[ap, bp] - np.r_[am, bm]) / (2 * h), atol=1e-8)


def test_to_theta_round_trip():
    model = ArmaModel(2, 1)
    theta = np.array([0.9, -0.4, 0.3])
    a, b = model.coefficients(theta)
    assert np.allclose(model.to_theta(a, b), theta, rtol=1e-10)


def test_exact_likelihood_matches_toeplitz_density():
    a, b, s2 = np.array([0.7, -0.2]), np.array([0.4]), 1.0
    y = simulate_arma(a, b, s2, 60, np.random.default_rng(4))
    model = ArmaModel(2, 1, transformed=False)
    rep = kalman.run_filter(model, np.r_[a, b], y)
    # the concentrated value at sigma2_hat equals the full density there
    C = long_acov(a, b, rep.sigma2_hat, 59)
    dense = multivariate_normal(np.zeros(60), toeplitz(C)).logpdf(y)
    assert rep.loglik == pytest.approx(dense, rel=1e-9)


def test_simulated_ar1_autocorrelation():
    y = simulate_arma(np.array([0.5]), np.array([]), 1.0, 1_000_000, np.random.default_rng(0))
    rho = np.dot(y[1:], y[:-1]) / np.dot(y, y)
    assert abs(rho - 0.5) < 0.005


def test_simulated_variance_within_monte_carlo_error():
    a, b = np.array([0.6]), np.array([0.3])
    C0 = autocovariance(a, b, 1.0, 0)[0]
    draws = np.array([simulate_arma(a, b, 1.0, 1, np.random.default_rng(s))[0] for s in range(4000)])
    se = C0 * np.sqrt(2.0 / draws.size)
    assert abs(np.mean(draws ** 2) - C0) < 3 * se


def test_structural_and_names():
    model = ArmaModel(2, 1)
    assert model.param_names() == ["alpha1", "alpha2", "delta1"]
    assert ArmaModel(2, 1, transformed=False).param_names() == ["a1", "a2", "b1"]
    assert np.array_equal(model.default_theta(), np.zeros(3))
    s = model.structural(np.zeros(3))
    assert s == {"ar": [0.0, 0.0], "ma": [0.0]}
