import numpy as np
import pytest

from conftest import dense_loglik
from ssmgrad import hessfilter
from ssmgrad.derivfilter import GradFilterState
from ssmgrad.errors import MissingSecondDerivatives
from ssmgrad.hessfilter import HessFilterState, hess_predict, hessian_terms
from ssmgrad.kalman import FilterState
from ssmgrad.models_arma import ArmaModel
from ssmgrad.models_seasonal import SeasonalModel

THETA = np.array([0.3, -0.2, 0.5])


def test_hessian_matches_fd_of_gradient(general_model, general_series):
    rep = hessfilter.run_hessian_filter(general_model, THETA, general_series)
    assert rep.hessian_method == "analytic"
    fd = hessfilter.fd_hessian(general_model, THETA, general_series, fd_constant=1e-4)
    assert np.allclose(rep.hessian, fd, rtol=1e-6, atol=1e-7)


def test_hessian_matches_dense_second_differences(general_model, general_series):
    rep = hessfilter.run_hessian_filter(general_model, THETA, general_series)

    def f(t):
        return dense_loglik(*general_model.evaluate(t)[1:], general_series)

    h = 1e-3
    H = np.empty((3, 3))
    for j in range(3):
        for k in range(3):
            ej, ek = np.eye(3)[j] * h, np.eye(3)[k] * h
            H[j, k] = (f(THETA + ej + ek) - f(THETA + ej - ek) - f(THETA - ej + ek) + f(THETA - ej - ek)) / (4 * h * h)
    assert np.allclose(rep.hessian, H, rtol=1e-5, atol=1e-5)


def test_hessian_symmetric_and_gradient_consistent(general_model, general_series):
    from ssmgrad.derivfilter import run_gradient_filter

    rep = hessfilter.run_hessian_filter(general_model, THETA, general_series)
    H = rep.hessian
    assert np.max(np.abs(H - H.T)) <= 1e-10 * np.max(np.abs(H))
    g = run_gradient_filter(general_model, THETA, general_series).gradient
    assert np.allclose(rep.gradient, g, rtol=1e-10, atol=1e-12)


def test_seasonal_hessian():
    model = SeasonalModel(period=4, ar_order=2)
    y = np.cumsum(np.random.default_rng(4).standard_normal(50))
    theta = np.array([-2.0, -3.0, -1.0, 0.0, 0.5, -0.3])
    rep = hessfilter.run_hessian_filter(model, theta, y)
    fd = hessfilter.fd_hessian(model, theta, y, fd_constant=1e-4)
    assert np.allclose(rep.hessian, fd, rtol=1e-5, atol=1e-6)


def test_arma_falls_back_to_differences():
    model = ArmaModel(1, 1)
    y = np.random.default_rng(1).standard_normal(100)
    rep = hessfilter.run_hessian_filter(model, np.array([0.5, 0.2]), y)
    assert rep.hessian_method == "fd"
    assert np.array_equal(rep.hessian, hessfilter.fd_hessian(model, np.array([0.5, 0.2]), y))
    assert np.array_equal(rep.hessian, rep.hessian.T)


def test_step_requires_second_derivatives(general_model):
    _, mm, ic = general_model.evaluate(THETA, order=1)
    gs = GradFilterState(FilterState(ic.x0, ic.V0), ic.dx0, ic.dV0)
    hs = HessFilterState(gs, np.zeros((6, 3)), np.zeros((6, 3, 3)))
    with pytest.raises(MissingSecondDerivatives):
        hess_predict(hs, mm)


def test_hessian_terms_single_step():
    # one parameter: l = -1/2 (log r + e^2/r) with e, r functions of theta
    e, r, de, dr, d2e, d2r = 2.0, 3.0, 0.5, 1.5, 0.25, -0.4
    t = hessian_terms(np.array([e]), np.array([r]), np.array([[de]]), np.array([[dr]]),
                      np.array([[d2e]]), np.array([[d2r]]), 1)
    expect = -0.5 * (
        d2r / r - dr * dr / r ** 2
        + (2 * de * de + 2 * e * d2e) / r
        - (4 * e * de * dr + e * e * d2r) / r ** 2
        + 2 * e * e * dr * dr / r ** 3
    )
    assert np.ravel(t)[0] == pytest.approx(expect, rel=1e-14)
