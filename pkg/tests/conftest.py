import numpy as np
import pytest
from scipy.stats import multivariate_normal

from ssmgrad.statespace import InitialCondition, ModelDims, ModelMatrices, ModelProvider, pair_indices


def _quadratic(theta, c0, c1, c2):
    """A(theta) = c0 + sum_j theta_j c1[j] + sum_jk theta_j theta_k c2[j, k].

    Returns value, first-derivative stack and pair-indexed second-derivative
    stack.
    """
    p = theta.size
    sym = c2 + np.swapaxes(c2, 0, 1)
    val = c0 + np.tensordot(theta, c1, 1) + np.tensordot(theta, np.tensordot(theta, c2, 1), 1)
    d = c1 + np.tensordot(theta, sym, axes=([0], [1]))
    J, K = pair_indices(p)
    return val, d, sym[J, K]


def _gram(L, dL, d2L):
    """Value and derivatives of L L' from those of L."""
    p = dL.shape[0]
    J, K = pair_indices(p)
    val = L @ L.T
    A = dL @ L.T
    d = A + np.swapaxes(A, 1, 2)
    B = d2L @ L.T + dL[J] @ np.swapaxes(dL[K], 1, 2)
    d2 = B + np.swapaxes(B, 1, 2)
    return val, d, d2


class GeneralModel(ModelProvider):
    """Random model whose every matrix depends smoothly on every parameter.

    F, G, H and x0 are quadratic in theta, Q and V0 are Gram matrices of
    quadratic factors and R is log-linear, so every derivative stack of the
    filters is exercised.
    """

    has_second_derivatives = True

    def __init__(self, m=3, k=2, p=3, seed=0, scale=0.1):
        rng = np.random.default_rng(seed)
        self.m, self.k, self.param_dim = m, k, p

        def coeffs(shape, base):
            return (
                base,
                scale * rng.standard_normal((p,) + shape),
                0.3 * scale * rng.standard_normal((p, p) + shape),
            )

        F0 = rng.standard_normal((m, m))
        F0 *= 0.6 / max(abs(np.linalg.eigvals(F0)))
        self.cF = coeffs((m, m), F0)
        self.cG = coeffs((m, k), rng.standard_normal((m, k)))
        self.cH = coeffs((m,), rng.standard_normal(m))
        self.cL = coeffs((k, k), np.eye(k) + 0.2 * rng.standard_normal((k, k)))
        self.cx0 = coeffs((m,), rng.standard_normal(m))
        self.cM = coeffs((m, m), np.eye(m) + 0.2 * rng.standard_normal((m, m)))
        self.r0 = float(rng.normal(-0.5, 0.2))
        self.rc = 0.5 * rng.standard_normal(p)

    def evaluate(self, theta, order=1):
        theta = self.check_theta(theta)
        p = self.param_dim
        J, K = pair_indices(p)
        F, dF, d2F = _quadratic(theta, *self.cF)
        G, dG, d2G = _quadratic(theta, *self.cG)
        H, dH, d2H = _quadratic(theta, *self.cH)
        Q, dQ, d2Q = _gram(*_quadratic(theta, *self.cL))
        x0, dx0, d2x0 = _quadratic(theta, *self.cx0)
        V0, dV0, d2V0 = _gram(*_quadratic(theta, *self.cM))
        R = float(np.exp(self.r0 + self.rc @ theta))
        dR = self.rc * R
        d2R = self.rc[J] * self.rc[K] * R
        mm = ModelMatrices(F, G, H, Q, R, dF, dG, dH, dQ, dR)
        ic = InitialCondition(x0, V0, dx0, dV0)
        if order >= 2:
            mm = ModelMatrices(F, G, H, Q, R, dF, dG, dH, dQ, dR, d2F, d2G, d2H, d2Q, d2R)
            ic = InitialCondition(x0, V0, dx0, dV0, d2x0, d2V0)
        return ModelDims(self.m, self.k, p), mm, ic


def dense_loglik(mm, ic, y):
    """Exact Gaussian log-likelihood from the joint covariance of all observations.

    Writes y_n = H F^n x0 + sum_i H F^{n-i} G v_i + w_n and evaluates the
    multivariate normal density directly, with no filtering involved.
    """
    y = np.asarray(y, dtype=float)
    N = y.size
    m, k = mm.G.shape
    Fpow = [np.eye(m)]
    for _ in range(N):
        Fpow.append(mm.F @ Fpow[-1])
    # loadings of y on x0 and on each v_i
    A0 = np.array([mm.H @ Fpow[n + 1] for n in range(N)])
    Av = np.zeros((N, N * k))
    for n in range(N):
        for i in range(n + 1):
            Av[n, i * k : (i + 1) * k] = mm.H @ Fpow[n - i] @ mm.G
    Qbig = np.kron(np.eye(N), mm.Q)
    cov = A0 @ ic.V0 @ A0.T + Av @ Qbig @ Av.T + mm.R * np.eye(N)
    mean = A0 @ ic.x0
    return multivariate_normal(mean, cov).logpdf(y)


def richardson_gradient(f, theta, h=1e-3):
    """Fourth-order central differences, an accurate gradient oracle."""
    theta = np.asarray(theta, dtype=float)
    g = np.empty(theta.size)
    for j in range(theta.size):
        e = np.zeros(theta.size)
        e[j] = h
        g[j] = (-f(theta + 2 * e) + 8 * f(theta + e) - 8 * f(theta - e) + f(theta - 2 * e)) / (12 * h)
    return g


@pytest.fixture
def general_model():
    return GeneralModel()


@pytest.fixture
def general_series():
    return np.random.default_rng(42).standard_normal(40)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
