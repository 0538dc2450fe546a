"""Seasonal adjustment models: trend + seasonal (+ stationary AR) + noise.

The AR coefficients are parameterized through PARCORs so that any real
parameter vector gives a stationary AR component.  The PARCOR/Levinson
helpers here are shared with the ARMA model.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadDimension
from .statespace import InitialCondition, ModelDims, ModelMatrices, ModelProvider, pair_indices, pair_position

__all__ = [
    "SeasonalSpec",
    "SeasonalModel",
    "parcor_to_ar",
    "parcor_jacobian",
    "parcor_hessian",
    "ar_to_parcor",
    "unconstrained_to_parcor",
    "parcor_to_unconstrained",
    "transformed_ar",
    "build_seasonal",
    "DEFAULT_THETA",
    "DEFAULT_THETA_AR",
]

# starting values used for the seasonal examples (log variances; AR part as
# unconstrained PARCORs)
DEFAULT_THETA = (-12.20607265, -13.81551056, -0.69314718)
DEFAULT_THETA_AR = (-12.20607265, -13.81551056, -9.72116600, -0.69314718, 2.92316158, -1.20485737)

PRIOR_VARIANCE = 1e4


def _levinson(beta, order):
    """AR coefficients from PARCORs, with first (and second) derivatives.

    Returns ``(a, da, d2a)`` where ``da[i, k] = d a_i / d beta_k`` and
    ``d2a[i, k, l] = d^2 a_i / d beta_k d beta_l`` (``None`` unless
    ``order >= 2``).
    """
    beta = np.asarray(beta, dtype=float)
    M = beta.size
    a = np.zeros(M)
    da = np.zeros((M, M))
    d2a = np.zeros((M, M, M)) if order >= 2 else None
    for m in range(1, M + 1):
        bm = beta[m - 1]
        prev_a = a[: m - 1].copy()
        prev_da = da[: m - 1].copy()
        rev_a = prev_a[::-1]  # a_{m-i}^{(m-1)} for i = 1..m-1
        rev_da = prev_da[::-1]
        if order >= 2:
            prev_d2a = d2a[: m - 1].copy()
            new = prev_d2a - bm * prev_d2a[::-1]
            new[:, m - 1, :] -= rev_da
            new[:, :, m - 1] -= rev_da
            d2a[: m - 1] = new
            d2a[m - 1] = 0.0
        da[: m - 1] = prev_da - bm * rev_da
        da[: m - 1, m - 1] = -rev_a
        da[m - 1] = 0.0
        da[m - 1, m - 1] = 1.0
        a[: m - 1] = prev_a - bm * rev_a
        a[m - 1] = bm
    return a, da, d2a


def parcor_to_ar(beta):
    """Levinson recursion: AR coefficients of the model with the given PARCORs."""
    return _levinson(beta, 0)[0]


def parcor_jacobian(beta):
    """Matrix of ``d a_i / d beta_k``."""
    return _levinson(beta, 1)[1]


def parcor_hessian(beta):
    """Array of ``d^2 a_i / d beta_k d beta_l``, shape (M, M, M)."""
    return _levinson(beta, 2)[2]


def ar_to_parcor(a):
    """Inverse Levinson (step-down) recursion."""
    a = np.array(a, dtype=float)
    M = a.size
    beta = np.zeros(M)
    for m in range(M, 0, -1):
        bm = a[m - 1]
        beta[m - 1] = bm
        if m > 1:
            head = a[: m - 1]
            a[: m - 1] = (head + bm * head[::-1]) / (1.0 - bm * bm)
    return beta


def unconstrained_to_parcor(theta, C=1.0, order=1):
    """Map reals into (-C, C): ``beta = C (e^t - 1)/(e^t + 1)``.

    Returns ``(beta, dbeta)`` or, with ``order=2``, ``(beta, dbeta, d2beta)``.
    The tanh form avoids overflow for large ``|theta|``.
    """
    th = np.tanh(0.5 * np.asarray(theta, dtype=float))
    beta = C * th
    dbeta = 0.5 * C * (1.0 - th * th)
    if order >= 2:
        return beta, dbeta, -dbeta * th
    return beta, dbeta


def parcor_to_unconstrained(beta, C=1.0):
    beta = np.asarray(beta, dtype=float) / C
    return np.log((1.0 + beta) / (1.0 - beta))


def transformed_ar(theta, C=1.0, order=1):
    """AR coefficients from unconstrained coordinates, with chain-rule derivatives.

    Returns ``(a, da, d2a)`` with ``da[i, j] = d a_i / d theta_j`` and
    ``d2a[i, j, l] = d^2 a_i / d theta_j d theta_l`` (``None`` for order 1).
    """
    if order >= 2:
        beta, db, d2b = unconstrained_to_parcor(theta, C, order=2)
    else:
        beta, db = unconstrained_to_parcor(theta, C)
    a, dA, d2A = _levinson(beta, order)
    da = dA * db[None, :]
    d2a = None
    if order >= 2:
        d2a = d2A * db[None, :, None] * db[None, None, :]
        idx = np.arange(beta.size)
        d2a[:, idx, idx] += dA * d2b[None, :]
    return a, da, d2a


@dataclass(frozen=True)
class SeasonalSpec:
    period: int = 12
    ar_order: int = 0
    parcor_bound: float = 0.99

    def __post_init__(self):
        if int(self.period) < 2:
            raise BadDimension(f"period must be >= 2, got {self.period}")
        if int(self.ar_order) < 0:
            raise BadDimension(f"ar_order must be >= 0, got {self.ar_order}")
        if not 0.0 < self.parcor_bound <= 1.0:
            raise ValueError(f"parcor_bound must lie in (0, 1], got {self.parcor_bound}")

    @property
    def state_dim(self):
        return 2 + (self.period - 1) + self.ar_order

    @property
    def noise_dim(self):
        return 3 if self.ar_order > 0 else 2

    @property
    def param_dim(self):
        return 3 + (1 + self.ar_order if self.ar_order > 0 else 0)

    @property
    def ar_start(self):
        return 2 + (self.period - 1)


def build_seasonal(spec, theta, order=1):
    """Structure matrices and initial condition of the seasonal model at ``theta``.

    ``theta`` holds log variances (trend, seasonal[, AR], observation) followed
    by the unconstrained AR PARCORs.
    """
    theta = np.asarray(theta, dtype=float)
    p = spec.param_dim
    if theta.shape != (p,):
        raise BadDimension(f"seasonal model expects {p} parameters, got shape {theta.shape}")
    m, k = spec.state_dim, spec.noise_dim
    s = spec.period - 1
    q0 = spec.ar_start
    n_var = k  # log-variance parameters feeding Q
    sigma_idx = k

    F = np.zeros((m, m))
    F[0, 0], F[0, 1], F[1, 0] = 2.0, -1.0, 1.0
    F[2, 2 : 2 + s] = -1.0
    F[np.arange(3, 2 + s), np.arange(2, 1 + s)] = 1.0

    G = np.zeros((m, k))
    G[0, 0] = 1.0
    G[2, 1] = 1.0
    H = np.zeros(m)
    H[0] = H[2] = 1.0

    variances = np.exp(theta[:n_var])
    Q = np.diag(variances)
    R = float(np.exp(theta[sigma_idx]))

    dF = np.zeros((p, m, m))
    dQ = np.zeros((p, k, k))
    dR = np.zeros(p)
    for j in range(n_var):
        dQ[j, j, j] = variances[j]
    dR[sigma_idx] = R

    want2 = order >= 2
    if spec.ar_order > 0:
        M = spec.ar_order
        G[q0, 2] = 1.0
        H[q0] = 1.0
        F[q0 + np.arange(1, M), q0 + np.arange(M - 1)] = 1.0
        a, da, d2a = transformed_ar(theta[4:], spec.parcor_bound, order=2 if want2 else 1)
        F[q0, q0 : q0 + M] = a
        for j in range(M):
            dF[4 + j, q0, q0 : q0 + M] = da[:, j]

    zeros = np.zeros
    mm_kwargs = dict(
        F=F, G=G, H=H, Q=Q, R=R,
        dF=dF, dG=zeros((p, m, k)), dH=zeros((p, m)), dQ=dQ, dR=dR,
    )
    ic_kwargs = dict(
        x0=zeros(m), V0=PRIOR_VARIANCE * np.eye(m), dx0=zeros((p, m)), dV0=zeros((p, m, m))
    )
    if want2:
        P = p * (p + 1) // 2
        d2F = zeros((P, m, m))
        d2Q = zeros((P, k, k))
        d2R = zeros(P)
        for j in range(n_var):
            d2Q[pair_position(j, j, p), j, j] = variances[j]
        d2R[pair_position(sigma_idx, sigma_idx, p)] = R
        if spec.ar_order > 0:
            M = spec.ar_order
            for j in range(M):
                for l in range(j, M):
                    d2F[pair_position(4 + j, 4 + l, p), q0, q0 : q0 + M] = d2a[:, j, l]
        mm_kwargs.update(d2F=d2F, d2G=zeros((P, m, k)), d2H=zeros((P, m)), d2Q=d2Q, d2R=d2R)
        ic_kwargs.update(d2x0=zeros((P, m)), d2V0=zeros((P, m, m)))
    return ModelMatrices(**mm_kwargs), InitialCondition(**ic_kwargs)


class SeasonalModel(ModelProvider):
    """Trend + seasonal (+ AR) + observation-noise model as a ModelProvider."""

    has_second_derivatives = True

    def __init__(self, period=12, ar_order=0, parcor_bound=0.99):
        self.spec = SeasonalSpec(int(period), int(ar_order), float(parcor_bound))
        self.param_dim = self.spec.param_dim

    def evaluate(self, theta, order=1):
        theta = self.check_theta(theta)
        spec = self.spec
        mm, ic = build_seasonal(spec, theta, order=order)
        return ModelDims(spec.state_dim, spec.noise_dim, spec.param_dim), mm, ic

    def param_names(self):
        if self.spec.ar_order == 0:
            return ["log_tau1sq", "log_tau2sq", "log_sigma2"]
        names = ["log_tau1sq", "log_tau2sq", "log_tau3sq", "log_sigma2"]
        return names + [f"alpha{j + 1}" for j in range(self.spec.ar_order)]

    def default_theta(self):
        if self.spec.ar_order == 0:
            return np.array(DEFAULT_THETA)
        theta = np.zeros(self.param_dim)
        theta[:4] = DEFAULT_THETA_AR[:4]
        n = min(self.spec.ar_order, 2)
        theta[4 : 4 + n] = DEFAULT_THETA_AR[4 : 4 + n]
        return theta

    def structural(self, theta):
        """Variances and AR coefficients at ``theta`` as a dict."""
        theta = self.check_theta(theta)
        spec = self.spec
        out = {"tau1sq": float(np.exp(theta[0])), "tau2sq": float(np.exp(theta[1]))}
        if spec.ar_order == 0:
            out["sigma2"] = float(np.exp(theta[2]))
            return out
        out["tau3sq"] = float(np.exp(theta[2]))
        out["sigma2"] = float(np.exp(theta[3]))
        out["ar"] = transformed_ar(theta[4:], spec.parcor_bound)[0].tolist()
        return out

    def describe(self):
        return {
            "model": "seasonal-ar" if self.spec.ar_order else "seasonal",
            "period": self.spec.period,
            "ar_order": self.spec.ar_order,
            "parcor_bound": self.spec.parcor_bound,
        }
