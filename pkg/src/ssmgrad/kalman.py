"""Kalman filter and exact Gaussian log-likelihood by prediction-error decomposition."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateVariance, NonpositiveInnovationVariance

LOG_2PI = math.log(2.0 * math.pi)
R_FLOOR = 1e-300

__all__ = [
    "FilterState",
    "InnovationRecord",
    "LikelihoodReport",
    "predict",
    "update",
    "run_filter",
    "gaussian_loglik",
    "concentrated_loglik",
    "loglik_difference",
]


@dataclass
class FilterState:
    x: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class InnovationRecord:
    eps: float
    r: float
    gain: np.ndarray


@dataclass
class LikelihoodReport:
    loglik: float
    n_obs: int
    innovations: list
    gradient: Optional[np.ndarray] = None
    hessian: Optional[np.ndarray] = None
    sigma2_hat: Optional[float] = None
    # "analytic" or "fd" when a Hessian is attached
    hessian_method: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def eps(self):
        return np.array([rec.eps for rec in self.innovations])

    @property
    def r(self):
        return np.array([rec.r for rec in self.innovations])


def _sym(a):
    return 0.5 * (a + a.T)


def predict(state, mm):
    """One-step-ahead prediction of the state mean and covariance."""
    x = mm.F @ state.x
    Z = 0.5 * (mm.F @ state.V @ mm.Ft)
    return FilterState(x, Z + Z.T + mm.GQGt)


def update(state, mm, y, step=None):
    """Condition a predicted state on the observation ``y``.

    Returns the filtered state and the innovation record (eps, r, K).
    """
    H = mm.H
    VHt = state.V @ H
    r = float(H @ VHt + mm.R)
    if not r > R_FLOOR:
        raise NonpositiveInnovationVariance(step, r)
    K = VHt / r
    eps = float(y - H @ state.x)
    x = state.x + K * eps
    V = state.V - K[:, None] * VHt[None, :]
    return FilterState(x, _sym(V)), InnovationRecord(eps, r, K)


def gaussian_loglik(eps, r):
    """-1/2 {N log 2pi + sum log r + sum eps^2/r}, compensated sums."""
    eps = np.asarray(eps, dtype=float)
    r = np.asarray(r, dtype=float)
    n = eps.size
    return -0.5 * (n * LOG_2PI + math.fsum(np.log(r)) + math.fsum(eps * eps / r))


def concentrated_loglik(eps, r):
    """Profile log-likelihood with the innovation variance maximized out.

    The filter is assumed to have run with unit innovation variance, so that
    the true prediction-error variances are ``sigma2 * r``.  Returns
    ``(sigma2_hat, loglik)``.
    """
    eps = np.asarray(eps, dtype=float)
    r = np.asarray(r, dtype=float)
    n = eps.size
    sigma2_hat = math.fsum(eps * eps / r) / n
    if not sigma2_hat > 0.0:
        raise DegenerateVariance(f"concentrated variance {sigma2_hat!r} is not positive")
    loglik = -0.5 * (n * LOG_2PI + n * math.log(sigma2_hat) + math.fsum(np.log(r)) + n)
    return sigma2_hat, loglik


def _exact_diff(new, old):
    # exactly rounded sum(new) - sum(old)
    return math.fsum(np.concatenate([new, -old]))


def loglik_difference(eps1, r1, eps0, r0, concentrated=False):
    """Accurate ``loglik(eps1, r1) - loglik(eps0, r0)`` for series of equal length.

    Subtracting two log-likelihoods of size ~N loses everything below their
    last ulp; summing the per-step differences keeps the small changes an
    optimizer sees close to convergence.
    """
    eps1, r1, eps0, r0 = (np.asarray(a, dtype=float) for a in (eps1, r1, eps0, r0))
    n = eps1.size
    dlogr = _exact_diff(np.log(r1), np.log(r0))
    q1, q0 = eps1 * eps1 / r1, eps0 * eps0 / r0
    if concentrated:
        s0 = math.fsum(q0)
        return -0.5 * (n * math.log1p(_exact_diff(q1, q0) / s0) + dlogr)
    return -0.5 * (dlogr + _exact_diff(q1, q0))


def _filter_pass(mm, ic, y):
    state = FilterState(np.array(ic.x0, dtype=float), np.array(ic.V0, dtype=float))
    records = []
    for n, yn in enumerate(y):
        state = predict(state, mm)
        state, rec = update(state, mm, yn, step=n)
        records.append(rec)
    return records


def _compiled_filter_pass(mm, ic, y):
    from . import _kernels

    n, m = y.size, mm.F.shape[0]
    eps, r, gain = np.empty(n), np.empty(n), np.zeros((n, m))
    status = _kernels.filter_pass(
        _f64(mm.F), _f64(mm.GQGt), _f64(mm.H), float(mm.R), _f64(ic.x0), _f64(ic.V0),
        y, eps, r, gain,
    )
    if status >= 0:
        raise NonpositiveInnovationVariance(int(status), float(r[status]))
    return [InnovationRecord(e, v, k) for e, v, k in zip(eps.tolist(), r.tolist(), gain)]


def _f64(a):
    return np.ascontiguousarray(a, dtype=float)


def run_filter(provider, theta, y, compiled=True):
    """Kalman filter log-likelihood of ``y`` under ``provider`` at ``theta``.

    ``compiled=False`` runs the step functions :func:`predict` and
    :func:`update` instead of the compiled loop; results agree to rounding.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 1:
        raise ValueError("need at least one observation")
    theta = provider.check_theta(theta)
    _, mm, ic = provider.evaluate(theta, order=1)
    records = (_compiled_filter_pass if compiled else _filter_pass)(mm, ic, y)
    eps = np.array([rec.eps for rec in records])
    r = np.array([rec.r for rec in records])
    if provider.concentrated_variance:
        sigma2_hat, loglik = concentrated_loglik(eps, r)
        return LikelihoodReport(loglik, y.size, records, sigma2_hat=sigma2_hat)
    return LikelihoodReport(gaussian_loglik(eps, r), y.size, records)
