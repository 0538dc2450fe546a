"""Gradient filter: exact score of the Kalman-filter log-likelihood in one pass.

The derivatives of the predicted and filtered state moments with respect to
every parameter are propagated alongside the ordinary Kalman recursion, which
gives the derivatives of each prediction error and its variance and hence the
gradient of the log-likelihood without finite differences.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kalman
from .errors import NonpositiveInnovationVariance
from .kalman import FilterState, LikelihoodReport

__all__ = [
    "GradFilterState",
    "GradInnovation",
    "grad_predict",
    "grad_update",
    "gradient_terms",
    "concentrated_gradient",
    "run_gradient_filter",
]


@dataclass
class GradFilterState:
    base: FilterState
    dx: np.ndarray  # (p, m)
    dV: np.ndarray  # (p, m, m)


@dataclass(frozen=True)
class GradInnovation:
    deps: np.ndarray  # (p,)
    dr: np.ndarray  # (p,)
    dgain: np.ndarray  # (p, m)


def _sym_stack(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def grad_predict(gs, mm):
    V = gs.base.V
    dx = gs.dx @ mm.Ft + mm.dF @ gs.base.x
    # Z + Z' gives the symmetrized F dV F' plus dF V F' and its transpose
    Z = 0.5 * (mm.F @ gs.dV @ mm.Ft) + mm.dF @ (V @ mm.Ft)
    dV = Z + np.swapaxes(Z, 1, 2) + mm.dGQGt
    return GradFilterState(kalman.predict(gs.base, mm), dx, dV)


def grad_update(gs, mm, y, step=None):
    x, V = gs.base.x, gs.base.V
    H = mm.H
    base, rec = kalman.update(gs.base, mm, y, step=step)
    r, eps, K = rec.r, rec.eps, rec.gain

    VHt = V @ H
    deps = -(gs.dx @ H) - mm.dH @ x
    dVHt = gs.dV @ H  # (p, m)
    VdHt = mm.dH @ V  # rows: V dH_j'  (V symmetric)
    W = dVHt + VdHt
    dr = W @ H + VdHt @ H + mm.dR
    dK = W / r - dr[:, None] * (VHt / (r * r))

    dx = gs.dx + deps[:, None] * K + dK * eps
    # V H' = (H V)' since V is symmetric
    dV = gs.dV - dK[:, :, None] * VHt - K[:, None] * W[:, None, :]
    return (
        GradFilterState(base, dx, _sym_stack(dV)),
        rec,
        GradInnovation(deps, dr, dK),
    )


def gradient_terms(eps, r, deps, dr):
    """Per-step contributions to the gradient, shape (N, p)."""
    eps = np.asarray(eps)[:, None]
    r = np.asarray(r)[:, None]
    return -0.5 * (dr / r + 2.0 * (eps / r) * deps - (eps * eps) / (r * r) * dr)


def concentrated_gradient(eps, r, deps, dr, sigma2_hat):
    """Gradient of the profile likelihood (innovation variance concentrated out)."""
    eps = np.asarray(eps)[:, None]
    r = np.asarray(r)[:, None]
    t1 = -0.5 * dr / r
    t2 = -(eps / r) * deps / sigma2_hat
    t3 = (eps * eps) / (r * r) * dr / (2.0 * sigma2_hat)
    return _colsum(t1) + _colsum(t2) + _colsum(t3)


def _colsum(a):
    return np.array([math.fsum(col) for col in np.asarray(a).T])


def initial_grad_state(ic):
    return GradFilterState(
        FilterState(np.array(ic.x0, dtype=float), np.array(ic.V0, dtype=float)),
        np.array(ic.dx0, dtype=float),
        np.array(ic.dV0, dtype=float),
    )


def _grad_pass(mm, ic, y):
    gs = initial_grad_state(ic)
    records, dgs = [], []
    for n, yn in enumerate(y):
        gs = grad_predict(gs, mm)
        gs, rec, drec = grad_update(gs, mm, yn, step=n)
        records.append(rec)
        dgs.append(drec)
    return records, dgs


def assemble(provider, records, dgs, n_obs):
    """Log-likelihood and gradient from innovation records of a pass."""
    eps = np.array([rec.eps for rec in records])
    r = np.array([rec.r for rec in records])
    deps = np.array([d.deps for d in dgs])
    dr = np.array([d.dr for d in dgs])
    return _assemble_arrays(provider, records, eps, r, deps, dr, n_obs)


def _assemble_arrays(provider, records, eps, r, deps, dr, n_obs):
    if provider.concentrated_variance:
        sigma2_hat, loglik = kalman.concentrated_loglik(eps, r)
        grad = concentrated_gradient(eps, r, deps, dr, sigma2_hat)
        return LikelihoodReport(loglik, n_obs, records, gradient=grad, sigma2_hat=sigma2_hat)
    loglik = kalman.gaussian_loglik(eps, r)
    grad = _colsum(gradient_terms(eps, r, deps, dr))
    return LikelihoodReport(loglik, n_obs, records, gradient=grad)


def _compiled_grad_pass(mm, ic, y):
    from . import _kernels

    f64 = kalman._f64
    n, m, p = y.size, mm.F.shape[0], mm.dF.shape[0]
    eps, r, gain = np.empty(n), np.empty(n), np.zeros((n, m))
    deps, dr = np.zeros((n, p)), np.zeros((n, p))
    status = _kernels.grad_pass(
        f64(mm.F), f64(mm.GQGt), f64(mm.H), float(mm.R),
        f64(mm.dF), f64(mm.dGQGt), f64(mm.dH), f64(mm.dR),
        f64(ic.x0), f64(ic.V0), f64(ic.dx0), f64(ic.dV0),
        y, eps, r, gain, deps, dr,
    )
    if status >= 0:
        raise NonpositiveInnovationVariance(int(status), float(r[status]))
    records = [kalman.InnovationRecord(e, v, k) for e, v, k in zip(eps.tolist(), r.tolist(), gain)]
    return records, eps, r, deps, dr


def run_gradient_filter(provider, theta, y, compiled=True):
    """Log-likelihood and its exact gradient at ``theta`` in a single pass.

    The compiled loop is the default; ``compiled=False`` steps through
    :func:`grad_predict` and :func:`grad_update` and also records the
    per-step derivative innovations in ``report.extra["grad_innovations"]``.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 1:
        raise ValueError("need at least one observation")
    theta = provider.check_theta(theta)
    _, mm, ic = provider.evaluate(theta, order=1)
    if not compiled:
        records, dgs = _grad_pass(mm, ic, y)
        report = assemble(provider, records, dgs, y.size)
        report.extra["grad_innovations"] = dgs
        return report
    records, eps, r, deps, dr = _compiled_grad_pass(mm, ic, y)
    return _assemble_arrays(provider, records, eps, r, deps, dr, y.size)
