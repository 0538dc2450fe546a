"""Second-derivative filter for the exact Hessian of the log-likelihood.

Second derivatives of the state moments are carried once per unordered
parameter pair ``(j, k)``, ``j <= k``.  Every product-rule term that couples
a ``theta_j`` derivative with a ``theta_k`` derivative appears in both
orders, so each pair entry is a symmetric matrix and the assembled Hessian is
symmetric by construction.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import derivfilter, kalman
from .derivfilter import GradFilterState
from .errors import MissingSecondDerivatives
from .statespace import pair_indices, unpack_pairs

__all__ = [
    "HessFilterState",
    "HessInnovation",
    "hess_predict",
    "hess_update",
    "hess_step",
    "hessian_terms",
    "concentrated_hessian",
    "run_hessian_filter",
    "fd_hessian",
]


@dataclass
class HessFilterState:
    grad: GradFilterState
    d2x: np.ndarray  # (P, m)
    d2V: np.ndarray  # (P, m, m)


@dataclass(frozen=True)
class HessInnovation:
    d2eps: np.ndarray  # (P,)
    d2r: np.ndarray  # (P,)
    d2gain: np.ndarray  # (P, m)


def _sym_stack(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _outer_stack(u, v):
    return u[:, :, None] * v[:, None, :]


def _require_second(mm):
    if not mm.has_second_derivatives:
        raise MissingSecondDerivatives("model matrices carry no second-derivative stacks")


def hess_predict(hs, mm):
    """Prediction step; uses the filtered moments from the previous step."""
    _require_second(mm)
    gs = hs.grad
    p = gs.dx.shape[0]
    J, K = pair_indices(p)
    x, V = gs.base.x, gs.base.V
    F, G, Q = mm.F, mm.G, mm.Q
    dF, dG, dQ = mm.dF, mm.dG, mm.dQ

    d2x = (
        hs.d2x @ F.T
        + mm.d2F @ x
        + np.einsum("pab,pb->pa", dF[J], gs.dx[K])
        + np.einsum("pab,pb->pa", dF[K], gs.dx[J])
    )

    # F V F' part: M + M' + F d2V F', M collecting the non-symmetric terms
    M = (
        mm.d2F @ V @ F.T
        + dF[J] @ gs.dV[K] @ F.T
        + dF[K] @ gs.dV[J] @ F.T
        + dF[J] @ V @ np.swapaxes(dF[K], 1, 2)
    )
    # G Q G' part, same pattern
    N = (
        mm.d2G @ Q @ G.T
        + dG[J] @ dQ[K] @ G.T
        + dG[K] @ dQ[J] @ G.T
        + dG[J] @ Q @ np.swapaxes(dG[K], 1, 2)
    )
    d2V = F @ hs.d2V @ F.T + G @ mm.d2Q @ G.T + M + np.swapaxes(M, 1, 2) + N + np.swapaxes(N, 1, 2)
    return HessFilterState(derivfilter.grad_predict(gs, mm), d2x, _sym_stack(d2V))


def hess_update(hs, mm, y, step=None):
    """Filter step; returns the new state and first/second innovation records."""
    _require_second(mm)
    gs = hs.grad
    p = gs.dx.shape[0]
    J, K = pair_indices(p)
    x, V = gs.base.x, gs.base.V
    H, dH, d2H = mm.H, mm.dH, mm.d2H
    dx, dV = gs.dx, gs.dV

    new_gs, rec, drec = derivfilter.grad_update(gs, mm, y, step=step)
    r, eps, Kg = rec.r, rec.eps, rec.gain
    deps, dr, dK = drec.deps, drec.dr, drec.dgain

    d2eps = -(hs.d2x @ H) - d2H @ x - np.sum(dH[J] * dx[K], axis=1) - np.sum(dH[K] * dx[J], axis=1)

    # u = V H', r = H u + R
    u = V @ H
    du = dV @ H + dH @ V
    d2u = (
        hs.d2V @ H
        + np.einsum("pab,pb->pa", dV[J], dH[K])
        + np.einsum("pab,pb->pa", dV[K], dH[J])
        + d2H @ V
    )
    d2r = d2u @ H + np.sum(du[J] * dH[K], axis=1) + np.sum(du[K] * dH[J], axis=1) + d2H @ u + mm.d2R

    rJ, rK = dr[J], dr[K]
    d2K = (
        d2u / r
        - (du[J] * rK[:, None] + du[K] * rJ[:, None]) / r**2
        - np.outer(d2r, u) / r**2
        + 2.0 * np.outer(rJ * rK, u) / r**3
    )

    d2x = (
        hs.d2x
        + d2K * eps
        + dK[J] * deps[K][:, None]
        + dK[K] * deps[J][:, None]
        + np.outer(d2eps, Kg)
    )

    # filtered V = V - K (H V); second derivative of the triple product
    hv = H @ V
    dhv = dH @ V + dV @ H  # d(H V)/d theta_j as rows (V, dV symmetric)
    d2hv = (
        d2H @ V
        + np.einsum("pa,pab->pb", dH[J], dV[K])
        + np.einsum("pa,pab->pb", dH[K], dV[J])
        + hs.d2V @ H
    )
    d2V = (
        hs.d2V
        - d2K[:, :, None] * hv[None, None, :]
        - _outer_stack(dK[J], dhv[K])
        - _outer_stack(dK[K], dhv[J])
        - Kg[None, :, None] * d2hv[:, None, :]
    )
    return (
        HessFilterState(new_gs, d2x, _sym_stack(d2V)),
        rec,
        drec,
        HessInnovation(d2eps, d2r, d2K),
    )


def hess_step(hs, mm, y, step=None):
    """Predict then update; one full time step of the second-derivative filter."""
    return hess_update(hess_predict(hs, mm), mm, y, step=step)


def hessian_terms(eps, r, deps, dr, d2eps, d2r, p):
    """Per-step Hessian contributions, pair-indexed, shape (N, P)."""
    J, K = pair_indices(p)
    e = np.asarray(eps)[:, None]
    r = np.asarray(r)[:, None]
    eJ, eK = deps[:, J], deps[:, K]
    rJ, rK = dr[:, J], dr[:, K]
    return -0.5 * (
        (d2r + 2.0 * eJ * eK + 2.0 * e * d2eps) / r
        - (rJ * rK + 2.0 * e * (eJ * rK + eK * rJ) + e * e * d2r) / r**2
        + 2.0 * e * e * rJ * rK / r**3
    )


def concentrated_hessian(eps, r, deps, dr, d2eps, d2r, p):
    """Hessian of the profile likelihood with the innovation variance concentrated out.

    Writing S = sum eps^2/r, the profile likelihood is
    -N/2 log S - 1/2 sum log r + const, which is differentiated directly.
    """
    J, K = pair_indices(p)
    n = len(eps)
    e = np.asarray(eps)[:, None]
    r = np.asarray(r)[:, None]
    eJ, eK = deps[:, J], deps[:, K]
    rJ, rK = dr[:, J], dr[:, K]
    S = math.fsum((e * e / r).ravel())
    dS = derivfilter._colsum(2.0 * e * deps / r - e * e * dr / r**2)
    d2S = derivfilter._colsum(
        2.0 * (eJ * eK + e * d2eps) / r
        - 2.0 * e * (eJ * rK + eK * rJ) / r**2
        - e * e * d2r / r**2
        + 2.0 * e * e * rJ * rK / r**3
    )
    d2logr = derivfilter._colsum(d2r / r - rJ * rK / r**2)
    return -0.5 * n * (d2S / S - dS[J] * dS[K] / S**2) - 0.5 * d2logr


def _initial_state(ic, p):
    gs = derivfilter.initial_grad_state(ic)
    P = p * (p + 1) // 2
    m = gs.base.x.size
    if ic.has_second_derivatives:
        d2x = np.array(ic.d2x0, dtype=float)
        d2V = np.array(ic.d2V0, dtype=float)
    else:
        d2x = np.zeros((P, m))
        d2V = np.zeros((P, m, m))
    return HessFilterState(gs, d2x, d2V)


def run_hessian_filter(provider, theta, y, fd_constant=1e-4):
    """Log-likelihood, gradient and Hessian at ``theta``.

    Providers without second-derivative stacks get a Hessian from central
    differences of the analytic gradient; ``report.hessian_method`` records
    which path was used.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 1:
        raise ValueError("need at least one observation")
    theta = provider.check_theta(theta)
    if not provider.has_second_derivatives:
        report = derivfilter.run_gradient_filter(provider, theta, y)
        report.hessian = fd_hessian(provider, theta, y, fd_constant)
        report.hessian_method = "fd"
        return report

    _, mm, ic = provider.evaluate(theta, order=2)
    _require_second(mm)
    p = provider.param_dim
    hs = _initial_state(ic, p)
    records, dgs, hrecs = [], [], []
    for n, yn in enumerate(y):
        hs = hess_predict(hs, mm)
        hs, rec, drec, hrec = hess_update(hs, mm, yn, step=n)
        records.append(rec)
        dgs.append(drec)
        hrecs.append(hrec)

    report = derivfilter.assemble(provider, records, dgs, y.size)
    eps = report.eps
    r = report.r
    deps = np.array([d.deps for d in dgs])
    dr = np.array([d.dr for d in dgs])
    d2eps = np.array([h.d2eps for h in hrecs])
    d2r = np.array([h.d2r for h in hrecs])
    if provider.concentrated_variance:
        packed = concentrated_hessian(eps, r, deps, dr, d2eps, d2r, p)
    else:
        packed = derivfilter._colsum(hessian_terms(eps, r, deps, dr, d2eps, d2r, p))
    report.hessian = unpack_pairs(packed, p)
    report.hessian_method = "analytic"
    report.extra["grad_innovations"] = dgs
    report.extra["hess_innovations"] = hrecs
    return report


def fd_hessian(provider, theta, y, fd_constant=1e-4):
    """Central differences of the analytic gradient, symmetrized."""
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    hess = np.empty((p, p))
    for j in range(p):
        h = fd_constant * max(abs(theta[j]), 1.0)
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        gp = derivfilter.run_gradient_filter(provider, tp, y).gradient
        gm = derivfilter.run_gradient_filter(provider, tm, y).gradient
        hess[:, j] = (gp - gm) / (2.0 * h)
    return 0.5 * (hess + hess.T)
