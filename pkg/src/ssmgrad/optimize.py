"""BFGS maximization of the log-likelihood and a finite-difference gradient oracle."""

import logging
import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search

from . import derivfilter, kalman
from .errors import EvaluationFailure, ProbeFailure, SSMError

log = logging.getLogger(__name__)

__all__ = [
    "OptimizerConfig",
    "OptimizeResult",
    "LikelihoodObjective",
    "fd_gradient",
    "bfgs_maximize",
    "maximize",
    "check_gradient",
    "GradientCheckRow",
    "agreement_digits",
    "aic",
]


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 200
    grad_tol: float = 1e-6
    step_tol: float = 1e-10
    c1: float = 1e-4
    c2: float = 0.9
    fd_constant: float = 1e-3

    def __post_init__(self):
        if min(self.grad_tol, self.step_tol, self.fd_constant) <= 0:
            raise ValueError("tolerances and the difference constant must be positive")
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError("line-search constants must satisfy 0 < c1 < c2 < 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")


@dataclass
class OptimizeResult:
    theta_hat: np.ndarray
    loglik: float
    gradient: np.ndarray
    n_iter: int
    converged: bool
    aic: float
    history: list = field(default_factory=list)
    message: str = ""
    n_filter_passes: int = 0
    n_gradient_evals: int = 0
    gradient_method: str = "analytic"
    # filter passes needed for one gradient: 1 analytic, 2p by differences
    passes_per_gradient: int = 1


def aic(loglik, n_params):
    return -2.0 * loglik + 2.0 * n_params


def fd_gradient(f, theta, C=1e-3):
    """Central-difference gradient with steps ``C * max(|theta_j|, 1)``."""
    theta = np.asarray(theta, dtype=float)
    grad = np.empty(theta.size)
    for j in range(theta.size):
        h = C * max(abs(theta[j]), 1.0)
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += h
        tm[j] -= h
        vals = []
        for probe in (tp, tm):
            try:
                v = float(f(probe))
            except (SSMError, FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
                raise ProbeFailure(probe, exc) from exc
            if not math.isfinite(v):
                raise ProbeFailure(probe, f"non-finite value {v}")
            vals.append(v)
        grad[j] = (vals[0] - vals[1]) / (2.0 * h)
    return grad


class LikelihoodObjective:
    """Log-likelihood of a series under a provider, with filter-pass accounting.

    ``gradient`` selects the analytic gradient filter or central finite
    differences of the plain filter.  The most recent evaluation is cached
    so that value and gradient requests at the same point share a pass.
    """

    def __init__(self, provider, y, gradient="analytic", fd_constant=1e-3):
        if gradient not in ("analytic", "fd"):
            raise ValueError(f"unknown gradient method {gradient!r}")
        self.provider = provider
        self.y = np.asarray(y, dtype=float).ravel()
        self.gradient_method = gradient
        self.fd_constant = fd_constant
        self.n_filter_passes = 0
        self.n_gradient_evals = 0
        self.n_gradient_passes = 0
        self._key = None
        self._value = None
        self._grad = None
        # innovations of recent points, for accurate likelihood differences
        self._terms = OrderedDict()

    @property
    def n_params(self):
        return self.provider.param_dim + (1 if self.provider.concentrated_variance else 0)

    def loglik(self, theta):
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key == self._key and self._value is not None:
            return self._value
        self.n_filter_passes += 1
        report = kalman.run_filter(self.provider, theta, self.y)
        self._remember(key, report)
        self._key, self._value, self._grad = key, report.loglik, None
        return report.loglik

    def _remember(self, key, report):
        self._terms[key] = (report.eps, report.r)
        while len(self._terms) > 8:
            self._terms.popitem(last=False)

    def difference(self, theta, theta_ref):
        """``loglik(theta) - loglik(theta_ref)`` without cancellation error."""
        keys = [np.asarray(t, dtype=float).tobytes() for t in (theta, theta_ref)]
        for t, key in zip((theta, theta_ref), keys):
            if key not in self._terms:
                self.loglik(t)
        (e1, r1), (e0, r0) = self._terms[keys[0]], self._terms[keys[1]]
        return kalman.loglik_difference(e1, r1, e0, r0, self.provider.concentrated_variance)

    def _fd_probe(self, theta):
        self.n_filter_passes += 1
        self.n_gradient_passes += 1
        return kalman.run_filter(self.provider, theta, self.y).loglik

    def value_and_grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        key = theta.tobytes()
        if key == self._key and self._grad is not None:
            return self._value, self._grad
        self.n_gradient_evals += 1
        if self.gradient_method == "analytic":
            self.n_filter_passes += 1
            self.n_gradient_passes += 1
            report = derivfilter.run_gradient_filter(self.provider, theta, self.y)
            self._remember(key, report)
            value, grad = report.loglik, report.gradient
        else:
            value = self.loglik(theta)
            grad = fd_gradient(self._fd_probe, theta, self.fd_constant)
        self._key, self._value, self._grad = key, value, grad
        return value, grad


def _safe(fn, theta):
    try:
        return fn(theta)
    except (SSMError, FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
        log.debug("evaluation failed at %s: %s", theta, exc)
        return None


def bfgs_maximize(provider, theta0, y, cfg=None, gradient="auto"):
    """Maximize the log-likelihood by BFGS with a Wolfe line search.

    ``gradient="auto"`` uses the gradient filter (every provider in this
    package supplies derivative stacks); ``"fd"`` forces central differences.
    """
    cfg = cfg or OptimizerConfig()
    method = "analytic" if gradient == "auto" else gradient
    obj = LikelihoodObjective(provider, y, method, cfg.fd_constant)
    return maximize(obj, theta0, cfg)


def maximize(obj, theta0, cfg=None):
    """BFGS ascent on any object exposing ``value_and_grad`` and ``n_params``."""
    cfg = cfg or OptimizerConfig()
    theta = np.array(theta0, dtype=float)
    p = theta.size
    try:
        ll, g = obj.value_and_grad(theta)
    except (SSMError, FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
        raise EvaluationFailure(theta, exc) from exc
    if not math.isfinite(ll):
        raise EvaluationFailure(theta, f"log-likelihood {ll} is not finite")

    # the line search minimizes phi(t) = loglik(theta) - loglik(t), measured
    # from the current iterate so that tiny improvements remain visible
    if hasattr(obj, "difference"):
        def gain(t, ref, ll_ref):
            return obj.difference(t, ref)
    else:
        def gain(t, ref, ll_ref):
            return obj.value_and_grad(t)[0] - ll_ref

    def make_phi(ref, ll_ref):
        def phi(t):
            out = _safe(obj.value_and_grad, t)
            if out is None or not math.isfinite(out[0]):
                return math.inf
            return -gain(t, ref, ll_ref)
        return phi

    def dphi(t):
        out = _safe(obj.value_and_grad, t)
        return np.full(p, np.nan) if out is None else -out[1]

    Hinv = np.eye(p)
    history = [{"iter": 0, "loglik": ll, "max_grad": float(np.max(np.abs(g))), "step": 0.0, "gain": 0.0}]
    prev_phi = 0.5 * np.linalg.norm(g)  # first trial step ~ 1/|g|
    converged = bool(np.max(np.abs(g)) <= cfg.grad_tol)
    message = "gradient tolerance met" if converged else ""
    it = 0
    while not converged and it < cfg.max_iter:
        it += 1
        d = Hinv @ g
        if not np.dot(g, d) > 0:
            Hinv = np.eye(p)
            d = g.copy()
        phi = make_phi(theta.copy(), ll)
        alpha, *_ = _wolfe(phi, dphi, theta, d, -g, 0.0, prev_phi, cfg)
        if alpha is None:
            alpha = _backtrack(phi, theta, d, 0.0, -np.dot(g, d), cfg.c1)
        if alpha is None:
            message = "line search failed to increase the log-likelihood"
            break
        theta_new = theta + alpha * d
        ll_new, g_new = obj.value_and_grad(theta_new)
        increase = gain(theta_new, theta, ll)
        if not increase > 0:
            message = "line search failed to increase the log-likelihood"
            break
        s = theta_new - theta
        yv = g - g_new  # change in the gradient of -loglik
        prev_phi = increase  # phi at the old iterate, seen from the new one
        theta, ll, g = theta_new, ll_new, g_new
        step = float(np.max(np.abs(s)))
        history.append(
            {"iter": it, "loglik": ll, "max_grad": float(np.max(np.abs(g))), "step": step, "gain": increase}
        )

        if np.max(np.abs(g)) <= cfg.grad_tol:
            converged = True
            message = "gradient tolerance met"
            break
        if step < cfg.step_tol:
            message = "step below tolerance"
            break

        sy = float(np.dot(s, yv))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            rho = 1.0 / sy
            if it == 1:
                Hinv = (sy / np.dot(yv, yv)) * np.eye(p)
            Hs = np.outer(s, yv) * rho
            Hinv = (np.eye(p) - Hs) @ Hinv @ (np.eye(p) - Hs.T) + rho * np.outer(s, s)
            Hinv = 0.5 * (Hinv + Hinv.T)
        else:
            Hinv = np.eye(p)
    else:
        if not converged:
            message = message or "maximum number of iterations reached"

    passes_per_grad = 1 if getattr(obj, "gradient_method", "analytic") == "analytic" else 2 * p
    return OptimizeResult(
        theta_hat=theta,
        loglik=ll,
        gradient=g,
        n_iter=it,
        converged=converged,
        aic=aic(ll, obj.n_params),
        history=history,
        message=message,
        n_filter_passes=getattr(obj, "n_filter_passes", 0),
        n_gradient_evals=getattr(obj, "n_gradient_evals", 0),
        gradient_method=getattr(obj, "gradient_method", "analytic"),
        passes_per_gradient=passes_per_grad,
    )


def _wolfe(phi, dphi, theta, d, gfk, phi0, prev_phi, cfg):
    # a failed Wolfe search is handled by the backtracking fallback
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The line search algorithm")
        try:
            return line_search(
                phi, dphi, theta, d, gfk=gfk, old_fval=phi0, old_old_fval=prev_phi,
                c1=cfg.c1, c2=cfg.c2, maxiter=30,
            )
        except (FloatingPointError, ValueError):
            return (None,)


def _backtrack(phi, theta, d, phi0, slope, c1, shrink=0.5, max_halvings=60):
    """Armijo backtracking fallback; ``slope`` is the directional derivative of phi."""
    alpha = 1.0
    for _ in range(max_halvings):
        val = phi(theta + alpha * d)
        if math.isfinite(val) and val < phi0 and val <= phi0 + c1 * alpha * slope:
            return alpha
        alpha *= shrink
    return None


@dataclass(frozen=True)
class GradientCheckRow:
    name: str
    analytic: float
    fd: float
    abs_diff: float
    rel_diff: float
    digits: int


def agreement_digits(a, b):
    """Number of leading significant digits on which two numbers agree."""
    if a == b:
        return 17
    scale = max(abs(a), abs(b))
    rel = abs(a - b) / scale
    return int(max(0, min(17, math.floor(-math.log10(rel)))))


def check_gradient(provider, theta, y, C=1e-3):
    """Compare the analytic gradient with central differences, per component."""
    theta = provider.check_theta(theta)
    y = np.asarray(y, dtype=float).ravel()
    report = derivfilter.run_gradient_filter(provider, theta, y)
    fd = fd_gradient(lambda t: kalman.run_filter(provider, t, y).loglik, theta, C)
    rows = []
    for name, a, f in zip(provider.param_names(), report.gradient, fd):
        diff = abs(a - f)
        scale = max(abs(a), abs(f))
        rel = diff / scale if scale > 0 else 0.0
        rows.append(GradientCheckRow(name, float(a), float(f), float(diff), float(rel), agreement_digits(a, f)))
    return rows
