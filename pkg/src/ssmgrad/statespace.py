"""Linear Gaussian state-space models with parameter derivatives.

The model is

    x_n = F x_{n-1} + G v_n,     v_n ~ N(0, Q)
    y_n = H x_n + w_n,           w_n ~ N(0, R)

with scalar observations.  All matrices are time invariant and are
functions of an unconstrained parameter vector ``theta`` of length p.
Alongside the matrices a model carries their first derivatives with respect
to every ``theta_j`` (leading axis of length p) and, optionally, their second
derivatives stored once per unordered pair ``(j, k)``, ``j <= k``, in the
order produced by :func:`pair_indices`.

Array conventions (m = state_dim, k = noise_dim, p = param_dim,
P = p(p+1)/2):

    F (m, m)   G (m, k)   H (m,)   Q (k, k)   R scalar
    dF (p, m, m) ... dR (p,)
    d2F (P, m, m) ... d2R (P,)
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np

from .errors import BadDimension

__all__ = [
    "ModelDims",
    "ModelMatrices",
    "InitialCondition",
    "ModelProvider",
    "pair_indices",
    "pair_position",
    "unpack_pairs",
    "validate_model",
    "simulate",
]


@lru_cache(maxsize=None)
def pair_indices(p):
    """Row/column index arrays enumerating pairs ``j <= k`` of ``range(p)``."""
    j, k = np.triu_indices(p)
    j.setflags(write=False)
    k.setflags(write=False)
    return j, k


def pair_position(j, k, p):
    """Position of the pair ``(j, k)`` (either order) in a pair-indexed stack."""
    if j > k:
        j, k = k, j
    # rows 0..j-1 contribute p, p-1, ..., p-j+1 entries
    return j * p - j * (j - 1) // 2 + (k - j)


def unpack_pairs(stack, p):
    """Expand a pair-indexed stack of shape (P, ...) into a full (p, p, ...) array."""
    stack = np.asarray(stack)
    j, k = pair_indices(p)
    full = np.empty((p, p) + stack.shape[1:], dtype=stack.dtype)
    full[j, k] = stack
    full[k, j] = stack
    return full


@dataclass(frozen=True)
class ModelDims:
    state_dim: int
    noise_dim: int
    param_dim: int

    def __post_init__(self):
        for name in ("state_dim", "noise_dim", "param_dim"):
            if int(getattr(self, name)) < 1:
                raise BadDimension(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def n_pairs(self):
        return self.param_dim * (self.param_dim + 1) // 2


@dataclass(frozen=True)
class ModelMatrices:
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: float
    dF: np.ndarray
    dG: np.ndarray
    dH: np.ndarray
    dQ: np.ndarray
    dR: np.ndarray
    d2F: Optional[np.ndarray] = None
    d2G: Optional[np.ndarray] = None
    d2H: Optional[np.ndarray] = None
    d2Q: Optional[np.ndarray] = None
    d2R: Optional[np.ndarray] = None

    @property
    def has_second_derivatives(self):
        return all(
            x is not None for x in (self.d2F, self.d2G, self.d2H, self.d2Q, self.d2R)
        )

    # time-invariant pieces reused at every filter step

    @cached_property
    def Ft(self):
        return np.ascontiguousarray(self.F.T)

    @cached_property
    def GQGt(self):
        return self.G @ self.Q @ self.G.T

    @cached_property
    def dGQGt(self):
        """Derivative stack of G Q G'."""
        B = self.dG @ (self.Q @ self.G.T)
        return self.G @ self.dQ @ self.G.T + B + np.swapaxes(B, 1, 2)


@dataclass(frozen=True)
class InitialCondition:
    x0: np.ndarray
    V0: np.ndarray
    dx0: np.ndarray
    dV0: np.ndarray
    d2x0: Optional[np.ndarray] = None
    d2V0: Optional[np.ndarray] = None

    @property
    def has_second_derivatives(self):
        return self.d2x0 is not None and self.d2V0 is not None


class ModelProvider(ABC):
    """Maps an unconstrained parameter vector to a fully specified model.

    Subclasses set ``param_dim`` and implement :meth:`evaluate`.  Evaluation
    must be a pure function of ``theta``.
    """

    param_dim: int
    has_second_derivatives = False
    # ARMA: the filter runs with unit innovation variance and the
    # likelihood is concentrated over it
    concentrated_variance = False

    @abstractmethod
    def evaluate(self, theta, order=1):
        """Return ``(ModelDims, ModelMatrices, InitialCondition)`` at ``theta``.

        ``order=2`` requests the second-derivative stacks; providers that
        cannot supply them ignore the request and leave them as ``None``.
        """

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_dim,):
            raise BadDimension(
                f"expected a parameter vector of length {self.param_dim}, "
                f"got shape {theta.shape}"
            )
        return theta

    def param_names(self):
        return [f"theta{j + 1}" for j in range(self.param_dim)]


def _is_symmetric(a, rtol=1e-10):
    a = np.asarray(a)
    scale = max(np.max(np.abs(a), initial=0.0), 1.0)
    return np.max(np.abs(a - np.swapaxes(a, -1, -2)), initial=0.0) <= rtol * scale


def _is_psd(a, rtol=1e-10):
    a = 0.5 * (a + a.T)
    w = np.linalg.eigvalsh(a)
    return w.min(initial=0.0) >= -rtol * max(np.abs(w).max(initial=0.0), 1.0)


def validate_model(mm, ic, dims):
    """Check shapes, symmetry and definiteness of a model.

    Returns a list of human-readable violations; an empty list means the
    model is valid.
    """
    m, k, p = dims.state_dim, dims.noise_dim, dims.param_dim
    problems = []

    def shape(name, arr, expected):
        got = np.shape(arr)
        if got != expected:
            problems.append(f"{name} has shape {got}, expected {expected}")
            return False
        return True

    shape("F", mm.F, (m, m))
    shape("G", mm.G, (m, k))
    shape("H", mm.H, (m,))
    if shape("Q", mm.Q, (k, k)):
        if not _is_symmetric(mm.Q):
            problems.append("Q not symmetric")
        elif not _is_psd(mm.Q):
            problems.append("Q not positive semidefinite")
    if np.ndim(mm.R) != 0:
        problems.append(f"R must be a scalar, got shape {np.shape(mm.R)}")
    elif not mm.R >= 0:
        problems.append("R negative")

    for name, arr, tail in (
        ("dF", mm.dF, (m, m)),
        ("dG", mm.dG, (m, k)),
        ("dH", mm.dH, (m,)),
        ("dQ", mm.dQ, (k, k)),
        ("dR", mm.dR, ()),
        ("dx0", ic.dx0, (m,)),
        ("dV0", ic.dV0, (m, m)),
    ):
        arr = np.asarray(arr)
        if arr.ndim == 0 or arr.shape[0] != p:
            problems.append(
                f"derivative stack length mismatch: {name} has "
                f"{arr.shape[0] if arr.ndim else 0} entries, expected {p}"
            )
        elif arr.shape[1:] != tail:
            problems.append(f"{name} entries have shape {arr.shape[1:]}, expected {tail}")
    if np.shape(mm.dQ)[1:] == (k, k) and not _is_symmetric(mm.dQ):
        problems.append("dQ not symmetric")
    if np.shape(ic.dV0)[1:] == (m, m) and not _is_symmetric(ic.dV0):
        problems.append("dV0 not symmetric")

    second = {
        "d2F": (mm.d2F, (m, m)),
        "d2G": (mm.d2G, (m, k)),
        "d2H": (mm.d2H, (m,)),
        "d2Q": (mm.d2Q, (k, k)),
        "d2R": (mm.d2R, ()),
        "d2x0": (ic.d2x0, (m,)),
        "d2V0": (ic.d2V0, (m, m)),
    }
    present = [name for name, (arr, _) in second.items() if arr is not None]
    if present and len(present) != len(second):
        missing = sorted(set(second) - set(present))
        problems.append(f"incomplete second-derivative stacks: missing {missing}")
    for name in present:
        arr, tail = second[name]
        arr = np.asarray(arr)
        if arr.ndim == 0 or arr.shape[0] != dims.n_pairs:
            problems.append(
                f"second-derivative stack length mismatch: {name} has "
                f"{arr.shape[0] if arr.ndim else 0} entries, expected {dims.n_pairs}"
            )
        elif arr.shape[1:] != tail:
            problems.append(f"{name} entries have shape {arr.shape[1:]}, expected {tail}")

    if shape("x0", ic.x0, (m,)) and not np.all(np.isfinite(ic.x0)):
        problems.append("x0 not finite")
    if shape("V0", ic.V0, (m, m)):
        if not _is_symmetric(ic.V0):
            problems.append("V0 not symmetric")
        elif not _is_psd(ic.V0):
            problems.append("V0 not positive semidefinite")
    return problems


def simulate(mm, ic, n, rng):
    """Draw ``n`` observations from the model.

    The initial state is drawn from N(x0, V0); system and observation noise
    are drawn from ``rng`` (a ``numpy.random.Generator``).  Returns
    ``(y, states)`` with ``states`` of shape (n, m).
    """
    m, k = mm.G.shape
    x = rng.multivariate_normal(ic.x0, ic.V0, method="eigh")
    # eigh-based factor tolerates singular Q (e.g. zero seasonal variance)
    q_root = _psd_root(np.atleast_2d(mm.Q))
    r_root = float(np.sqrt(mm.R))
    y = np.empty(n)
    states = np.empty((n, m))
    for t in range(n):
        x = mm.F @ x + mm.G @ (q_root @ rng.standard_normal(k))
        states[t] = x
        y[t] = mm.H @ x + r_root * rng.standard_normal()
    return y, states


def _psd_root(a):
    w, u = np.linalg.eigh(0.5 * (a + a.T))
    return u * np.sqrt(np.clip(w, 0.0, None))
