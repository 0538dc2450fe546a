"""ARMA(m, l) models in state-space form with a concentrated innovation variance.

    y_n = sum_j a_j y_{n-j} + v_n - sum_j b_j v_{n-j},   v_n ~ N(0, sigma2)

The state has dimension k = max(m, l + 1).  The filter starts from the
stationary distribution of the state, whose covariance is assembled from the
impulse response and autocovariance functions; its derivatives with respect
to the coefficients are obtained by differentiating those constructions,
which is what makes the gradient filter exact for ARMA models.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadDimension, NonStationary, SingularCovarianceSystem
from .models_seasonal import transformed_ar
from .statespace import InitialCondition, ModelDims, ModelMatrices, ModelProvider

__all__ = [
    "ArmaSpec",
    "ArmaModel",
    "impulse_response",
    "impulse_response_derivatives",
    "autocovariance",
    "autocovariance_derivatives",
    "initial_covariance",
    "initial_covariance_derivatives",
    "transform_arma_params",
    "companion_radius",
    "build_arma",
    "simulate_arma",
]

_COND_LIMIT = 1e12


def companion_radius(coef):
    """Spectral radius of the companion matrix of 1 - sum c_j z^j."""
    coef = np.asarray(coef, dtype=float)
    if coef.size == 0:
        return 0.0
    comp = np.zeros((coef.size, coef.size))
    comp[0] = coef
    comp[np.arange(1, coef.size), np.arange(coef.size - 1)] = 1.0
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def impulse_response(a, b, upto):
    """Coefficients g_0..g_upto of the infinite-MA representation."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    g = np.zeros(upto + 1)
    g[0] = 1.0
    for i in range(1, upto + 1):
        jmax = min(i, a.size)
        acc = np.dot(a[:jmax], g[i - 1 :: -1][:jmax])
        g[i] = acc - (b[i - 1] if i <= b.size else 0.0)
    return g


def impulse_response_derivatives(a, b, upto, g=None):
    """Derivatives of g_0..g_upto: arrays ``(dg_da, dg_db)`` of shapes (m, upto+1), (l, upto+1)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, l = a.size, b.size
    if g is None:
        g = impulse_response(a, b, upto)
    dga = np.zeros((m, upto + 1))
    dgb = np.zeros((l, upto + 1))
    for i in range(1, upto + 1):
        jmax = min(i, m)
        back = slice(i - 1, i - 1 - jmax if i - 1 - jmax >= 0 else None, -1)
        if m:
            dga[:, i] = dga[:, back] @ a[:jmax]
            for p in range(1, m + 1):
                if i - p >= 0:
                    dga[p - 1, i] += g[i - p]
        if l:
            dgb[:, i] = dgb[:, back] @ a[:jmax]
            if i <= l:
                dgb[i - 1, i] -= 1.0
    return dga, dgb


def _cov_system(a, upto):
    """Matrix of C_k - sum_i a_i C_{|k-i|} for k = 0..upto."""
    A = np.eye(upto + 1)
    for kk in range(upto + 1):
        for i, ai in enumerate(a, start=1):
            A[kk, abs(kk - i)] -= ai
    return A


def _cov_rhs(b, g, sigma2, upto):
    """Moving-average forcing terms of the autocovariance equations."""
    l = len(b)
    rhs = np.zeros(upto + 1)
    for kk in range(upto + 1):
        if kk == 0:
            rhs[0] = sigma2 * (1.0 - np.dot(b, g[1 : l + 1]))
        else:
            rhs[kk] = -sigma2 * sum(b[i - 1] * g[i - kk] for i in range(kk, l + 1))
    return rhs


def _solve(A, rhs):
    try:
        cond = np.linalg.cond(A)
    except np.linalg.LinAlgError as exc:
        raise SingularCovarianceSystem(str(exc)) from exc
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularCovarianceSystem(
            f"autocovariance system is numerically singular (condition number {cond:.3g}); "
            "AR part is not stationary"
        )
    return np.linalg.solve(A, rhs)


def _extend(a, C, rhs_tail):
    """Continue C beyond the solved lags by the AR recursion."""
    C = list(C)
    for f in rhs_tail:
        kk = len(C)
        C.append(sum(ai * C[abs(kk - i)] for i, ai in enumerate(a, start=1)) + f)
    return np.array(C)


def autocovariance(a, b, sigma2, upto):
    """Autocovariances C_0..C_upto of a stationary ARMA process."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, l = a.size, b.size
    K = max(m, upto)
    g = impulse_response(a, b, max(K, l) + 1)
    rhs = _cov_rhs(b, g, sigma2, K)
    C = _solve(_cov_system(a, m), rhs[: m + 1])
    C = _extend(a, C, rhs[m + 1 :])
    return C[: upto + 1]


def autocovariance_derivatives(a, b, sigma2, upto):
    """Derivatives of C_0..C_upto: ``(dC_da, dC_db)`` of shapes (m, upto+1), (l, upto+1).

    The derivative systems share the coefficient matrix of the
    autocovariance equations; only the forcing terms change.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, l = a.size, b.size
    K = max(m, upto)
    G = max(K, l) + 1
    g = impulse_response(a, b, G)
    dga, dgb = impulse_response_derivatives(a, b, G, g)
    C = autocovariance(a, b, sigma2, K)
    A = _cov_system(a, m)

    e0 = np.zeros(K + 1)
    e0[0] = sigma2  # the constant in the C_0 equation does not depend on a, b

    dCa = np.zeros((m, upto + 1))
    dCb = np.zeros((l, upto + 1))
    for p in range(1, m + 1):
        f = _cov_rhs(b, dga[p - 1], sigma2, K) - e0
        f += C[np.abs(np.arange(K + 1) - p)]
        d = _extend(a, _solve(A, f[: m + 1]), f[m + 1 :])
        dCa[p - 1] = d[: upto + 1]
    for p in range(1, l + 1):
        f = _cov_rhs(b, dgb[p - 1], sigma2, K) - e0
        for kk in range(min(p, K) + 1):
            f[kk] -= sigma2 * g[p - kk]
        d = _extend(a, _solve(A, f[: m + 1]), f[m + 1 :])
        dCb[p - 1] = d[: upto + 1]
    return dCa, dCb


@dataclass(frozen=True)
class _Tangent:
    """Directional derivative of the ingredients of the state covariance."""

    da: np.ndarray
    db: np.ndarray
    dC: np.ndarray
    dg: np.ndarray


def _state_cov(a, b, C, g, sigma2, k, tangent=None):
    """State covariance of the ARMA state vector, or its directional derivative.

    State component i (1-based) is
        sum_{p=i}^{m} a_p y_{n+i-1-p} - sum_{p=i-1}^{l} b_p v_{n+i-1-p}
    (component 1 is y_n itself), so every entry is a sum of products of
    coefficients with autocovariances, impulse responses or sigma2.  With a
    ``tangent`` the product rule is applied factor by factor.
    """
    m, l = len(a), len(b)

    def get(arr, i, lo, hi):
        return arr[i - 1] if lo <= i <= hi else 0.0

    def A(i, arr=a):
        return get(arr, i, 1, m)

    def B(i, arr=b):
        return get(arr, i, 1, l)

    def Cl(s, arr=C):
        return arr[abs(s)]

    def g_(s, arr=g):
        return arr[s] if s >= 0 else 0.0

    if tangent is not None:
        da, db, dC, dg = tangent.da, tangent.db, tangent.dC, tangent.dg

    V = np.zeros((k, k))
    # V_11
    V[0, 0] = Cl(0) if tangent is None else Cl(0, dC)
    # V_1i, i >= 2
    for i in range(2, k + 1):
        acc = 0.0
        for j in range(i, m + 1):
            if tangent is None:
                acc += A(j) * Cl(j + 1 - i)
            else:
                acc += A(j, da) * Cl(j + 1 - i) + A(j) * Cl(j + 1 - i, dC)
        for j in range(i - 1, l + 1):
            if tangent is None:
                acc -= sigma2 * B(j) * g_(j + 1 - i)
            else:
                acc -= sigma2 * (B(j, db) * g_(j + 1 - i) + B(j) * g_(j + 1 - i, dg))
        V[0, i - 1] = V[i - 1, 0] = acc
    # V_ij, i, j >= 2
    for i in range(2, k + 1):
        for j in range(i, k + 1):
            acc = 0.0
            for p in range(i, m + 1):
                for q in range(j, m + 1):
                    s = q - j - p + i
                    if tangent is None:
                        acc += A(p) * A(q) * Cl(s)
                    else:
                        acc += (A(p, da) * A(q) + A(p) * A(q, da)) * Cl(s) + A(p) * A(q) * Cl(s, dC)
                for q in range(j - 1, l + 1):
                    s = q - j - p + i
                    if tangent is None:
                        acc -= sigma2 * A(p) * B(q) * g_(s)
                    else:
                        acc -= sigma2 * (
                            (A(p, da) * B(q) + A(p) * B(q, db)) * g_(s) + A(p) * B(q) * g_(s, dg)
                        )
            for p in range(i - 1, l + 1):
                for q in range(j, m + 1):
                    s = p - i - q + j
                    if tangent is None:
                        acc -= sigma2 * B(p) * A(q) * g_(s)
                    else:
                        acc -= sigma2 * (
                            (B(p, db) * A(q) + B(p) * A(q, da)) * g_(s) + B(p) * A(q) * g_(s, dg)
                        )
                pj = p + j - i
                if tangent is None:
                    acc += sigma2 * B(p) * B(pj)
                else:
                    acc += sigma2 * (B(p, db) * B(pj) + B(p) * B(pj, db))
            V[i - 1, j - 1] = V[j - 1, i - 1] = acc
    return V


def _state_dim(m, l):
    return max(m, l + 1)


def initial_covariance(a, b, sigma2=1.0):
    """Stationary covariance V0 of the ARMA state vector."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    k = _state_dim(a.size, b.size)
    C = autocovariance(a, b, sigma2, k)
    g = impulse_response(a, b, k + b.size + 1)
    V = _state_cov(a, b, C, g, sigma2, k)
    return 0.5 * (V + V.T)


def initial_covariance_derivatives(a, b, sigma2=1.0):
    """``(dV0_da, dV0_db)`` stacks of shapes (m, k, k) and (l, k, k)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, l = a.size, b.size
    k = _state_dim(m, l)
    ng = k + l + 1
    C = autocovariance(a, b, sigma2, k)
    g = impulse_response(a, b, ng)
    dCa, dCb = autocovariance_derivatives(a, b, sigma2, k)
    dga, dgb = impulse_response_derivatives(a, b, ng, g)
    out_a = np.zeros((m, k, k))
    out_b = np.zeros((l, k, k))
    for p in range(m):
        t = _Tangent(np.eye(m)[p], np.zeros(l), dCa[p], dga[p])
        V = _state_cov(a, b, C, g, sigma2, k, t)
        out_a[p] = 0.5 * (V + V.T)
    for p in range(l):
        t = _Tangent(np.zeros(m), np.eye(l)[p], dCb[p], dgb[p])
        V = _state_cov(a, b, C, g, sigma2, k, t)
        out_b[p] = 0.5 * (V + V.T)
    return out_a, out_b


def transform_arma_params(theta, m, l, C=0.99):
    """Coefficients from unconstrained coordinates.

    The first ``m`` entries are mapped to AR PARCORs and the last ``l`` to MA
    "PARCORs", each through ``C (e^t - 1)/(e^t + 1)``, and then through the
    Levinson recursion.  Returns ``(a, b, jacobian)`` where the jacobian is
    block diagonal, ``d(a, b) / d theta``.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (m + l,):
        raise BadDimension(f"expected {m + l} parameters, got shape {theta.shape}")
    a, da, _ = transformed_ar(theta[:m], C)
    b, db, _ = transformed_ar(theta[m:], C)
    jac = np.zeros((m + l, m + l))
    jac[:m, :m] = da
    jac[m:, m:] = db
    return a, b, jac


@dataclass(frozen=True)
class ArmaSpec:
    ar_order: int
    ma_order: int
    parcor_bound: float = 0.99
    transformed: bool = True

    def __post_init__(self):
        if self.ar_order < 0 or self.ma_order < 0:
            raise BadDimension("ARMA orders must be non-negative")
        if not 0.0 < self.parcor_bound <= 1.0:
            raise ValueError(f"parcor_bound must lie in (0, 1], got {self.parcor_bound}")

    @property
    def state_dim(self):
        return _state_dim(self.ar_order, self.ma_order)

    @property
    def param_dim(self):
        return self.ar_order + self.ma_order


def _coefficients(spec, theta):
    m, l = spec.ar_order, spec.ma_order
    if spec.transformed:
        return transform_arma_params(theta, m, l, spec.parcor_bound)
    a, b = theta[:m].copy(), theta[m:].copy()
    if companion_radius(a) >= 1.0:
        raise NonStationary(f"AR coefficients {a.tolist()} are not stationary")
    return a, b, np.eye(m + l)


def build_arma(spec, theta):
    """Structure matrices and stationary initial condition (unit innovation variance)."""
    theta = np.asarray(theta, dtype=float)
    m, l = spec.ar_order, spec.ma_order
    p = m + l
    if p < 1:
        raise BadDimension("an ARMA model needs at least one coefficient")
    if theta.shape != (p,):
        raise BadDimension(f"ARMA({m},{l}) expects {p} parameters, got shape {theta.shape}")
    a, b, jac = _coefficients(spec, theta)
    k = spec.state_dim

    F = np.zeros((k, k))
    F[:m, 0] = a
    F[np.arange(k - 1), np.arange(1, k)] = 1.0
    G = np.zeros((k, 1))
    G[0, 0] = 1.0
    G[1 : l + 1, 0] = -b
    H = np.zeros(k)
    H[0] = 1.0

    dF = np.zeros((p, k, k))
    dG = np.zeros((p, k, 1))
    for j in range(m):
        dF[j, j, 0] = 1.0
    for j in range(l):
        dG[m + j, j + 1, 0] = -1.0

    V0 = initial_covariance(a, b, 1.0)
    dVa, dVb = initial_covariance_derivatives(a, b, 1.0)
    dV0 = np.concatenate([dVa, dVb], axis=0)

    if spec.transformed:
        # chain rule through the coefficient map
        dF = np.einsum("i...,ij->j...", dF, jac)
        dG = np.einsum("i...,ij->j...", dG, jac)
        dV0 = np.einsum("i...,ij->j...", dV0, jac)

    mm = ModelMatrices(
        F=F, G=G, H=H, Q=np.ones((1, 1)), R=0.0,
        dF=dF, dG=dG, dH=np.zeros((p, k)), dQ=np.zeros((p, 1, 1)), dR=np.zeros(p),
    )
    ic = InitialCondition(x0=np.zeros(k), V0=V0, dx0=np.zeros((p, k)), dV0=dV0)
    return mm, ic


class ArmaModel(ModelProvider):
    """ARMA(m, l) provider; the innovation variance is concentrated out."""

    concentrated_variance = True
    has_second_derivatives = False

    def __init__(self, ar_order, ma_order, parcor_bound=0.99, transformed=True):
        self.spec = ArmaSpec(int(ar_order), int(ma_order), float(parcor_bound), bool(transformed))
        if self.spec.param_dim < 1:
            raise BadDimension("an ARMA model needs at least one coefficient")
        self.param_dim = self.spec.param_dim

    def evaluate(self, theta, order=1):
        theta = self.check_theta(theta)
        mm, ic = build_arma(self.spec, theta)
        return ModelDims(self.spec.state_dim, 1, self.param_dim), mm, ic

    def coefficients(self, theta):
        """``(a, b)`` at ``theta``."""
        a, b, _ = _coefficients(self.spec, self.check_theta(theta))
        return a, b

    def jacobian(self, theta):
        return _coefficients(self.spec, self.check_theta(theta))[2]

    def to_theta(self, a, b):
        """Inverse map from coefficients to this model's coordinates."""
        from .models_seasonal import ar_to_parcor, parcor_to_unconstrained

        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if not self.spec.transformed:
            return np.concatenate([a, b])
        C = self.spec.parcor_bound
        return np.concatenate(
            [parcor_to_unconstrained(ar_to_parcor(a), C), parcor_to_unconstrained(ar_to_parcor(b), C)]
        )

    def param_names(self):
        m, l = self.spec.ar_order, self.spec.ma_order
        if self.spec.transformed:
            return [f"alpha{j + 1}" for j in range(m)] + [f"delta{j + 1}" for j in range(l)]
        return [f"a{j + 1}" for j in range(m)] + [f"b{j + 1}" for j in range(l)]

    def default_theta(self):
        return np.zeros(self.param_dim)

    def structural(self, theta):
        a, b = self.coefficients(theta)
        return {"ar": a.tolist(), "ma": b.tolist()}

    def describe(self):
        return {
            "model": "arma",
            "ar_order": self.spec.ar_order,
            "ma_order": self.spec.ma_order,
            "parcor_bound": self.spec.parcor_bound,
            "coordinates": "transformed" if self.spec.transformed else "raw",
        }


def simulate_arma(a, b, sigma2, n, rng, burn=None):
    """Simulate a zero-mean ARMA series started from its stationary distribution."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if companion_radius(a) >= 1.0:
        raise NonStationary(f"AR coefficients {a.tolist()} are not stationary")
    spec = ArmaSpec(a.size, b.size, transformed=False)
    if spec.param_dim == 0:
        return np.sqrt(sigma2) * rng.standard_normal(n)
    mm, ic = build_arma(spec, np.concatenate([a, b]))
    x = rng.multivariate_normal(np.zeros(spec.state_dim), sigma2 * ic.V0, method="eigh")
    v = np.sqrt(sigma2) * rng.standard_normal(n)
    y = np.empty(n)
    g = mm.G[:, 0]
    for t in range(n):
        x = mm.F @ x + g * v[t]
        y[t] = x[0]
    return y
