"""Compiled inner loops for the plain and gradient filter passes.

Both kernels advance the state moments with the same helper functions, so
the plain filter and the gradient filter produce bitwise-identical
innovations.  A negative return status means success; otherwise it is the
step at which the innovation variance stopped being positive.
"""

import numba
import numpy as np

R_FLOOR = 1e-300


@numba.njit(cache=True)
def _predict(F, GQGt, x, V, x_out, V_out, tmp):
    m = x.size
    for i in range(m):
        s = 0.0
        for l in range(m):
            s += F[i, l] * x[l]
        x_out[i] = s
    # tmp = F V
    for i in range(m):
        for l in range(m):
            s = 0.0
            for q in range(m):
                s += F[i, q] * V[q, l]
            tmp[i, l] = s
    # V_out = F V F', symmetrized
    for i in range(m):
        for l in range(i, m):
            a = 0.0
            b = 0.0
            for q in range(m):
                a += tmp[i, q] * F[l, q]
                b += tmp[l, q] * F[i, q]
            v = 0.5 * a + 0.5 * b + GQGt[i, l]
            V_out[i, l] = v
            V_out[l, i] = v


@numba.njit(cache=True)
def _innovation(H, R, yn, x, V, VHt, K):
    """Prediction error, its variance and the gain; fills VHt and K."""
    m = x.size
    r = R
    eps = yn
    for i in range(m):
        s = 0.0
        for l in range(m):
            s += V[i, l] * H[l]
        VHt[i] = s
    for i in range(m):
        r += H[i] * VHt[i]
        eps -= H[i] * x[i]
    if r > R_FLOOR:
        for i in range(m):
            K[i] = VHt[i] / r
    return eps, r


@numba.njit(cache=True)
def _correct(x, V, K, VHt, eps):
    """In-place filtered moments from the predicted ones."""
    m = x.size
    for i in range(m):
        x[i] += K[i] * eps
    for i in range(m):
        for l in range(i, m):
            v = 0.5 * (V[i, l] - K[i] * VHt[l]) + 0.5 * (V[l, i] - K[l] * VHt[i])
            V[i, l] = v
            V[l, i] = v


@numba.njit(cache=True)
def filter_pass(F, GQGt, H, R, x0, V0, y, eps_out, r_out, gain_out):
    m = x0.size
    x = x0.copy()
    V = V0.copy()
    xp = np.empty(m)
    Vp = np.empty((m, m))
    tmp = np.empty((m, m))
    VHt = np.empty(m)
    for n in range(y.size):
        _predict(F, GQGt, x, V, xp, Vp, tmp)
        eps, r = _innovation(H, R, y[n], xp, Vp, VHt, gain_out[n])
        eps_out[n] = eps
        r_out[n] = r
        if not r > R_FLOOR:
            return n
        _correct(xp, Vp, gain_out[n], VHt, eps)
        x, xp = xp, x
        V, Vp = Vp, V
    return -1


@numba.njit(cache=True)
def grad_pass(F, GQGt, H, R, dF, dGQGt, dH, dR, x0, V0, dx0, dV0, y,
              eps_out, r_out, gain_out, deps_out, dr_out):
    m = x0.size
    p = dF.shape[0]
    x = x0.copy()
    V = V0.copy()
    dx = dx0.copy()
    dV = dV0.copy()
    xp = np.empty(m)
    Vp = np.empty((m, m))
    dxp = np.empty((p, m))
    dVp = np.empty((p, m, m))
    tmp = np.empty((m, m))
    VFt = np.empty((m, m))
    VHt = np.empty(m)
    W = np.empty(m)
    VdHt = np.empty(m)
    dK = np.empty(m)
    for n in range(y.size):
        # derivative prediction uses the filtered moments of the previous step
        for i in range(m):
            for l in range(m):
                s = 0.0
                for q in range(m):
                    s += V[i, q] * F[l, q]
                VFt[i, l] = s
        for j in range(p):
            for i in range(m):
                s = 0.0
                for l in range(m):
                    s += F[i, l] * dx[j, l] + dF[j, i, l] * x[l]
                dxp[j, i] = s
            for i in range(m):
                for l in range(m):
                    s = 0.0
                    for q in range(m):
                        s += F[i, q] * dV[j, q, l]
                    tmp[i, l] = s
            for i in range(m):
                for l in range(i, m):
                    a = 0.0
                    b = 0.0
                    c = 0.0
                    e = 0.0
                    for q in range(m):
                        a += tmp[i, q] * F[l, q]
                        b += tmp[l, q] * F[i, q]
                        c += dF[j, i, q] * VFt[q, l]
                        e += dF[j, l, q] * VFt[q, i]
                    v = 0.5 * a + 0.5 * b + c + e + dGQGt[j, i, l]
                    dVp[j, i, l] = v
                    dVp[j, l, i] = v
        _predict(F, GQGt, x, V, xp, Vp, tmp)

        eps, r = _innovation(H, R, y[n], xp, Vp, VHt, gain_out[n])
        eps_out[n] = eps
        r_out[n] = r
        if not r > R_FLOOR:
            return n
        K = gain_out[n]
        for j in range(p):
            de = 0.0
            for i in range(m):
                de -= H[i] * dxp[j, i] + dH[j, i] * xp[i]
            drj = dR[j]
            for i in range(m):
                s1 = 0.0
                s2 = 0.0
                for l in range(m):
                    s1 += dVp[j, i, l] * H[l]
                    s2 += Vp[i, l] * dH[j, l]
                VdHt[i] = s2
                W[i] = s1 + s2
            for i in range(m):
                drj += W[i] * H[i] + VdHt[i] * H[i]
            for i in range(m):
                dK[i] = W[i] / r - drj * (VHt[i] / (r * r))
                dxp[j, i] += de * K[i] + dK[i] * eps
            for i in range(m):
                for l in range(i, m):
                    v = 0.5 * (dVp[j, i, l] - dK[i] * VHt[l] - K[i] * W[l]) + 0.5 * (
                        dVp[j, l, i] - dK[l] * VHt[i] - K[l] * W[i]
                    )
                    dVp[j, i, l] = v
                    dVp[j, l, i] = v
            deps_out[n, j] = de
            dr_out[n, j] = drj
        _correct(xp, Vp, K, VHt, eps)
        x, xp = xp, x
        V, Vp = Vp, V
        dx, dxp = dxp, dx
        dV, dVp = dVp, dV
    return -1
