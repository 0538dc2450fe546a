"""Simulate an ARMA(2,1) series, fit it and report standard errors.

Standard errors of the AR and MA coefficients come from the observed
information in the transformed coordinates, carried over by the Jacobian
of the stationarity transform.
"""
import numpy as np

from ssmgrad import ArmaModel, bfgs_maximize, run_hessian_filter, simulate_arma

a, b = np.array([1.41, -0.68]), np.array([0.34])
y = simulate_arma(a, b, 1.0, 2000, np.random.default_rng(0))

model = ArmaModel(2, 1)
res = bfgs_maximize(model, model.default_theta(), y)
rep = run_hessian_filter(model, res.theta_hat, y)
J = model.jacobian(res.theta_hat)
cov = J @ np.linalg.inv(-rep.hessian) @ J.T
est_a, est_b = model.coefficients(res.theta_hat)
print(f"converged: {res.converged}, log-likelihood {res.loglik:.6f}, sigma2_hat {rep.sigma2_hat:.4f}")
for name, t, est, se in zip(["a1", "a2", "b1"], np.r_[a, b], np.r_[est_a, est_b], np.sqrt(np.diag(cov))):
    print(f"  {name}  truth {t:6.3f}  estimate {est:7.4f}  se {se:.4f}")
