"""Analytic Hessian of the seasonal model against differences of the gradient."""
import numpy as np

from ssmgrad import SeasonalModel, fd_hessian, run_hessian_filter, simulate

model = SeasonalModel(period=12, ar_order=2)
theta = np.array([-3.0, -4.0, -1.0, 0.0, 1.0, -0.5])
_, mm, ic = model.evaluate(theta)
y, _ = simulate(mm, ic, 100, np.random.default_rng(5))

rep = run_hessian_filter(model, theta, y)
fd = fd_hessian(model, theta, y)
np.set_printoptions(precision=4, suppress=True, linewidth=120)
print(f"method: {rep.hessian_method}")
print(rep.hessian)
print(f"max |analytic - fd| / max |fd|: {np.max(np.abs(rep.hessian - fd)) / np.max(np.abs(fd)):.2e}")
print(f"asymmetry: {np.max(np.abs(rep.hessian - rep.hessian.T)):.1e}")
