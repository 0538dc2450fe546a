"""Compare the analytic gradient with central differences.

Uses the seasonal model with a transformed AR(2) component, the largest
model in the package, at a point away from the optimum.
"""
import numpy as np

from ssmgrad import SeasonalModel, check_gradient, simulate

model = SeasonalModel(period=12, ar_order=2)
theta = np.array([-3.0, -4.0, -1.0, 0.0, 1.0, -0.5])
_, mm, ic = model.evaluate(theta)
y, _ = simulate(mm, ic, 155, np.random.default_rng(3))

probe = theta + np.random.default_rng(4).uniform(-0.5, 0.5, theta.size)
print(f"{'parameter':12s} {'Numerical Difference':>24s} {'Gradient':>24s} digits")
for row in check_gradient(model, probe, y):
    print(f"{row.name:12s} {row.fd:24.17g} {row.analytic:24.17g} {row.digits:6d}")
