"""Filter passes per gradient: one gradient pass versus 2p differences.

Fits ARMA(5,3) (p = 8) both ways and prints the pass counts and timings.
"""
import time

import numpy as np

from ssmgrad import ArmaModel, OptimizerConfig, bfgs_maximize, simulate_arma, transform_arma_params

model = ArmaModel(5, 3)
a, b, _ = transform_arma_params(np.random.default_rng(9).uniform(-1.5, 1.5, 8), 5, 3)
y = simulate_arma(a, b, 1.0, 1000, np.random.default_rng(10))
cfg = OptimizerConfig(max_iter=40)

for method in ("auto", "fd"):
    start = time.perf_counter()
    res = bfgs_maximize(model, model.default_theta(), y, cfg, gradient=method)
    elapsed = time.perf_counter() - start
    print(f"{res.gradient_method:8s} {res.n_gradient_evals:3d} gradients, {res.n_filter_passes:4d} filter passes "
          f"({res.passes_per_gradient} per gradient), loglik {res.loglik:.6f}, {elapsed:.2f} s")
