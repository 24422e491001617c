"""How much asymmetry? Reading the power-ratio curve.

For each lambda on a grid, we form the optimal predictors and split the
residuals (predictor minus observed) into over- and under-predictions. The
power ratio combines the share of each side with its RMSE; as lambda grows
more negative (LINEX) or larger (PDL), predictions move up and the balance
shifts toward over-prediction. Elbows in the curve are natural stopping
points: beyond them extra asymmetry buys little.

Run with ``python3 demos/02_choosing_asymmetry.py``.
"""
import numpy as np

from carloss import PriorSpec, SamplerConfig, power_ratio, run_chain, sweep
from carloss.asymmetry import parse_grid
from carloss.datasets import synthetic_counties

ds, graph, _ = synthetic_counties()
draws = run_chain(ds, graph, PriorSpec(), SamplerConfig(seed=7))

base = power_ratio(draws.fitted.mean(axis=0) - ds.z)
print(f"posterior mean: {base.r_plus:.2f} over-predicted, {base.r_minus:.2f} under, "
      f"psi = {base.psi:.4f}\n")

for family, grid in (("linex", None), ("pdl", parse_grid("1:60:1"))):
    curve = sweep(draws, family=family, lambda_grid=grid)
    print(f"{family}: {curve.lambda_grid.size} grid points, elbows at "
          f"{np.round(curve.elbow_lambdas, 3).tolist() or 'none'}")
    for k in np.linspace(0, curve.lambda_grid.size - 1, 6).astype(int):
        print(f"  lambda {curve.lambda_grid[k]:7.2f}  R+ {curve.r_plus[k]:.2f}  "
              f"RMSE+ {curve.rmse_plus[k]:.4f}  RMSE- {curve.rmse_minus[k]:.4f}  "
              f"psi {curve.psi[k]:.4f}")
    if curve.skipped:
        print(f"  skipped: {[lam for lam, _ in curve.skipped]}")
    print()
