"""What does it cost to use the wrong loss?

Suppose the decision maker's real loss is one of several candidates but we
do not know which. For every (true loss, predictor) pair we compute each
region's relative risk: the posterior expected loss of the predictor, minus
that of the optimum, divided by the optimum's. The right predictor scores
exactly zero. A predictor whose relative risks are small and tightly spread
across regions is a robust default.

Run with ``python3 demos/03_risk_of_the_wrong_loss.py``.
"""
from carloss import (LossSpec, PriorSpec, SamplerConfig, predictor_table, risk_matrix,
                     run_chain, summarize)
from carloss.datasets import synthetic_counties

ds, graph, _ = synthetic_counties()
draws = run_chain(ds, graph, PriorSpec(), SamplerConfig(seed=11))

candidates = [LossSpec("squared_error"), LossSpec("linex", -0.6), LossSpec("linex", -1.1),
              LossSpec("pdl", 22.0), LossSpec("pdl", 38.0)]
tables = [predictor_table(draws, s) for s in candidates]
true_losses = [LossSpec("linex", -0.6), LossSpec("linex", -1.1), LossSpec("pdl", 22.0),
               LossSpec("pdl", 38.0)]

m = risk_matrix(draws, tables, true_losses)

print("IQR of relative risk across regions (rows: true loss, columns: predictor)\n")
print(f"{'':>14s}" + "".join(f"{lab:>16s}" for lab in m.predictor_labels))
for li, spec in enumerate(m.true_losses):
    print(f"{spec.label:>14s}" + "".join(f"{v:16.4g}" for v in m.iqr[li]))

print("\nBest non-optimal predictor for each true loss, by median relative risk:")
for spec in true_losses:
    rows = [r for r in summarize(m) if r.true_loss == spec and r.predictor != spec.label]
    best = min(rows, key=lambda r: r.median_rr)
    print(f"  {spec.label:>12s}: {best.predictor} (median rr {best.median_rr:.4g})")
