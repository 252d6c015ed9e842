"""Plug-in estimation from simulated data and its regret over replications."""
from pathlib import Path

from ivrules import argmax_regime, fit_nuisances, load_model, regret_experiment, sample

HERE = Path(__file__).parent
model = load_model(HERE / "m1.json")

data = sample(model, 50_000, seed=7)
est = fit_nuisances(data)
print(f"delta_hat = {est.delta_hat[0]:.4f}  (truth 0.4)")
for objective in ("id1", "id2"):
    fit = argmax_regime(data, est, objective)
    cell = fit.per_cell[0]
    print(f"{objective}: regime {fit.regime}, terms (+1) {cell.term_plus:.4f} (-1) {cell.term_minus:.4f}")

for name in ("m1", "m2"):
    s = regret_experiment(load_model(HERE / f"{name}.json"), "id1", n=20_000, reps=40, master_seed=1,
                          threads=4)
    print(f"{name}: oracle {s.oracle_regime}, match rate {s.match_rate:.2f}, mean regret {s.mean:.4f}")
