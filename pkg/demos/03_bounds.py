"""Sharp bounds on counterfactual means without sign homogeneity, and the maximin regime."""
from pathlib import Path

from ivrules import compute_bounds, load_model, regime_value, sample

HERE = Path(__file__).parent

for name in ("m1", "m2"):
    model = load_model(HERE / f"{name}.json")
    res = compute_bounds(model)
    cell = res.cells[0]
    print(f"== {name} ==")
    print(f"  E[Y(+1)] in [{cell.theta_plus[0]:.3f}, {cell.theta_plus[1]:.3f}]  "
          f"truth {regime_value(model, (1,)):.3f}")
    print(f"  E[Y(-1)] in [{cell.theta_minus[0]:.3f}, {cell.theta_minus[1]:.3f}]  "
          f"truth {regime_value(model, (-1,)):.3f}")
    print(f"  maximin regime {res.maximin}")

# from data, sampling noise can push the observables outside the model; they are projected back
res = compute_bounds(sample(load_model(HERE / "m1.json"), 2_000, seed=3))
lo, hi = res.cells[0].theta_plus
print(f"from 2000 draws: E[Y(+1)] in [{lo:.3f}, {hi:.3f}], projected={res.cells[0].projected}")
