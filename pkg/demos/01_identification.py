"""Population objectives on the two worked models.

In the first model the latent types agree on the sign of the treatment effect
and of the instrument's pull on take-up, so both identifying objectives pick the
oracle regime. In the second they disagree and both objectives choose the
wrong action.
"""
from pathlib import Path

from ivrules import (check_assumptions, load_model, population_argmax, population_cate,
                     population_delta, population_objective_id1, population_objective_id2,
                     regime_value)

HERE = Path(__file__).parent

for name in ("m1", "m2"):
    model = load_model(HERE / f"{name}.json")
    print(f"== {name} ==")
    print(f"  treatment effect {population_cate(model, 0):+.3f}, "
          f"instrument strength {population_delta(model, 0):+.3f}")
    for d in (1, -1):
        print(f"  d={d:+d}: value {regime_value(model, (d,)):.4f}  "
              f"id1 {population_objective_id1(model, (d,)):.4f}  "
              f"id2 {population_objective_id2(model, (d,)):.4f}")
    rep = check_assumptions(model).cells[0]
    print(f"  sign homogeneity holds: {rep.a_part_a_holds and rep.a_part_b_holds}, "
          f"cov {rep.assumption7_cov:+.4f}, var {rep.assumption8_var:.4f}")
    for objective in ("oracle", "id1", "id2"):
        print(f"  argmax[{objective}] = {population_argmax(model, objective)}")
