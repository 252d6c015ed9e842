"""How regret grows as the identifying conditions are violated step by step.

The base model keeps the first worked model's outcomes but borrows the take-up
probabilities of the second. Lowering E[Y(+1)] for the second latent type by
0.4 then lands exactly on the second model, where the identifying objectives
pick the wrong action.
"""
from pathlib import Path

from ivrules import CellSpec, ExperimentConfig, StructuralModel, load_model, misspecification_sweep

HERE = Path(__file__).parent
outcomes = load_model(HERE / "m1.json").cells[0]
takeup = load_model(HERE / "m2.json").cells[0]
base = StructuralModel.create([CellSpec.create(outcomes.u_probs, outcomes.m_plus, outcomes.m_minus,
                                               takeup.q_plus, takeup.q_minus, outcomes.pi_z)])
config = ExperimentConfig(objective="id1", n=20_000, reps=40, master_seed=1, threads=4)

print(f"{'eps':>5} {'cov':>8} {'A(a)':>5} {'match':>6} {'regret':>8} {'maximin':>8}")
for row in misspecification_sweep(base, "violate_Aa", [0.0, 0.1, 0.2, 0.3, 0.4], config):
    print(f"{row.eps:5.2f} {row.cov7:+8.4f} {str(row.Aa_holds):>5} {row.match_rate:6.2f} "
          f"{row.mean_regret:8.4f} {row.maximin_regret:8.4f}")
