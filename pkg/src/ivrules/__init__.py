"""Optimal individualized treatment regimes with an endogenous treatment and a binary instrument."""
from .analysis import (BinaryUSpec, EstimatorConfig, ExperimentConfig, RegretSummary,
                       binary_u_cov, binary_u_iff_check, misspecification_sweep, perturb,
                       regret_experiment)
from .bounds import (CellBounds, CellObservables, ResponseTypeLP, cell_observables_from,
                     compute_bounds, counterfactual_bounds, maximin_regime, regime_value_bounds,
                     solve_lp)
from .errors import (Infeasible, InvalidPerturbation, IVRulesError, MissingArm,
                     NonBinaryOutcome, ValidationError, WeakInstrument)
from .estimator import (PluginEstimates, RegimeFit, argmax_regime, fit_nuisances,
                        sample_objective_id1, sample_objective_id2)
from .model import (AssumptionReport, CellSpec, StructuralModel, check_assumptions, load_model,
                    population_argmax, population_cate, population_delta,
                    population_objective_id1, population_objective_id2, regime_value,
                    save_model)
from .sampler import Dataset, child_seed, read_csv, sample, write_csv

__version__ = "0.1.0"
