"""Binary-confounder covariance algebra, regret experiments and misspecification sweeps."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import compute_bounds
from .errors import InvalidPerturbation, IVRulesError, ValidationError
from .estimator import DEFAULT_MIN_ARM_COUNT, argmax_regime, fit_nuisances
from .model import (CellSpec, StructuralModel, check_assumptions, population_argmax,
                    regime_value, weighted_cov)
from .sampler import child_seed, sample

# --- binary latent type ----------------------------------------------------


@dataclass(frozen=True)
class BinaryUSpec:
    """Two latent types, ``P(U=u1) = p1``, with ``delta(u_k)`` and ``gamma(u_k)``."""

    p1: float
    delta1: float
    delta2: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if not (0.0 < self.p1 < 1.0):
            raise ValidationError(f"{self.p1!r} not strictly inside (0, 1)", "p1")


def binary_u_cov_definitional(spec: BinaryUSpec) -> float:
    """``E[delta*gamma] - E[delta] E[gamma]`` written out term by term."""
    p, q = spec.p1, 1.0 - spec.p1
    e_dg = p * spec.delta1 * spec.gamma1 + q * spec.delta2 * spec.gamma2
    return e_dg - (p * spec.delta1 + q * spec.delta2) * (p * spec.gamma1 + q * spec.gamma2)


def binary_u_cov(spec: BinaryUSpec, check: bool = True) -> float:
    """Covariance of ``delta(U)`` and ``gamma(U)`` in factorized form.

    ``p1 (1 - p1) (delta1 - delta2) (gamma1 - gamma2)``; with ``check`` the
    definitional expansion must agree to 1e-12 (relative to the squared scale
    of the inputs when that exceeds one).
    """
    p = spec.p1
    fact = p * (1.0 - p) * (spec.delta1 - spec.delta2) * (spec.gamma1 - spec.gamma2)
    if check:
        scale = max(1.0, abs(spec.delta1), abs(spec.delta2), abs(spec.gamma1), abs(spec.gamma2))
        direct = binary_u_cov_definitional(spec)
        if abs(fact - direct) > 1e-12 * scale * scale:
            raise ArithmeticError(f"factorized {fact!r} and definitional {direct!r} covariances disagree")
    return fact


def binary_u_iff_check(spec: BinaryUSpec, tol: float = 1e-12) -> bool:
    """Whether "covariance is zero" and "one of the functions is constant" agree.

    Zero covariance means ``|cov| < tol``. Constancy uses the smaller contrast
    against ``tol' = tol / (p1 (1-p1) * larger contrast)``, the threshold at
    which the product form crosses ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    cov = binary_u_cov(spec)
    dd = abs(spec.delta1 - spec.delta2)
    dg = abs(spec.gamma1 - spec.gamma2)
    denom = spec.p1 * (1.0 - spec.p1) * max(dd, dg)  # underflows to 0 for subnormal contrasts
    tol_c = math.inf if denom == 0 else tol / denom
    return (abs(cov) < tol) == (min(dd, dg) < tol_c)


# --- regret experiments ------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    min_arm_count: int = DEFAULT_MIN_ARM_COUNT
    strict: bool = False


@dataclass(frozen=True)
class Replication:
    r: int
    seed: int
    regime: tuple | None
    regret: float
    maximin_regime: tuple | None = None
    maximin_regret: float = math.nan
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class RegretSummary:
    objective: str
    oracle_regime: tuple
    replications: tuple
    mean: float
    median: float
    q90: float
    match_rate: float
    maximin_mean_regret: float = math.nan
    failures: int = 0

    @property
    def regrets(self) -> np.ndarray:
        return np.array([rep.regret for rep in self.replications if not rep.failed])

    def per_replication_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rep", "seed", "regime", "regret", "matched", "maximin_regret", "error"])
        for rep in self.replications:
            regime = "" if rep.regime is None else " ".join(str(a) for a in rep.regime)
            w.writerow([rep.r, rep.seed, regime, _fmt(rep.regret),
                        "" if rep.regime is None else _fmt(rep.regime == self.oracle_regime),
                        _fmt(rep.maximin_regret), rep.error or ""])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _one_replication(model, objective, n, master_seed, r, config, oracle_value, with_maximin):
    seed = child_seed(master_seed, r)
    try:
        data = sample(model, n, seed)
        est = fit_nuisances(data, config.min_arm_count, strict=config.strict)
        fit = argmax_regime(data, est, objective, strict=config.strict)
        regret = oracle_value - regime_value(model, fit.regime)
        mm, mm_regret = None, math.nan
        if with_maximin:
            mm = compute_bounds(data, regimes=(), strict=config.strict).maximin
            mm_regret = oracle_value - regime_value(model, mm)
        return Replication(r, seed, fit.regime, regret, mm, mm_regret)
    except IVRulesError as exc:
        return Replication(r, seed, None, math.nan, error=f"{type(exc).__name__}: {exc}")


def regret_experiment(model: StructuralModel, objective: str, n: int, reps: int,
                      master_seed: int, estimator_config: EstimatorConfig | None = None,
                      threads: int = 1, with_maximin: bool = False) -> RegretSummary:
    """Repeatedly simulate, fit a regime and measure its regret against the truth.

    Replication ``r`` uses ``child_seed(master_seed, r)``, so the summary does
    not depend on ``threads``. Estimator errors are recorded per replication
    and excluded from the aggregates.
    """
    if objective not in ("id1", "id2"):
        raise ValueError(f"unknown objective {objective!r}")
    if n < 1 or reps < 1:
        raise ValueError("n and reps must be positive")
    config = estimator_config or EstimatorConfig()
    oracle = population_argmax(model, "oracle")
    oracle_value = regime_value(model, oracle)

    def job(r):
        return _one_replication(model, objective, n, master_seed, r, config,
                                oracle_value, with_maximin)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = tuple(pool.map(job, range(reps)))
    else:
        results = tuple(job(r) for r in range(reps))

    ok = [rep for rep in results if not rep.failed]
    regrets = np.array([rep.regret for rep in ok])
    if ok:
        mean, median = float(regrets.mean()), float(np.median(regrets))
        q90 = float(np.quantile(regrets, 0.9))
        match = sum(rep.regime == oracle for rep in ok) / len(ok)
        mm = float(np.mean([rep.maximin_regret for rep in ok])) if with_maximin else math.nan
    else:
        mean = median = q90 = match = mm = math.nan
    return RegretSummary(objective=objective, oracle_regime=oracle, replications=results,
                         mean=mean, median=median, q90=q90, match_rate=match,
                         maximin_mean_regret=mm, failures=len(results) - len(ok))


# --- misspecification sweeps -------------------------------------------------

DIRECTIONS = ("violate_Aa", "violate_7", "violate_8")


def _standardized(w, x):
    # zero mean, unit variance under weights w; None when x is a.s. constant
    mean = float(np.dot(w, x))
    sd = math.sqrt(max(weighted_cov(w, x, x), 0.0))
    if sd <= 1e-12:
        return None
    return (x - mean) / sd


def _tilt(cell, s, t, path):
    if t == 0.0:
        return cell
    q_plus = cell.q_plus + 0.5 * t * s
    q_minus = cell.q_minus - 0.5 * t * s
    _check_unit(q_plus, f"{path}.q_plus")
    _check_unit(q_minus, f"{path}.q_minus")
    return CellSpec.create(cell.u_probs, cell.m_plus, cell.m_minus, q_plus, q_minus, cell.pi_z, path)


def _check_unit(x, path):
    bad = np.flatnonzero((x < 0.0) | (x > 1.0))
    if bad.size:
        raise InvalidPerturbation(f"value {x[bad[0]]!r} leaves [0, 1]", f"{path}[{bad[0]}]")


def perturb(model: StructuralModel, direction: str, eps: float) -> StructuralModel:
    """Move ``model`` away from an identifying assumption by ``eps``, in every cell.

    ``violate_Aa``
        ``m_plus`` of the second latent type is lowered by ``eps``.
    ``violate_7``
        The compliance contrast is tilted along the standardized outcome
        contrast so that its covariance with the outcome contrast grows by ``eps``.
    ``violate_8``
        The compliance contrast is tilted along the standardized latent-type
        index so that its variance grows by ``eps``.

    Tilts move ``q_plus`` and ``q_minus`` symmetrically along zero-mean
    directions, so ``delta(l)`` is unchanged. Probabilities leaving [0, 1]
    raise :class:`InvalidPerturbation`; nothing is clipped.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    eps = float(eps)
    if eps == 0.0:
        return model
    cells = []
    for l, c in enumerate(model.cells):
        path = f"cells[{l}]"
        if direction == "violate_Aa":
            if c.n_types < 2:
                raise InvalidPerturbation("needs at least two latent types", f"{path}.u_probs")
            m_plus = np.array(c.m_plus)
            m_plus[1] -= eps
            _check_unit(m_plus, f"{path}.m_plus")
            cells.append(CellSpec.create(c.u_probs, m_plus, c.m_minus, c.q_plus, c.q_minus,
                                         c.pi_z, path))
        elif direction == "violate_7":
            s = _standardized(c.u_probs, c.outcome_contrast)
            if s is None:
                raise InvalidPerturbation("outcome contrast is constant; covariance cannot move", path)
            # cov(g, k + t s) = cov(g, k) + t sd(g)
            sd_g = float(np.dot(c.u_probs, c.outcome_contrast * s))
            cells.append(_tilt(c, s, eps / sd_g, path))
        else:
            s = _standardized(c.u_probs, np.arange(c.n_types, dtype=float))
            if s is None:
                raise InvalidPerturbation("a single latent type carries all mass", path)
            # var(k + t s) = var(k) + 2 t C + t^2, C = cov(k, s); solve for the root at 0
            C = weighted_cov(c.u_probs, c.takeup_contrast, s)
            disc = C * C + eps
            if disc < 0:
                raise InvalidPerturbation(f"variance cannot decrease by {-eps!r}", path)
            t = math.sqrt(eps) if C == 0 else eps / (C + math.copysign(math.sqrt(disc), C))
            cells.append(_tilt(c, s, t, path))
    return StructuralModel.create(cells, model.cell_probs)


@dataclass(frozen=True)
class SweepRow:
    eps: float
    cov7: float
    var8: float
    Aa_holds: bool
    Ab_holds: bool
    match_rate: float
    mean_regret: float
    q90_regret: float
    maximin_regret: float
    failures: int = 0
    summary: RegretSummary | None = field(default=None, repr=False, compare=False)


SWEEP_COLUMNS = ("eps", "cov7", "var8", "Aa_holds", "Ab_holds", "match_rate",
                 "mean_regret", "q90_regret", "maximin_regret")


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str = "id1"
    n: int = 10_000
    reps: int = 100
    master_seed: int = 1
    estimator: EstimatorConfig = EstimatorConfig()
    threads: int = 1


def misspecification_sweep(base_model: StructuralModel, direction: str, eps_grid,
                           config: ExperimentConfig | None = None) -> list:
    """One :class:`SweepRow` per ``eps``.

    Every row uses the same master seed. Multi-cell models report the
    covariance with the largest magnitude and the largest variance over cells;
    the sign flags require the assumption in every cell.
    """
    eps_grid = list(eps_grid)
    if not eps_grid:
        raise ValueError("eps_grid must be nonempty")
    config = config or ExperimentConfig()
    rows = []
    for eps in eps_grid:
        model = perturb(base_model, direction, eps)
        report = check_assumptions(model)
        covs = [c.assumption7_cov for c in report.cells]
        summary = regret_experiment(model, config.objective, config.n, config.reps,
                                    config.master_seed, config.estimator, config.threads,
                                    with_maximin=True)
        rows.append(SweepRow(
            eps=float(eps),
            cov7=max(covs, key=abs),
            var8=max(c.assumption8_var for c in report.cells),
            Aa_holds=all(c.a_part_a_holds for c in report.cells),
            Ab_holds=all(c.a_part_b_holds for c in report.cells),
            match_rate=summary.match_rate,
            mean_regret=summary.mean,
            q90_regret=summary.q90,
            maximin_regret=summary.maximin_mean_regret,
            failures=summary.failures,
            summary=summary,
        ))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_fmt(getattr(row, c)) for c in SWEEP_COLUMNS])
    return buf.getvalue()
