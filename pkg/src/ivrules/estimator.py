"""Sample analogues of the two weighted objectives and their maximizing regime.

Both objectives are sums of per-row weights that depend on the regime only
through ``d(l_i)``, so they separate over cells and the argmax is found cell
by cell. The objective values rank regimes. They are **not** estimates of the
welfare ``E[Y_{D(L)}]``; use :mod:`ivrules.bounds` for welfare.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingArm, ValidationError, WeakInstrument
from .model import as_regime, prefers_plus
from .sampler import Dataset

WEAK_TOL = 1e-9
DEFAULT_MIN_ARM_COUNT = 5


@dataclass(frozen=True, eq=False)
class PluginEstimates:
    """Saturated frequency estimates of the nuisances, one entry per cell.

    ``usable[l]`` is False when an instrument arm of cell ``l`` has fewer than
    ``min_arm_count`` rows or when ``|delta_hat[l]| < 1e-9``.
    """

    count: np.ndarray
    count_plus: np.ndarray
    count_minus: np.ndarray
    p_treat_plus: np.ndarray
    p_treat_minus: np.ndarray
    delta_hat: np.ndarray
    f_hat_plus: np.ndarray
    small_arm: np.ndarray
    weak: np.ndarray
    min_arm_count: int
    delta_supplied: bool = False

    @property
    def n_cells(self) -> int:
        return self.count.size

    @property
    def usable(self) -> np.ndarray:
        return ~(self.small_arm | self.weak)

    def f_hat(self, z: int) -> np.ndarray:
        """Estimated ``f(z|l)`` for every cell."""
        return self.f_hat_plus if z == 1 else 1.0 - self.f_hat_plus

    def to_dict(self) -> dict:
        return {
            "count": self.count.tolist(),
            "count_plus": self.count_plus.tolist(),
            "count_minus": self.count_minus.tolist(),
            "p_treat_plus": self.p_treat_plus.tolist(),
            "p_treat_minus": self.p_treat_minus.tolist(),
            "delta_hat": self.delta_hat.tolist(),
            "f_hat_plus": self.f_hat_plus.tolist(),
            "usable": self.usable.tolist(),
        }


def fit_nuisances(dataset: Dataset, min_arm_count: int = DEFAULT_MIN_ARM_COUNT,
                  strict: bool = False, delta=None) -> PluginEstimates:
    """Frequency plug-ins for ``delta(l)`` and ``f(Z|l)``.

    Parameters
    ----------
    dataset : Dataset
    min_arm_count : int
        Cells with fewer rows than this in either instrument arm are unusable.
    strict : bool
        Raise :class:`MissingArm` when a cell has no rows in some arm.
    delta : sequence of float, optional
        Known instrument strength per cell (e.g. an aggregate compliance rate).
        When given, the treatment column is never read.
    """
    if min_arm_count < 1:
        raise ValueError("min_arm_count must be at least 1")
    K = dataset.cell_count
    plus = dataset.z == 1
    count = np.bincount(dataset.l, minlength=K)
    count_plus = np.bincount(dataset.l, weights=plus, minlength=K).astype(np.int64)
    count_minus = count - count_plus

    empty = (count_plus == 0) | (count_minus == 0)
    if strict and empty.any():
        cells = np.flatnonzero(empty).tolist()
        raise MissingArm(f"cells {cells} have an empty instrument arm", cells)

    with np.errstate(invalid="ignore", divide="ignore"):
        f_plus = np.where(count > 0, count_plus / np.maximum(count, 1), np.nan)
        if delta is None:
            treated = dataset.a == 1
            t_plus = np.bincount(dataset.l, weights=treated & plus, minlength=K)
            t_minus = np.bincount(dataset.l, weights=treated & ~plus, minlength=K)
            p_plus = np.where(count_plus > 0, t_plus / np.maximum(count_plus, 1), np.nan)
            p_minus = np.where(count_minus > 0, t_minus / np.maximum(count_minus, 1), np.nan)
            delta_hat = p_plus - p_minus
        else:
            delta_hat = np.array(delta, dtype=float)
            if delta_hat.shape != (K,):
                raise ValidationError(f"expected {K} values", "delta")
            p_plus = np.full(K, np.nan)
            p_minus = np.full(K, np.nan)

    small = (count_plus < min_arm_count) | (count_minus < min_arm_count)
    weak = ~small & ~(np.abs(delta_hat) >= WEAK_TOL)
    return PluginEstimates(
        count=count, count_plus=count_plus, count_minus=count_minus,
        p_treat_plus=p_plus, p_treat_minus=p_minus, delta_hat=delta_hat,
        f_hat_plus=f_plus, small_arm=small, weak=weak,
        min_arm_count=int(min_arm_count), delta_supplied=delta is not None,
    )


def _check_usable(estimates, drop_unusable):
    if drop_unusable:
        return estimates.usable
    if estimates.small_arm.any():
        cells = np.flatnonzero(estimates.small_arm).tolist()
        raise MissingArm(
            f"cells {cells} have an instrument arm with fewer than "
            f"{estimates.min_arm_count} rows", cells)
    if estimates.weak.any():
        cells = np.flatnonzero(estimates.weak).tolist()
        raise WeakInstrument(f"|delta_hat| < {WEAK_TOL:g} in cells {cells}", cells)
    return estimates.usable


def _row_weights(dataset, estimates, objective, d, drop_unusable):
    # per-row summand of the objective when every cell takes action d (array of +-1 per row)
    usable = _check_usable(estimates, drop_unusable)
    if estimates.n_cells != dataset.cell_count:
        raise ValidationError("estimates and dataset disagree on the cell count", "estimates")
    l, z = dataset.l, dataset.z
    keep = usable[l]
    f = np.where(z == 1, estimates.f_hat_plus[l], 1.0 - estimates.f_hat_plus[l])
    denom = np.where(keep, estimates.delta_hat[l] * f, 1.0)
    if objective == "id1":
        a = dataset.a
        num = z * (a == d) * dataset.y * a
    elif objective == "id2":
        # treatment column deliberately unused
        num = (z == d) * dataset.y
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return np.where(keep, num / denom, 0.0)


def _sample_objective(dataset, estimates, regime, objective, drop_unusable):
    d = np.array(as_regime(regime, dataset.cell_count))
    w = _row_weights(dataset, estimates, objective, d[dataset.l], drop_unusable)
    return float(w.sum() / len(dataset))


def sample_objective_id1(dataset: Dataset, estimates: PluginEstimates, regime,
                         drop_unusable: bool = False) -> float:
    """``n^-1 sum_i z_i 1{a_i = d(l_i)} y_i a_i / (delta_hat(l_i) f_hat(z_i|l_i))``."""
    return _sample_objective(dataset, estimates, regime, "id1", drop_unusable)


def sample_objective_id2(dataset: Dataset, estimates: PluginEstimates, regime,
                         drop_unusable: bool = False) -> float:
    """``n^-1 sum_i 1{z_i = d(l_i)} y_i / (delta_hat(l_i) f_hat(z_i|l_i))``.

    Reads only ``l``, ``z`` and ``y``; with ``estimates`` held fixed the result
    does not depend on the treatment column.
    """
    return _sample_objective(dataset, estimates, regime, "id2", drop_unusable)


def sample_objective(dataset, estimates, regime, objective, drop_unusable=False) -> float:
    return _sample_objective(dataset, estimates, regime, objective, drop_unusable)


@dataclass(frozen=True)
class CellContrast:
    cell: int
    usable: bool
    term_plus: float
    term_minus: float
    action: int
    delta_hat: float
    f_hat_plus: float


@dataclass(frozen=True)
class RegimeFit:
    """Maximizing regime of a sample objective.

    ``objective_value`` ranks regimes only; it does not estimate welfare.
    """

    regime: tuple
    objective: str
    objective_value: float
    per_cell: tuple
    diagnostics: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "regime": list(self.regime),
            "objective": self.objective_value,
            "objective_name": self.objective,
            "per_cell": [dict(vars(c)) for c in self.per_cell],
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(_json_safe(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _json_safe(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def argmax_regime(dataset: Dataset, estimates: PluginEstimates, objective: str = "id1",
                  strict: bool = False) -> RegimeFit:
    """Cell-by-cell maximizer of the chosen sample objective (ties go to -1).

    In lenient mode unusable cells are excluded from the objective and get
    action -1; each exclusion is recorded in ``diagnostics``.
    """
    drop = not strict
    usable = _check_usable(estimates, drop)
    K = dataset.cell_count
    ones = np.ones(len(dataset), dtype=np.int64)
    w_plus = _row_weights(dataset, estimates, objective, ones, drop)
    w_minus = _row_weights(dataset, estimates, objective, -ones, drop)
    t_plus = np.bincount(dataset.l, weights=w_plus, minlength=K) / len(dataset)
    t_minus = np.bincount(dataset.l, weights=w_minus, minlength=K) / len(dataset)
    regime = tuple(1 if (usable[l] and prefers_plus(t_plus[l], t_minus[l])) else -1 for l in range(K))

    diagnostics = []
    for l in range(K):
        if estimates.small_arm[l]:
            diagnostics.append(
                f"cell {l}: dropped, instrument arm counts ({int(estimates.count_plus[l])}, "
                f"{int(estimates.count_minus[l])}) below {estimates.min_arm_count}")
        elif estimates.weak[l]:
            diagnostics.append(f"cell {l}: dropped, weak instrument (delta_hat={estimates.delta_hat[l]:.3g})")
    per_cell = tuple(
        CellContrast(cell=l, usable=bool(usable[l]), term_plus=float(t_plus[l]),
                     term_minus=float(t_minus[l]), action=regime[l],
                     delta_hat=float(estimates.delta_hat[l]),
                     f_hat_plus=float(estimates.f_hat_plus[l]))
        for l in range(K))
    value = _sample_objective(dataset, estimates, regime, objective, drop)
    return RegimeFit(regime=regime, objective=objective, objective_value=value,
                     per_cell=per_cell, diagnostics=tuple(diagnostics))
