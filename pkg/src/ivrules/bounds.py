"""Sharp bounds on counterfactual means for binary outcomes.

Each cell is described by 16 response types: a compliance type (how ``A``
responds to ``Z``) crossed with an outcome type (the pair ``(Y_{+1}, Y_{-1})``).
The observed ``p(y, a | z)`` are linear in the type probabilities, so the
tightest bounds on ``theta_a = P(Y_a = 1 | l)`` are the optima of two small
LPs per arm. Cells partition the population, so regime-value bounds are the
cell-weighted sums of the per-cell bounds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import Infeasible, MissingArm, NonBinaryOutcome, ValidationError
from .lp import simplex
from .model import StructuralModel, as_regime
from .sampler import Dataset

SLICE_TOL = 1e-9

#: compliance types as (A_{z=+1}, A_{z=-1})
COMPLIANCE_TYPES = {
    "always_taker": (1, 1),
    "never_taker": (-1, -1),
    "complier": (1, -1),
    "defier": (-1, 1),
}
#: outcome types as (Y_{+1}, Y_{-1})
OUTCOME_TYPES = ((0, 0), (0, 1), (1, 0), (1, 1))


def _idx(v: int) -> int:
    return (v + 1) // 2


def response_types():
    """The 16 response types in column order: compliance-major, outcome-minor."""
    return [(c, r) for c in COMPLIANCE_TYPES.values() for r in OUTCOME_TYPES]


def observation_matrix() -> np.ndarray:
    """Map from type probabilities to observables, shape (8, 16).

    Row ``4*zi + 2*ai + y`` (``zi``, ``ai`` = 0 for -1, 1 for +1) is ``p(y, a | z)``.
    """
    M = np.zeros((8, 16))
    for j, ((a_plus, a_minus), (y_plus, y_minus)) in enumerate(response_types()):
        for z, a in ((1, a_plus), (-1, a_minus)):
            y = y_plus if a == 1 else y_minus
            M[4 * _idx(z) + 2 * _idx(a) + y, j] = 1.0
    return M


def theta_objective(arm: int) -> np.ndarray:
    """Indicator of types with ``Y_arm = 1``."""
    pos = 0 if arm == 1 else 1
    return np.array([float(r[pos] == 1) for _, r in response_types()])


_M = observation_matrix()
# per z-slice the four rows sum to the normalization row, so one row per slice
# is dropped: (y=0, a=-1) at z=+1 and at z=-1
_KEEP_ROWS = [r for r in range(8) if r % 4 != 0]


@dataclass(frozen=True, eq=False)
class CellObservables:
    """``p[zi, ai, y] = P(Y=y, A=a | Z=z, L=l)`` and the cell weight."""

    p: np.ndarray
    weight: float

    @classmethod
    def create(cls, p, weight=1.0):
        p = np.array(p, dtype=float).reshape(2, 2, 2)
        if np.any(p < -SLICE_TOL) or not np.all(np.isfinite(p)):
            raise ValidationError("probabilities must be finite and nonnegative", "observables.p")
        sums = p.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > SLICE_TOL):
            raise ValidationError(f"z-slices sum to {sums.tolist()}, not 1", "observables.p")
        p.setflags(write=False)
        return cls(p=p, weight=float(weight))

    def prob(self, y: int, a: int, z: int) -> float:
        return float(self.p[_idx(z), _idx(a), y])

    @property
    def vector(self) -> np.ndarray:
        """Observables in :func:`observation_matrix` row order."""
        return self.p.reshape(-1)

    @classmethod
    def from_types(cls, pi, weight=1.0):
        return cls.create(_M @ np.asarray(pi, dtype=float), weight)


def observables_from_model(model: StructuralModel) -> list:
    """Exact observables by enumeration over latent types."""
    out = []
    for l, c in enumerate(model.cells):
        p = np.zeros((2, 2, 2))
        for z in (-1, 1):
            for a in (-1, 1):
                p_a = c.q(z) if a == 1 else 1.0 - c.q(z)
                p1 = float(np.dot(c.u_probs, p_a * c.m(a)))
                p0 = float(np.dot(c.u_probs, p_a * (1.0 - c.m(a))))
                p[_idx(z), _idx(a)] = (p0, p1)
        out.append(CellObservables.create(p, model.cell_probs[l]))
    return out


def observables_from_data(dataset: Dataset) -> list:
    """Empirical observables; requires binary outcomes and both instrument arms per cell."""
    y = dataset.y
    if not np.all((y == 0) | (y == 1)):
        bad = int(np.flatnonzero((y != 0) & (y != 1))[0])
        raise NonBinaryOutcome(f"row {bad} has y={y[bad]!r}", "dataset.y")
    K, n = dataset.cell_count, len(dataset)
    out = []
    yi = y.astype(np.int64)
    for l in range(K):
        rows = dataset.l == l
        p = np.zeros((2, 2, 2))
        for z in (-1, 1):
            sel = rows & (dataset.z == z)
            cnt = int(sel.sum())
            if cnt == 0:
                raise MissingArm(f"cell {l} has no rows with z={z}", [l])
            for a in (-1, 1):
                for yv in (0, 1):
                    p[_idx(z), _idx(a), yv] = np.count_nonzero(sel & (dataset.a == a) & (yi == yv)) / cnt
        out.append(CellObservables.create(p, rows.sum() / n))
    return out


def cell_observables_from(source) -> list:
    if isinstance(source, StructuralModel):
        return observables_from_model(source)
    if isinstance(source, Dataset):
        return observables_from_data(source)
    raise TypeError(f"expected StructuralModel or Dataset, got {type(source).__name__}")


@dataclass(frozen=True, eq=False)
class ResponseTypeLP:
    """Equality-form LP over the 16 type probabilities (7 rows: 6 observables + normalization)."""

    A_eq: np.ndarray
    b_eq: np.ndarray
    objective: np.ndarray

    @classmethod
    def for_cell(cls, cell: CellObservables, arm: int = 1) -> "ResponseTypeLP":
        A = np.vstack([_M[_KEEP_ROWS], np.ones(16)])
        b = np.append(cell.vector[_KEEP_ROWS], 1.0)
        return cls(A_eq=A, b_eq=b, objective=theta_objective(arm))


def solve_lp(lp: ResponseTypeLP, sense: str = "min") -> float:
    """Optimal value of ``lp.objective`` over the feasible type distributions."""
    if sense == "min":
        return simplex(lp.objective, lp.A_eq, lp.b_eq).value
    if sense == "max":
        return -simplex(-lp.objective, lp.A_eq, lp.b_eq).value
    raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")


def project_feasible(cell: CellObservables) -> CellObservables:
    """Nearest (L2) observables generated by some type distribution."""
    big = 1e4
    A = np.vstack([_M, big * np.ones(16)])
    b = np.append(cell.vector, big)
    pi, _ = nnls(A, b)
    pi = pi / pi.sum()
    return CellObservables.from_types(pi, cell.weight)


@dataclass(frozen=True)
class CellBounds:
    theta_plus: tuple
    theta_minus: tuple
    weight: float
    projected: bool = False

    def arm(self, a: int) -> tuple:
        return self.theta_plus if a == 1 else self.theta_minus


def _interval(lp_min, lp_max):
    lo = min(max(lp_min, 0.0), 1.0)
    hi = min(max(lp_max, 0.0), 1.0)
    return (lo, max(lo, hi))


def counterfactual_bounds(cell: CellObservables, strict: bool = False) -> CellBounds:
    """Sharp ``[lb, ub]`` for ``theta_{+1}`` and ``theta_{-1}`` of one cell.

    Observables inconsistent with the instrument model raise :class:`Infeasible`
    when ``strict``; otherwise they are first projected onto the feasible set
    and the result is flagged ``projected``.
    """
    projected = False
    try:
        out = [_interval(solve_lp(ResponseTypeLP.for_cell(cell, arm), "min"),
                         solve_lp(ResponseTypeLP.for_cell(cell, arm), "max")) for arm in (1, -1)]
    except Infeasible:
        if strict:
            raise
        cell = project_feasible(cell)
        projected = True
        out = [_interval(solve_lp(ResponseTypeLP.for_cell(cell, arm), "min"),
                         solve_lp(ResponseTypeLP.for_cell(cell, arm), "max")) for arm in (1, -1)]
    return CellBounds(theta_plus=out[0], theta_minus=out[1], weight=cell.weight, projected=projected)


def regime_value_bounds(cell_bounds, regime) -> tuple:
    """Bounds on ``E[Y_{D(L)}]``: weighted sums of the per-cell bounds at ``d(l)``."""
    cell_bounds = list(cell_bounds)
    d = as_regime(regime, len(cell_bounds))
    lb = sum(cb.weight * cb.arm(a)[0] for cb, a in zip(cell_bounds, d))
    ub = sum(cb.weight * cb.arm(a)[1] for cb, a in zip(cell_bounds, d))
    return (float(lb), float(ub))


def maximin_regime(cell_bounds) -> tuple:
    """Per cell, the arm with the larger lower bound (ties go to -1)."""
    return tuple(1 if cb.theta_plus[0] > cb.theta_minus[0] else -1 for cb in cell_bounds)


@dataclass(frozen=True)
class BoundsResult:
    cells: tuple
    maximin: tuple
    regime_bounds: dict = field(default_factory=dict)
    diagnostics: tuple = ()

    def to_dict(self) -> dict:
        return {
            "cells": [
                {"cell": l, "weight": cb.weight, "theta_plus": list(cb.theta_plus),
                 "theta_minus": list(cb.theta_minus), "projected": cb.projected}
                for l, cb in enumerate(self.cells)
            ],
            "maximin_regime": list(self.maximin),
            "regimes": [
                {"regime": list(r), "value_bounds": list(v)} for r, v in self.regime_bounds.items()
            ],
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def compute_bounds(source, regimes=None, strict: bool = False) -> BoundsResult:
    """Bounds for every cell of a model or dataset.

    ``regimes`` defaults to the maximin regime plus the two constant regimes.
    """
    cells = cell_observables_from(source)
    cb = tuple(counterfactual_bounds(c, strict=strict) for c in cells)
    mm = maximin_regime(cb)
    K = len(cb)
    if regimes is None:
        regimes = [mm, (1,) * K, (-1,) * K]
    rb = {}
    for r in regimes:
        r = as_regime(r, K)
        rb[r] = regime_value_bounds(cb, r)
    diags = tuple(f"cell {l}: observables violate the instrument model; projected"
                  for l, c in enumerate(cb) if c.projected)
    return BoundsResult(cells=cb, maximin=mm, regime_bounds=rb, diagnostics=diags)

