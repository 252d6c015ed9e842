"""Structural model over finite covariate cells and its exact population quantities.

A model fixes, for every covariate cell ``l``, a finite latent confounder ``U``
and the conditional surfaces

* ``m_plus[u]  = E[Y_{+1} | l, u]``,  ``m_minus[u] = E[Y_{-1} | l, u]``
* ``q_plus[u]  = P(A=1 | Z=+1, l, u)``, ``q_minus[u] = P(A=1 | Z=-1, l, u)``
* ``pi_z = P(Z=+1 | l)``, drawn independently of ``U`` (causal instrument).

Everything in this module is computed by exact enumeration over
``(l, u, z, a)``. No sampling happens here.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError, WeakInstrument

#: default tolerance for sign and zero checks
DEFAULT_TOL = 1e-9
#: |delta(l)| below this makes the weighted objectives undefined
RELEVANCE_TOL = 1e-12
# contrasts within this relative distance are rounding noise and count as ties
TIE_RTOL = 1e-12
_SUM_TOL = 1e-12

OBJECTIVES = ("id1", "id2", "oracle")


def _frozen(values, path, *, lo=0.0, hi=1.0):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError("expected a flat list of numbers", path)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("non-finite entry", path)
    bad = np.flatnonzero((arr < lo) | (arr > hi))
    if bad.size:
        raise ValidationError(f"entry {arr[bad[0]]!r} outside [{lo}, {hi}]", f"{path}[{bad[0]}]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CellSpec:
    """Latent-type distribution and conditional surfaces of one covariate cell."""

    u_probs: np.ndarray
    m_plus: np.ndarray
    m_minus: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    pi_z: float

    @classmethod
    def create(cls, u_probs, m_plus, m_minus, q_plus, q_minus, pi_z, path="cell"):
        up = _frozen(u_probs, f"{path}.u_probs")
        if up.size < 1:
            raise ValidationError("at least one latent type required", f"{path}.u_probs")
        if abs(up.sum() - 1.0) > _SUM_TOL:
            raise ValidationError(f"probabilities sum to {up.sum()!r}, not 1", f"{path}.u_probs")
        fields = {}
        for name, values in (("m_plus", m_plus), ("m_minus", m_minus),
                             ("q_plus", q_plus), ("q_minus", q_minus)):
            arr = _frozen(values, f"{path}.{name}")
            if arr.size != up.size:
                raise ValidationError(
                    f"length {arr.size} does not match u_probs length {up.size}", f"{path}.{name}")
            fields[name] = arr
        try:
            pz = float(pi_z)
        except (TypeError, ValueError):
            raise ValidationError("must be a number", f"{path}.pi_z") from None
        if not (0.0 < pz < 1.0):
            raise ValidationError(f"{pz!r} not strictly inside (0, 1)", f"{path}.pi_z")
        return cls(u_probs=up, pi_z=pz, **fields)

    @property
    def n_types(self) -> int:
        return self.u_probs.size

    @property
    def outcome_contrast(self) -> np.ndarray:
        """Per-type treatment effect E[Y_1 - Y_-1 | l, u]."""
        return self.m_plus - self.m_minus

    @property
    def takeup_contrast(self) -> np.ndarray:
        """Per-type instrument effect on take-up, P(A=1|Z=1,l,u) - P(A=1|Z=-1,l,u)."""
        return self.q_plus - self.q_minus

    def m(self, a: int) -> np.ndarray:
        return self.m_plus if a == 1 else self.m_minus

    def q(self, z: int) -> np.ndarray:
        return self.q_plus if z == 1 else self.q_minus

    def f_z(self, z: int) -> float:
        return self.pi_z if z == 1 else 1.0 - self.pi_z

    def to_dict(self) -> dict:
        return {
            "u_probs": self.u_probs.tolist(),
            "m_plus": self.m_plus.tolist(),
            "m_minus": self.m_minus.tolist(),
            "q_plus": self.q_plus.tolist(),
            "q_minus": self.q_minus.tolist(),
            "pi_z": self.pi_z,
        }


@dataclass(frozen=True, eq=False)
class StructuralModel:
    cells: tuple
    cell_probs: np.ndarray

    @classmethod
    def create(cls, cells: Sequence[CellSpec], cell_probs=None):
        cells = tuple(cells)
        if not cells:
            raise ValidationError("at least one cell required", "cells")
        for i, c in enumerate(cells):
            if not isinstance(c, CellSpec):
                raise ValidationError("expected a CellSpec", f"cells[{i}]")
        if cell_probs is None:
            cell_probs = np.full(len(cells), 1.0 / len(cells))
        probs = _frozen(cell_probs, "cell_probs")
        if probs.size != len(cells):
            raise ValidationError(
                f"length {probs.size} does not match number of cells {len(cells)}", "cell_probs")
        if abs(probs.sum() - 1.0) > _SUM_TOL:
            raise ValidationError(f"probabilities sum to {probs.sum()!r}, not 1", "cell_probs")
        return cls(cells=cells, cell_probs=probs)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell(self, l: int) -> CellSpec:
        if not (isinstance(l, (int, np.integer)) and 0 <= l < len(self.cells)):
            raise ValidationError(f"cell id {l!r} out of range [0, {len(self.cells)})", "l")
        return self.cells[int(l)]

    def to_dict(self) -> dict:
        return {"cells": [c.to_dict() for c in self.cells], "cell_probs": self.cell_probs.tolist()}

    @classmethod
    def from_dict(cls, doc) -> "StructuralModel":
        if not isinstance(doc, dict):
            raise ValidationError("model document must be a JSON object", "$")
        if "cells" not in doc or not isinstance(doc["cells"], list):
            raise ValidationError("missing list", "cells")
        cells = []
        for i, c in enumerate(doc["cells"]):
            path = f"cells[{i}]"
            if not isinstance(c, dict):
                raise ValidationError("expected an object", path)
            for key in ("u_probs", "m_plus", "m_minus", "q_plus", "q_minus", "pi_z"):
                if key not in c:
                    raise ValidationError("missing field", f"{path}.{key}")
            try:
                cells.append(CellSpec.create(path=path, **{k: c[k] for k in (
                    "u_probs", "m_plus", "m_minus", "q_plus", "q_minus", "pi_z")}))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ValidationError):
                    raise
                raise ValidationError(str(exc), path) from None
        if "cell_probs" not in doc:
            raise ValidationError("missing list", "cell_probs")
        try:
            return cls.create(cells, doc["cell_probs"])
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(str(exc), "cell_probs") from None


def load_model(path) -> StructuralModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("file not found", str(path)) from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON ({exc.msg}, line {exc.lineno})", str(path)) from None
    return StructuralModel.from_dict(doc)


def save_model(model: StructuralModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n", encoding="utf-8")


# --- regimes ---------------------------------------------------------------

def as_regime(actions, n_cells: int | None = None) -> tuple:
    """Validate a regime and return it as a tuple of ints in {-1, +1}."""
    out = []
    for i, a in enumerate(actions):
        if a not in (-1, 1):
            raise ValidationError(f"action {a!r} not in {{-1, +1}}", f"regime[{i}]")
        out.append(int(a))
    if n_cells is not None and len(out) != n_cells:
        raise ValidationError(f"length {len(out)} does not match cell count {n_cells}", "regime")
    return tuple(out)


def all_regimes(n_cells: int):
    """Iterate over all 2**K regimes in lexicographic order (-1 before +1)."""
    return itertools.product((-1, 1), repeat=n_cells)


# --- population quantities ---------------------------------------------------

def population_cate(model: StructuralModel, l: int) -> float:
    """Conditional ATE ``E[Y_1 - Y_-1 | L=l]``."""
    c = model.cell(l)
    return float(np.dot(c.u_probs, c.outcome_contrast))


def population_delta(model: StructuralModel, l: int) -> float:
    """Instrument strength ``P(A=1|Z=1,l) - P(A=1|Z=-1,l)``."""
    c = model.cell(l)
    return float(np.dot(c.u_probs, c.takeup_contrast))


def theta(model: StructuralModel, l: int, a: int) -> float:
    """Counterfactual mean ``E[Y_a | L=l]``."""
    c = model.cell(l)
    return float(np.dot(c.u_probs, c.m(a)))


def regime_value(model: StructuralModel, regime) -> float:
    """Welfare ``E[Y_{D(L)}]`` of a deterministic regime."""
    d = as_regime(regime, model.n_cells)
    return float(sum(p * theta(model, l, d[l]) for l, p in enumerate(model.cell_probs)))


def _require_relevance(model):
    deltas = np.array([population_delta(model, l) for l in range(model.n_cells)])
    weak = np.flatnonzero(np.abs(deltas) < RELEVANCE_TOL)
    if weak.size:
        raise WeakInstrument(f"|delta(l)| < {RELEVANCE_TOL:g} in cells {weak.tolist()}", weak)
    return deltas


def _cell_term(cell: CellSpec, delta: float, d: int, objective: str) -> float:
    # E[weight * Y | L=l] by enumeration over (u, z, a); Y replaced by m_a(l, u).
    total = 0.0
    for z in (-1, 1):
        fz = cell.f_z(z)
        for a in (-1, 1):
            p_a = cell.q(z) if a == 1 else 1.0 - cell.q(z)
            mass = fz * cell.u_probs * p_a * cell.m(a)
            if objective == "id1":
                w = z * (a == d) * a / (delta * fz)
            else:
                w = (z == d) / (delta * fz)
            total += w * float(mass.sum())
    return total


def cell_objective_terms(model: StructuralModel, objective: str):
    """Per-cell conditional objective ``E[weight*Y | L=l]`` under d(l)=+1 and d(l)=-1.

    Returns an array of shape (K, 2); column 0 is d=-1, column 1 is d=+1.
    """
    if objective not in ("id1", "id2"):
        raise ValueError(f"unknown objective {objective!r}")
    deltas = _require_relevance(model)
    out = np.empty((model.n_cells, 2))
    for l, cell in enumerate(model.cells):
        out[l, 0] = _cell_term(cell, deltas[l], -1, objective)
        out[l, 1] = _cell_term(cell, deltas[l], 1, objective)
    return out


def _population_objective(model, regime, objective):
    d = as_regime(regime, model.n_cells)
    terms = cell_objective_terms(model, objective)
    return float(sum(p * terms[l, (d[l] + 1) // 2] for l, p in enumerate(model.cell_probs)))


def population_objective_id1(model: StructuralModel, regime) -> float:
    """Exact value of ``E[Z 1{A=D(L)} Y A / (delta(L) f(Z|L))]``.

    This ranks regimes; it is not their welfare.
    """
    return _population_objective(model, regime, "id1")


def population_objective_id2(model: StructuralModel, regime) -> float:
    """Exact value of ``E[1{Z=D(L)} Y / (delta(L) f(Z|L))]``."""
    return _population_objective(model, regime, "id2")


def population_argmax(model: StructuralModel, objective: str = "oracle") -> tuple:
    """Population-optimal regime under ``objective`` (ties resolve to -1)."""
    if objective == "oracle":
        return tuple(1 if population_cate(model, l) > 0 else -1 for l in range(model.n_cells))
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    terms = cell_objective_terms(model, objective)
    return tuple(1 if prefers_plus(t[1], t[0]) else -1 for t in terms)


def prefers_plus(term_plus: float, term_minus: float) -> bool:
    """True when ``term_plus`` beats ``term_minus`` by more than rounding noise."""
    return term_plus - term_minus > TIE_RTOL * max(abs(term_plus), abs(term_minus))


# --- assumption diagnostics ---------------------------------------------------

@dataclass(frozen=True)
class CellAssumptions:
    delta_l: float
    Delta_l: float
    a_part_a_holds: bool
    a_part_b_holds: bool
    assumption7_cov: float
    assumption8_var: float


@dataclass(frozen=True)
class AssumptionReport:
    cells: tuple
    tol: float

    @property
    def assumption_a_holds(self) -> bool:
        return all(c.a_part_a_holds and c.a_part_b_holds for c in self.cells)

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "assumption_a_holds": self.assumption_a_holds,
            "cells": [dict(vars(c)) for c in self.cells],
        }


def _weak_sign_agree(x, w, tol):
    x = x[w > 0]
    return bool(np.all(x >= -tol) or np.all(x <= tol))


def weighted_cov(w, x, y) -> float:
    mx, my = np.dot(w, x), np.dot(w, y)
    return float(np.dot(w, (x - mx) * (y - my)))


def check_assumptions(model: StructuralModel, tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Per-cell diagnostics for sign homogeneity (A(a), A(b)) and the covariance conditions.

    Latent types with zero probability are ignored by the sign checks.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rows = []
    for l, c in enumerate(model.cells):
        g, k = c.outcome_contrast, c.takeup_contrast
        rows.append(CellAssumptions(
            delta_l=population_delta(model, l),
            Delta_l=population_cate(model, l),
            a_part_a_holds=_weak_sign_agree(g, c.u_probs, tol),
            a_part_b_holds=_weak_sign_agree(k, c.u_probs, tol),
            assumption7_cov=weighted_cov(c.u_probs, g, k),
            assumption8_var=weighted_cov(c.u_probs, k, k),
        ))
    return AssumptionReport(cells=tuple(rows), tol=tol)
