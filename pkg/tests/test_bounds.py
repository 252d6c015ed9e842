import itertools

import numpy as np
import pytest

from conftest import make_m1
from oracles import random_model, vertex_bounds
from ivrules.bounds import (CellBounds, CellObservables, ResponseTypeLP, cell_observables_from,
                            compute_bounds, counterfactual_bounds, maximin_regime,
                            observation_matrix, project_feasible, regime_value_bounds, solve_lp)
from ivrules.errors import Infeasible, MissingArm, NonBinaryOutcome, ValidationError
from ivrules.model import CellSpec, StructuralModel, theta
from ivrules.sampler import Dataset, sample


def perfect_compliance(p_plus=0.7, p_minus=0.4):
    # p[zi, ai, y]: all mass at a = z
    return CellObservables.create([[[1 - p_minus, p_minus], [0, 0]],
                                   [[0, 0], [1 - p_plus, p_plus]]])


def always_takers(p=0.6):
    return CellObservables.create([[[0, 0], [1 - p, p]], [[0, 0], [1 - p, p]]])


def test_observation_matrix_structure():
    M = observation_matrix()
    # each type hits exactly one observable per instrument arm
    np.testing.assert_array_equal(M[:4].sum(axis=0), np.ones(16))
    np.testing.assert_array_equal(M[4:].sum(axis=0), np.ones(16))
    assert np.linalg.matrix_rank(np.vstack([M, np.ones(16)])) == 7


def test_lp_shape():
    lp = ResponseTypeLP.for_cell(perfect_compliance())
    assert lp.A_eq.shape == (7, 16) and lp.b_eq.shape == (7,)


def test_m1_observables():
    obs = cell_observables_from(make_m1())
    assert obs[0].prob(1, 1, 1) == pytest.approx(0.58, abs=1e-12)
    assert obs[0].weight == 1.0


def test_forced_treatment_observables():
    c = CellSpec.create([0.5, 0.5], [0.6, 0.2], [0.3, 0.1], [1, 1], [1, 1], 0.5)
    obs = cell_observables_from(StructuralModel.create([c]))[0]
    for z in (-1, 1):
        assert obs.prob(0, -1, z) == 0 and obs.prob(1, -1, z) == 0


def test_nonbinary_outcome_rejected():
    d = Dataset.from_columns([0, 0], [1, -1], [1, 1], [0.5, 1])
    with pytest.raises(NonBinaryOutcome):
        cell_observables_from(d)


def test_missing_arm_rejected():
    d = Dataset.from_columns([0, 0, 1], [1, -1, 1], [1, 1, 1], [1, 0, 1])
    with pytest.raises(MissingArm):
        cell_observables_from(d)


def test_observables_validation():
    with pytest.raises(ValidationError):
        CellObservables.create(np.full(8, 0.2))


def test_perfect_compliance_point_identified():
    b = counterfactual_bounds(perfect_compliance(0.7, 0.4))
    assert b.theta_plus == (0.7, 0.7)
    assert b.theta_minus == (0.4, 0.4)


def test_always_takers():
    b = counterfactual_bounds(always_takers(0.6))
    assert b.theta_plus == (0.6, 0.6)
    assert b.theta_minus == (0.0, 1.0)


def test_m1_bounds_contain_truth():
    b = counterfactual_bounds(cell_observables_from(make_m1())[0])
    assert b.theta_plus[0] <= 0.7 <= b.theta_plus[1]
    assert b.theta_minus[0] <= 0.4 <= b.theta_minus[1]
    lo, hi = regime_value_bounds([b], (1,))
    assert lo <= 0.7 <= hi


def test_solve_lp_senses():
    lp = ResponseTypeLP.for_cell(always_takers(0.6), arm=-1)
    assert solve_lp(lp, "min") == pytest.approx(0.0, abs=1e-12)
    assert solve_lp(lp, "max") == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        solve_lp(lp, "sideways")


def random_feasible_cell(rng):
    pi = rng.dirichlet(np.full(16, 0.5)) * (rng.random(16) < 0.7)
    if pi.sum() == 0:
        pi[0] = 1
    return CellObservables.from_types(pi / pi.sum())


def test_simplex_matches_vertex_enumeration(rng):
    for _ in range(150):
        cell = random_feasible_cell(rng)
        b = counterfactual_bounds(cell)
        ref = vertex_bounds(cell.vector)
        np.testing.assert_allclose(b.theta_plus, ref[1], atol=1e-9)
        np.testing.assert_allclose(b.theta_minus, ref[-1], atol=1e-9)


def test_bounds_contain_truth_random_models(rng):
    for _ in range(100):
        m = random_model(rng)
        res = compute_bounds(m, strict=True)
        for l, cb in enumerate(res.cells):
            for a in (1, -1):
                lo, hi = cb.arm(a)
                t = theta(m, l, a)
                assert lo - 1e-9 <= t <= hi + 1e-9
                assert 0 <= lo <= hi <= 1


def test_merging_cells_loosens_bounds(rng):
    for _ in range(50):
        c1, c2 = random_feasible_cell(rng), random_feasible_cell(rng)
        w = rng.uniform(0.1, 0.9)
        merged = CellObservables.create(w * c1.p + (1 - w) * c2.p)
        b1, b2, bm = (counterfactual_bounds(c) for c in (c1, c2, merged))
        for a in (1, -1):
            mix_lo = w * b1.arm(a)[0] + (1 - w) * b2.arm(a)[0]
            mix_hi = w * b1.arm(a)[1] + (1 - w) * b2.arm(a)[1]
            assert bm.arm(a)[0] <= mix_lo + 1e-9
            assert bm.arm(a)[1] >= mix_hi - 1e-9


def test_regime_value_bounds_arithmetic():
    cells = [CellBounds((0.2, 0.4), (0.0, 1.0), 0.5), CellBounds((0.0, 1.0), (0.6, 0.8), 0.5)]
    assert regime_value_bounds(cells, (1, -1)) == pytest.approx((0.4, 0.6))
    with pytest.raises(ValidationError):
        regime_value_bounds(cells, (1,))


def test_maximin_rule():
    assert maximin_regime([CellBounds((0.3, 0.9), (0.5, 0.6), 1.0)]) == (-1,)
    assert maximin_regime([CellBounds((0.5, 0.9), (0.5, 0.6), 1.0)]) == (-1,)
    pc = counterfactual_bounds(perfect_compliance(0.7, 0.4))
    assert maximin_regime([pc]) == (1,)


def test_maximin_dominance_exhaustive(rng):
    for K in range(1, 11):
        w = rng.dirichlet(np.ones(K))
        cells = []
        for l in range(K):
            lp, lm = rng.uniform(0, 0.5, 2)
            cells.append(CellBounds((lp, lp + 0.3), (lm, lm + 0.3), w[l]))
        best = regime_value_bounds(cells, maximin_regime(cells))[0]
        for r in itertools.product((-1, 1), repeat=K):
            assert best >= regime_value_bounds(cells, r)[0] - 1e-15


def test_infeasible_observables_strict_and_projected():
    # P(Y=1, A=1 | Z=1) + P(Y=0, A=1 | Z=-1) > 1 violates the instrument inequalities
    bad = CellObservables.create([[[0.0, 0.0], [0.95, 0.05]], [[0.0, 0.0], [0.05, 0.95]]])
    with pytest.raises(Infeasible):
        counterfactual_bounds(bad, strict=True)
    b = counterfactual_bounds(bad)
    assert b.projected
    assert 0 <= b.theta_plus[0] <= b.theta_plus[1] <= 1
    proj = project_feasible(bad)
    counterfactual_bounds(proj, strict=True)


def test_compute_bounds_from_data_and_json():
    d = sample(make_m1(), 5000, 2)
    res = compute_bounds(d)
    doc = res.to_dict()
    assert doc["maximin_regime"] == list(res.maximin)
    # one cell: the maximin regime coincides with a constant regime
    assert [r["regime"] for r in doc["regimes"]] == [[1], [-1]]
    assert res.to_json().endswith("\n")
