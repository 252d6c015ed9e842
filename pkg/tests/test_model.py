import itertools
import json

import numpy as np
import pytest

from conftest import make_m1, zero_effect_model
from oracles import (enum_id1, enum_id2, enum_value, proof_decomposition_id1, random_cell,
                     random_model)
from ivrules.errors import ValidationError, WeakInstrument
from ivrules.model import (CellSpec, StructuralModel, all_regimes, as_regime, check_assumptions,
                           load_model, population_argmax, prefers_plus, population_cate, population_delta,
                           population_objective_id1, population_objective_id2, regime_value,
                           save_model)


def test_cate_and_delta_worked_models(m1, m2):
    assert population_cate(m1, 0) == pytest.approx(0.3, abs=1e-12)
    assert population_delta(m1, 0) == pytest.approx(0.4, abs=1e-12)
    assert population_cate(m2, 0) == pytest.approx(0.1, abs=1e-12)
    assert population_delta(m2, 0) == pytest.approx(0.4, abs=1e-12)


def test_zero_effect_and_irrelevant_instrument():
    m = zero_effect_model()
    assert population_cate(m, 0) == 0.0
    c = CellSpec.create([0.5, 0.5], [0.2, 0.3], [0.1, 0.1], [0.4, 0.6], [0.4, 0.6], 0.5)
    assert population_delta(StructuralModel.create([c]), 0) == 0.0


@pytest.mark.parametrize("l", [-1, 1, 5])
def test_out_of_range_cell(m1, l):
    with pytest.raises(ValidationError):
        population_cate(m1, l)
    with pytest.raises(ValidationError):
        population_delta(m1, l)


@pytest.mark.parametrize("model_name, d, expected", [
    ("m1", 1, 0.7), ("m1", -1, 0.4), ("m2", 1, 0.6), ("m2", -1, 0.5)])
def test_regime_value(request, model_name, d, expected):
    m = request.getfixturevalue(model_name)
    assert regime_value(m, (d,)) == pytest.approx(expected, abs=1e-12)
    assert regime_value(m, (d,)) == pytest.approx(enum_value(m, (d,)), abs=1e-12)


def test_regime_value_length_mismatch(m1):
    with pytest.raises(ValidationError):
        regime_value(m1, (1, 1))
    with pytest.raises(ValidationError):
        regime_value(m1, (0,))


def test_value_regime_invariant_without_effect():
    m = zero_effect_model()
    values = {regime_value(m, r) for r in all_regimes(2)}
    assert len(values) == 1


def test_m1_objectives(m1):
    assert population_objective_id1(m1, (1,)) == pytest.approx(0.80, abs=1e-12)
    assert population_objective_id1(m1, (-1,)) == pytest.approx(0.45, abs=1e-12)
    assert population_objective_id2(m1, (1,)) == pytest.approx(1.625, abs=1e-12)
    assert population_objective_id2(m1, (-1,)) == pytest.approx(1.275, abs=1e-12)
    gap1 = population_objective_id1(m1, (1,)) - population_objective_id1(m1, (-1,))
    gap2 = population_objective_id2(m1, (1,)) - population_objective_id2(m1, (-1,))
    assert gap1 == pytest.approx(0.35, abs=1e-12)
    assert gap2 == pytest.approx(0.35, abs=1e-12)


def test_m1_objective_matches_proof_decomposition(m1):
    # 0.80 = 0.35 + 0.45 and 0.45 = 0 + 0.45
    for d in (1, -1):
        assert population_objective_id1(m1, (d,)) == pytest.approx(
            proof_decomposition_id1(m1, (d,)), abs=1e-12)


def test_zero_outcome_objectives_vanish():
    m = zero_effect_model(0.0)
    for r in all_regimes(2):
        assert population_objective_id1(m, r) == 0.0
        assert population_objective_id2(m, r) == 0.0


def test_objectives_match_brute_force_enumeration(rng):
    for _ in range(60):
        m = random_model(rng)
        if min(abs(population_delta(m, l)) for l in range(m.n_cells)) < 1e-3:
            continue
        for r in all_regimes(m.n_cells):
            assert population_objective_id1(m, r) == pytest.approx(enum_id1(m, r), rel=1e-9, abs=1e-9)
            assert population_objective_id2(m, r) == pytest.approx(enum_id2(m, r), rel=1e-9, abs=1e-9)
            assert population_objective_id1(m, r) == pytest.approx(
                proof_decomposition_id1(m, r), rel=1e-9, abs=1e-9)
            assert regime_value(m, r) == pytest.approx(enum_value(m, r), abs=1e-12)


def test_weak_instrument_refused():
    c = CellSpec.create([0.5, 0.5], [0.9, 0.3], [0.5, 0.5], [0.6, 0.4], [0.4, 0.6], 0.5)
    m = StructuralModel.create([c])
    assert abs(population_delta(m, 0)) < 1e-12
    for f in (population_objective_id1, population_objective_id2):
        with pytest.raises(WeakInstrument):
            f(m, (1,))
    for obj in ("id1", "id2"):
        with pytest.raises(WeakInstrument):
            population_argmax(m, obj)
    assert population_argmax(m, "oracle") == (1,)


def test_argmax_worked_models(m1, m2):
    for obj in ("id1", "id2", "oracle"):
        assert population_argmax(m1, obj) == (1,)
    assert population_argmax(m2, "oracle") == (1,)
    assert population_argmax(m2, "id1") == (-1,)
    assert population_argmax(m2, "id2") == (-1,)


def test_argmax_tie_resolves_to_minus_one():
    m = zero_effect_model()
    for obj in ("id1", "id2", "oracle"):
        assert population_argmax(m, obj) == (-1, -1)


def test_check_assumptions_m1(m1):
    rep = check_assumptions(m1)
    c = rep.cells[0]
    assert c.a_part_a_holds and c.a_part_b_holds
    assert c.assumption8_var > 0
    assert c.assumption7_cov == pytest.approx(0.02, abs=1e-12)
    assert c.delta_l == pytest.approx(0.4, abs=1e-12)
    assert c.Delta_l == pytest.approx(0.3, abs=1e-12)
    assert rep.assumption_a_holds


def test_check_assumptions_m2(m2):
    c = check_assumptions(m2).cells[0]
    assert not c.a_part_a_holds
    assert c.a_part_b_holds


def test_single_latent_type_satisfies_everything():
    m = StructuralModel.create([CellSpec.create([1.0], [0.7], [0.2], [0.9], [0.1], 0.3)])
    c = check_assumptions(m).cells[0]
    assert c.a_part_a_holds and c.a_part_b_holds
    assert c.assumption7_cov == 0.0 and c.assumption8_var == 0.0


def test_zero_probability_types_ignored_by_sign_checks():
    c = CellSpec.create([1.0, 0.0], [0.7, 0.0], [0.2, 1.0], [0.9, 0.0], [0.1, 1.0], 0.5)
    rep = check_assumptions(StructuralModel.create([c])).cells[0]
    assert rep.a_part_a_holds and rep.a_part_b_holds


def test_check_assumptions_rejects_bad_tol(m1):
    with pytest.raises(ValueError):
        check_assumptions(m1, 0.0)


def test_argmax_identity_under_assumption_a(rng):
    checked = 0
    while checked < 500:
        m = random_model(rng, coherent=True)
        rep = check_assumptions(m)
        if not rep.assumption_a_holds or min(abs(c.delta_l) for c in rep.cells) <= 1e-9:
            continue
        oracle = population_argmax(m, "oracle")
        assert population_argmax(m, "id1") == oracle
        assert population_argmax(m, "id2") == oracle
        checked += 1


def test_constant_gap_between_objectives(rng):
    for _ in range(100):
        m = random_model(rng)
        if min(abs(population_delta(m, l)) for l in range(m.n_cells)) < 1e-3:
            continue
        gaps = [population_objective_id1(m, r) - population_objective_id2(m, r)
                for r in all_regimes(m.n_cells)]
        assert max(gaps) - min(gaps) < 1e-10 * max(1.0, max(abs(g) for g in gaps))


def test_objective_is_not_the_value_function(m1):
    best = population_argmax(m1, "id1")
    assert abs(population_objective_id1(m1, best) - regime_value(m1, best)) > 0.05


def test_assumption8_implies_assumption7(rng):
    tol = 1e-9
    for i in range(500):
        m = random_model(rng)
        # every other model gets a constant take-up contrast
        if i % 2:
            cells = []
            for c in m.cells:
                shift = rng.uniform(0.05, 0.3)
                qm = rng.uniform(0, 1 - shift) * np.ones(c.n_types)
                cells.append(CellSpec.create(c.u_probs, c.m_plus, c.m_minus, qm + shift, qm, c.pi_z))
            m = StructuralModel.create(cells, m.cell_probs)
        for cell, rep in zip(m.cells, check_assumptions(m, tol).cells):
            var_g = float(np.dot(cell.u_probs, (cell.outcome_contrast - rep.Delta_l) ** 2))
            # Cauchy-Schwarz bound, and the implication itself
            assert abs(rep.assumption7_cov) <= np.sqrt(rep.assumption8_var * var_g) + 1e-15
            if rep.assumption8_var < tol:
                assert abs(rep.assumption7_cov) < tol


def test_comonotone_takeup_satisfies_a_b(rng):
    for _ in range(200):
        M = int(rng.integers(1, 5))
        hi, lo = np.sort(rng.uniform(size=(2, M)), axis=0)[::-1]
        c = CellSpec.create(rng.dirichlet(np.ones(M)), rng.uniform(size=M), rng.uniform(size=M),
                            hi, lo, 0.5)
        assert check_assumptions(StructuralModel.create([c])).cells[0].a_part_b_holds


def test_random_cell_helper_is_valid(rng):
    c = random_cell(rng, 3, coherent=True)
    assert c.n_types == 3


# --- validation and JSON -------------------------------------------------------

def test_json_round_trip(tmp_path, m1):
    p = tmp_path / "m.json"
    save_model(m1, p)
    back = load_model(p)
    assert back.to_dict() == m1.to_dict()
    assert json.loads(p.read_text())["cells"][0]["pi_z"] == 0.5


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["cells"][0].update(u_probs=[0.5, 0.6]), "cells[0].u_probs"),
    (lambda d: d["cells"][0].update(m_plus=[0.9, 1.5]), "cells[0].m_plus[1]"),
    (lambda d: d["cells"][0].update(q_minus=[0.3]), "cells[0].q_minus"),
    (lambda d: d["cells"][0].update(pi_z=1.0), "cells[0].pi_z"),
    (lambda d: d["cells"][0].pop("q_plus"), "cells[0].q_plus"),
    (lambda d: d.update(cell_probs=[0.5]), "cell_probs"),
    (lambda d: d.update(cells=[]), "cells"),
])
def test_validation_errors_carry_path(mutate, path):
    doc = make_m1().to_dict()
    mutate(doc)
    with pytest.raises(ValidationError) as exc:
        StructuralModel.from_dict(doc)
    assert exc.value.path == path


def test_load_model_missing_and_malformed(tmp_path):
    with pytest.raises(ValidationError):
        load_model(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        load_model(bad)


def test_model_is_immutable(m1):
    with pytest.raises(ValueError):
        m1.cells[0].m_plus[0] = 0.1


def test_as_regime():
    assert as_regime([1, -1, 1]) == (1, -1, 1)
    with pytest.raises(ValidationError):
        as_regime([1, 0])
    assert len(list(all_regimes(3))) == 8
    assert list(itertools.islice(all_regimes(2), 1)) == [(-1, -1)]


@pytest.mark.parametrize("plus, minus, expected", [
    (0.062291732949312624, 0.06229173294931259, False),  # rounding noise is a tie
    (0.5, 0.5, False),
    (0.0, 0.0, False),
    (0.5000001, 0.5, True),
    (-0.1, -0.2, True),
])
def test_prefers_plus_tie_rule(plus, minus, expected):
    assert prefers_plus(plus, minus) is expected
