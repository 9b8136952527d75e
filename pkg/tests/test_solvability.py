import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative_ising.model import PRESETS, Jump, SpinModel, jump_preset
from dissipative_ising.solvability import (
    check_gap_conditions,
    check_solvable,
    diagonality_closure_test,
    single_site_dissipator_matrix,
)

from helpers import COUNTEREXAMPLE, random_chain


@given(name=st.sampled_from(PRESETS), theta=st.floats(0, 2 * np.pi), rate=st.floats(0.01, 5))
@settings(max_examples=60, deadline=None)
def test_presets_are_solvable(name, theta, rate):
    m = SpinModel(1, (), None, (Jump(0, jump_preset(name, theta), rate),))
    rep = check_solvable(m)
    assert rep.passed
    assert rep.sites[0].block_residual < 1e-12


def test_counterexample_is_rejected():
    m = SpinModel(2, ((0, 1, 1.0),), None, (Jump(1, COUNTEREXAMPLE, 0.7),))
    rep = check_solvable(m)
    assert not rep.passed
    assert rep.sites[0].solvable and not rep.sites[1].solvable
    # coherence-to-population feed equals the rate for this jump
    assert rep.sites[1].residual == pytest.approx(0.7)
    assert "site 1" in rep.failures[0]


def test_closure_matches_membership():
    rng = np.random.default_rng(3)
    good = random_chain(rng, 4)
    assert diagonality_closure_test(good, range(4), trials=32) < 1e-12
    bad = SpinModel(3, ((0, 1, 1.0), (1, 2, 1.0)), None, (Jump(1, COUNTEREXAMPLE, 1.0),))
    assert diagonality_closure_test(bad, [1]) > 0.1
    assert diagonality_closure_test(bad, [0, 2]) < 1e-12
    assert diagonality_closure_test(bad, []) == 0.0


def _single(*jumps):
    return SpinModel(1, (), None, tuple(Jump(0, m, r) for m, r in jumps))


def test_rotated_tfim_gap():
    rep = check_gap_conditions(_single((jump_preset("rotated_tfim"), 0.5)))
    assert rep.gap_conditions_hold and not rep.failures
    np.testing.assert_allclose(sorted(rep.sites[0].eigenvalues.real), [-2, -1, -1, 0], atol=1e-12)
    assert rep.gamma == pytest.approx(1.0)


def test_dephasing_only_fails_condition_1():
    rep = check_gap_conditions(_single((jump_preset("dephasing_z"), 1.0)))
    assert rep.passed and not rep.gap_conditions_hold
    assert rep.sites[0].condition_1 is False and rep.sites[0].condition_2
    assert any("condition (1)" in f for f in rep.failures)


def test_emission_fails_condition_2():
    rep = check_gap_conditions(_single((jump_preset("emission_z"), 1.0)))
    site = rep.sites[0]
    assert site.condition_1 and not site.z1_zero
    assert site.gamma == pytest.approx(0.5)
    assert any("condition (2)" in f for f in rep.failures)


def test_balanced_emission_and_pump():
    rep = check_gap_conditions(_single((jump_preset("emission_z"), 0.8), (jump_preset("pump_z"), 0.8)))
    assert rep.gap_conditions_hold
    assert rep.gamma == pytest.approx(0.8)


def test_gap_is_minimum_over_sites():
    m = SpinModel(2, ((0, 1, 1.0),), None, (
        Jump(0, jump_preset("rotated_tfim"), 0.5), Jump(1, jump_preset("rotated_tfim"), 0.2)))
    rep = check_gap_conditions(m)
    assert rep.gamma == pytest.approx(0.4)
    d = rep.to_dict()
    assert d["gamma"] == pytest.approx(0.4) and len(d["sites"]) == 2


def test_dissipator_matrix_sums_channels():
    a = Jump(0, jump_preset("dephasing_z"), 0.3)
    b = Jump(0, jump_preset("emission_z"), 0.4)
    np.testing.assert_allclose(
        single_site_dissipator_matrix([a, b]),
        single_site_dissipator_matrix([a]) + single_site_dissipator_matrix([b]),
    )
