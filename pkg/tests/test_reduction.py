import numpy as np
import pytest

from dissipative_ising import reduction as red
from dissipative_ising.fullsolver import evolve_full
from dissipative_ising.model import Jump, SpinModel

from helpers import COUNTEREXAMPLE, random_chain, random_state

T = np.linspace(0, 2, 9)


def test_parse_observable():
    assert red.parse_observable("xy@2,7") == {2: "X", 7: "Y"}
    assert red.parse_observable(" Z @ 0 ") == {0: "Z"}
    assert red.observable_label({7: "Y", 2: "X"}) == "xy@2,7"
    for bad in ("x@", "xy@1", "xx@1,1", "q@0", "x1"):
        with pytest.raises(ValueError):
            red.parse_observable(bad)


def test_neighbor_set():
    m = SpinModel(5, ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 4, 1.0)))
    assert red.neighbor_set(m, [1]) == (0, 2)
    assert red.neighbor_set(m, [0, 1]) == (2, 4)
    with pytest.raises(ValueError):
        red.neighbor_set(m, [])
    with pytest.raises(ValueError):
        red.neighbor_set(m, [9])


@pytest.fixture(scope="module")
def six_site():
    rng = np.random.default_rng(21)
    return random_chain(rng, 6, periodic=True), random_state(rng, 6)


@pytest.mark.parametrize("obs", [{2: "X"}, {2: "Y", 3: "Z"}, {0: "Y"}])
def test_routes_agree_with_full_solver(six_site, obs):
    model, psi = six_site
    label = red.observable_label(obs)
    ref = evolve_full(model, psi, T, {label: obs}).expectations[label]
    problem = red.build_reduced(model, obs, psi)
    for method in ("schrodinger", "heisenberg"):
        got = red.evolve_observable(problem, obs, T, method)
        np.testing.assert_allclose(got.values, ref, atol=1e-8, err_msg=method)
        assert got.exact and got.method == method


def test_auto_policy(six_site):
    model, psi = six_site
    assert red.expectation(model, {1: "X"}, psi, T).method == "schrodinger"
    covering = red.build_reduced(model, [0, 1, 2], psi, extra=[3, 4, 5])
    assert covering.covers_model()
    assert red.evolve_observable(covering, {1: "X"}, T).method == "full"


def test_extra_sites_do_not_change_result(six_site):
    model, psi = six_site
    obs = {2: "X"}
    base = red.expectation(model, obs, psi, T).values
    bigger = red.build_reduced(model, [2], psi, extra=[0])
    assert bigger.patch == (0, 1, 2, 3)
    np.testing.assert_allclose(red.evolve_observable(bigger, obs, T, "schrodinger").values, base, atol=1e-8)


def test_not_solvable_is_refused_then_leaks():
    model = SpinModel(4, ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)), None, (Jump(2, COUNTEREXAMPLE, 1.0),))
    psi = random_state(np.random.default_rng(0), 4)
    with pytest.raises(red.NotSolvableError):
        red.build_reduced(model, [1], psi)
    problem = red.build_reduced(model, [1], psi, force=True)
    assert not problem.exact
    series = red.evolve_observable(problem, {1: "X"}, T)
    assert series.method == "schrodinger" and not series.exact
    with pytest.raises(red.SubspaceLeakError):
        red.heisenberg_invariant_evolve(problem, {1: "X"}, T)


def test_observable_outside_support(six_site):
    model, psi = six_site
    problem = red.build_reduced(model, [2], psi)
    with pytest.raises(ValueError):
        red.evolve_observable(problem, {3: "X"}, T, "schrodinger")
    with pytest.raises(ValueError):
        red.evolve_observable(problem, {2: "X"}, T, "magic")


def test_patch_caps(six_site, monkeypatch):
    model, psi = six_site
    problem = red.build_reduced(model, [2], psi)
    monkeypatch.setattr(red, "HEISENBERG_MAX_DIM", 8)
    with pytest.raises(red.PatchTooLargeError):
        red.heisenberg_invariant_evolve(problem, {2: "X"}, T)
    monkeypatch.setattr(red, "SCHRODINGER_MAX_SITES", 2)
    with pytest.raises(red.PatchTooLargeError):
        red.evolve_observable(problem, {2: "X"}, T, "schrodinger")


def test_correlator_and_evolve_many(six_site):
    model, psi = six_site
    c = red.correlator(model, (1, "x"), (2, "z"), psi, T)
    np.testing.assert_allclose(c.connected, c.full.values - c.first.values * c.second.values)
    assert c.connected[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        red.correlator(model, (1, "x"), (1, "z"), psi, T)
    obs = [{0: "X"}, {3: "Y"}, {4: "Z"}]
    serial = red.evolve_many(model, obs, psi, T, workers=1)
    threaded = red.evolve_many(model, obs, psi, T, workers=3)
    for a, b in zip(serial, threaded):
        assert a.label == b.label
        np.testing.assert_array_equal(a.values, b.values)


def test_long_chain_is_local():
    # a 40-site chain is far beyond brute force; the answer depends on the patch only
    rng = np.random.default_rng(8)
    big = random_chain(rng, 40, fields=True)
    psi = random_state(rng, 40)
    out = red.expectation(big, {20: "X"}, psi, T)
    small = big.relabel(range(17, 24))
    ref_psi = type(psi)(psi.bloch[17:24])
    ref = red.expectation(small, {3: "X"}, ref_psi, T)
    np.testing.assert_allclose(out.values, ref.values, atol=1e-10)
    assert out.patch_size == 3
