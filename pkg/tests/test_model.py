import numpy as np
import pytest

from dissipative_ising.model import (
    NAMED_STATES,
    PRESETS,
    InitialProductState,
    Jump,
    LatticeSpec,
    ModelError,
    SpinModel,
    SupportError,
    adjoint_liouvillian_action,
    build_hamiltonian,
    hamiltonian_diagonal,
    jump_preset,
    liouvillian_action,
    single_site_dissipator,
)
from dissipative_ising.pauli import SIGMA_MINUS, SIGMA_X, SIGMA_Y, SIGMA_Z, OperatorVector, PauliString

from helpers import random_chain


def test_jump_validation():
    with pytest.raises(ModelError):
        Jump(0, np.eye(3), 1.0)
    with pytest.raises(ModelError):
        Jump(0, SIGMA_Z, -0.1)
    with pytest.raises(ModelError):
        Jump(0, SIGMA_Z, float("nan"))


def test_model_validation():
    with pytest.raises(ModelError):
        SpinModel(0)
    with pytest.raises(ModelError):
        SpinModel(2, ((0, 0, 1.0),))
    with pytest.raises(ModelError):
        SpinModel(2, ((0, 1, 1.0), (1, 0, 2.0)))
    with pytest.raises(ModelError):
        SpinModel(2, ((0, 2, 1.0),))
    with pytest.raises(ModelError):
        SpinModel(2, (), (1.0,))
    with pytest.raises(ModelError):
        SpinModel(2, (), None, (Jump(5, SIGMA_Z, 1.0),))


def test_couplings_are_normalized():
    m = SpinModel(3, ((2, 0, 1),))
    assert m.couplings == ((0, 2, 1.0),)
    assert m.neighbors(0) == {2}


def test_model_hash_is_stable_and_sensitive():
    a = SpinModel(2, ((0, 1, 1.0),), None, (Jump(0, SIGMA_Z, 0.5),))
    b = SpinModel(2, ((1, 0, 1.0),), None, (Jump(0, SIGMA_Z, 0.5),))
    c = SpinModel(2, ((0, 1, 1.0),), None, (Jump(0, SIGMA_Z, 0.6),))
    assert a.model_hash() == b.model_hash()
    assert a.model_hash() != c.model_hash()


def test_relabel_keeps_inside_terms():
    m = SpinModel(4, ((0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)), (0.1, 0.2, 0.3, 0.4),
                  (Jump(0, SIGMA_Z, 1.0), Jump(2, SIGMA_Z, 2.0)))
    r = m.relabel([2, 1])
    assert r.couplings == ((0, 1, 2.0),)
    assert r.fields == (0.3, 0.2)
    assert [(j.site, j.rate) for j in r.jumps] == [(0, 2.0)]
    r = m.relabel([1, 2, 3], field_sites={2})
    assert r.fields == (0.0, 0.3, 0.0)


def test_chain_lattice():
    spec = LatticeSpec("chain", (5,), periodic=True)
    assert spec.couplings() == ((0, 1, 1.0), (0, 4, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0))
    open_chain = LatticeSpec("chain", (5,), range=2, coupling=(1.0, 0.25))
    pairs = {(a, b): h for a, b, h in open_chain.couplings()}
    assert pairs[(0, 2)] == 0.25 and (0, 4) not in pairs and len(pairs) == 7


def test_square_lattice_distances():
    spec = LatticeSpec("square", (3, 3), periodic=True)
    assert spec.coordinates(4) == (1, 1)
    assert spec.distance(0, 8) == 2
    # 9 sites, 4 neighbours each on a torus
    assert len(spec.couplings()) == 18


def test_lattice_validation():
    with pytest.raises(ModelError):
        LatticeSpec("hex", (3,))
    with pytest.raises(ModelError):
        LatticeSpec("chain", (3, 3))
    with pytest.raises(ModelError):
        LatticeSpec("chain", (4,), range=2, coupling=(1.0,))


def test_initial_state():
    psi = InitialProductState(((0.0, 1.0, 0.0), (0.0, 0.0, -1.0)))
    assert psi.is_pure()
    vec = psi.statevector()
    rho = psi.density_matrix()
    np.testing.assert_allclose(np.outer(vec, vec.conj()), rho, atol=1e-14)
    y0 = np.kron(SIGMA_Y, np.eye(2))
    assert np.trace(y0 @ rho).real == pytest.approx(1.0)
    assert psi.expectation({0: "Y", 1: "Z"}) == pytest.approx(-1.0)
    with pytest.raises(ModelError):
        InitialProductState(((1.0, 1.0, 0.0),))
    with pytest.raises(ModelError):
        InitialProductState(((0.5, 0.0, 0.0),)).statevector()


@pytest.mark.parametrize("label", sorted(NAMED_STATES))
def test_named_states_have_unit_bloch_vectors(label):
    b = np.array(NAMED_STATES[label])
    ket = InitialProductState((tuple(b),)).site_ket(0)
    rho = np.outer(ket, ket.conj())
    got = [np.trace(p @ rho).real for p in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    np.testing.assert_allclose(got, b, atol=1e-14)


def test_presets():
    assert len(PRESETS) == 6
    np.testing.assert_allclose(jump_preset("emission_z"), SIGMA_MINUS)
    np.testing.assert_allclose(jump_preset("dephasing_xy", np.pi / 2), SIGMA_Y, atol=1e-15)
    with pytest.raises(ModelError):
        jump_preset("nope")


def test_hamiltonian_diagonal_convention():
    m = SpinModel(2, ((0, 1, 1.5),), (0.25, -1.0))
    h = np.kron(SIGMA_Z, SIGMA_Z) * 1.5 + 0.25 * np.kron(SIGMA_Z, np.eye(2)) - np.kron(np.eye(2), SIGMA_Z)
    np.testing.assert_allclose(build_hamiltonian(m), h)
    assert hamiltonian_diagonal(m)[0] == pytest.approx(1.5 + 0.25 - 1.0)


def test_liouvillian_is_trace_preserving_and_adjoint():
    rng = np.random.default_rng(7)
    model = random_chain(rng, 3)
    rho = OperatorVector.from_matrix(InitialProductState(((0.3, 0.1, 0.5),) * 3).density_matrix())
    out = liouvillian_action(model, rho)
    assert abs(out.coefficients[0]) < 1e-13
    # <<O|L(rho)>> = <<L^dag(O)|rho>>
    op = OperatorVector.from_pauli("XZY")
    lhs = np.vdot(op.coefficients, out.coefficients)
    rhs = np.vdot(adjoint_liouvillian_action(model, op).coefficients, rho.coefficients)
    assert abs(lhs - rhs) < 1e-12


def test_support_restriction():
    model = SpinModel(3, ((0, 1, 1.0),), None, (Jump(2, SIGMA_Z, 1.0),))
    op = OperatorVector.from_pauli("X")
    out = adjoint_liouvillian_action(model, op, support=[2])
    # dephasing on site 2 damps X at rate 2 gamma
    assert out.coefficients[PauliString("X").index] == pytest.approx(-2.0)
    with pytest.raises(SupportError):
        adjoint_liouvillian_action(model, op, support=[1])
    with pytest.raises(SupportError):
        adjoint_liouvillian_action(model, op)


def test_single_site_dissipator_closed_forms():
    gamma = 0.6
    d = single_site_dissipator(SIGMA_Z, gamma)
    np.testing.assert_allclose(d, np.diag([0, 0, -2 * gamma, -2 * gamma]), atol=1e-15)
    e = single_site_dissipator(SIGMA_MINUS, gamma)
    # rows/cols (1, z, x, y): populations relax to -z, coherences decay at gamma / 2
    expected = np.array([[0, 0, 0, 0], [-gamma, -gamma, 0, 0], [0, 0, -gamma / 2, 0], [0, 0, 0, -gamma / 2]])
    np.testing.assert_allclose(e, expected, atol=1e-15)
