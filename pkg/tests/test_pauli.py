import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissipative_ising.model import SpinModel, liouvillian_action, pauli_liouvillian
from dissipative_ising.pauli import (
    LETTERS,
    NonlinearActionError,
    OperatorVector,
    PauliError,
    PauliString,
    coefficients_to_matrix,
    grade_vector,
    inner_product,
    kron_terms,
    left_multiplication,
    matrix_to_coefficients,
    multiply_paulis,
    pauli_expectation_weights,
    right_multiplication,
    superop_to_pauli_basis,
    xy_weight,
)

from helpers import random_chain

words = st.integers(1, 4).flatmap(lambda n: st.text(alphabet="IXYZ", min_size=n, max_size=n))


def test_index_order_is_base_four_with_site_zero_slowest():
    assert PauliString("I").index == 0
    assert PauliString("Z").index == 1
    assert PauliString("X").index == 2
    assert PauliString("Y").index == 3
    assert PauliString("ZI").index == 4
    assert PauliString.from_index(4 * 3 + 1, 2).word == "YZ"


def test_lower_case_words_normalize():
    assert PauliString("xz").word == "XZ"
    with pytest.raises(PauliError):
        PauliString("XQ")


@given(words)
def test_index_roundtrip(w):
    p = PauliString(w)
    assert PauliString.from_index(p.index, len(w)) == p


def test_single_site_products():
    phase, c = multiply_paulis(PauliString("X"), PauliString("Y"))
    assert c.word == "Z" and phase == 1j
    phase, c = multiply_paulis(PauliString("Y"), PauliString("X"))
    assert c.word == "Z" and phase == -1j
    phase, c = multiply_paulis(PauliString("Z"), PauliString("Z"))
    assert c.word == "I" and phase == 1


@given(st.data())
def test_product_matches_matrices(data):
    n = data.draw(st.integers(1, 3))
    a = PauliString(data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n)))
    b = PauliString(data.draw(st.text(alphabet="IXYZ", min_size=n, max_size=n)))
    phase, c = multiply_paulis(a, b)
    np.testing.assert_allclose(a.matrix() @ b.matrix(), phase * c.matrix(), atol=1e-14)
    commute = np.allclose(a.matrix() @ b.matrix(), b.matrix() @ a.matrix())
    assert a.commutes_with(b) == commute


def test_length_mismatch_rejected():
    with pytest.raises(PauliError):
        multiply_paulis(PauliString("X"), PauliString("XY"))


def test_strings_are_orthonormal():
    n = 2
    gram = np.array([
        [np.trace(PauliString.from_index(a, n).matrix().conj().T @ PauliString.from_index(b, n).matrix()) / 2**n
         for b in range(16)] for a in range(16)
    ])
    np.testing.assert_allclose(gram, np.eye(16), atol=1e-14)


@settings(max_examples=30)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_coefficient_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    c = matrix_to_coefficients(m)
    np.testing.assert_allclose(coefficients_to_matrix(c), m, atol=1e-12)
    # direct trace formula as the reference
    k = rng.integers(4**n)
    p = PauliString.from_index(int(k), n).matrix()
    assert abs(c[k] - np.trace(p @ m) / 2**n) < 1e-12


def test_bad_shapes():
    with pytest.raises(PauliError):
        matrix_to_coefficients(np.zeros((3, 3)))
    with pytest.raises(PauliError):
        coefficients_to_matrix(np.zeros(8))
    with pytest.raises(PauliError):
        OperatorVector(2, np.zeros(4))


def test_operator_vector_arithmetic_and_inner_product():
    a = OperatorVector.from_pauli("XZ", 2.0)
    b = OperatorVector.from_pauli("XZ")
    assert inner_product(a, b) == 2.0
    assert inner_product(a - 2 * b, a - 2 * b) == 0
    assert a.is_hermitian()
    assert not OperatorVector.from_pauli("X", 1j).is_hermitian()
    with pytest.raises(PauliError):
        inner_product(a, OperatorVector.from_pauli("X"))
    with pytest.raises(ValueError):
        a.coefficients[0] = 1.0


def test_inner_product_matches_trace():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    lhs = inner_product(OperatorVector.from_matrix(a), OperatorVector.from_matrix(b))
    assert abs(lhs - np.trace(a.conj().T @ b) / 4) < 1e-12


def test_xy_weight_and_grades():
    assert xy_weight("IXYZ") == 2
    assert xy_weight(PauliString("ZZ")) == 0
    g = grade_vector(2)
    assert [int(g[PauliString(w).index]) for w in ("II", "XZ", "YX")] == [0, 1, 2]
    assert not g.flags.writeable


def test_superop_identity_and_commutator():
    n = 2
    eye = superop_to_pauli_basis(lambda m: m, n)
    np.testing.assert_allclose(eye, np.eye(16))
    assert eye.dtype == float
    z1 = PauliString("ZI").matrix()
    comm = superop_to_pauli_basis(lambda m: -1j * (z1 @ m - m @ z1), n)
    assert np.isrealobj(comm)
    # -i[Z, X] = 2 Y on the first site
    assert comm[PauliString("YI").index, PauliString("XI").index] == pytest.approx(2.0)


def test_superop_complex_when_needed():
    s = superop_to_pauli_basis(lambda m: 1j * m, 1)
    assert np.iscomplexobj(s)


def test_superop_rejects_nonlinear_maps():
    with pytest.raises(NonlinearActionError):
        superop_to_pauli_basis(lambda m: m @ m, 1)


def test_superop_size_cap():
    with pytest.raises(PauliError):
        superop_to_pauli_basis(lambda m: m, 8)


def test_left_right_multiplication():
    rng = np.random.default_rng(1)
    op = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    c = matrix_to_coefficients(rho)
    np.testing.assert_allclose(left_multiplication(op) @ c, matrix_to_coefficients(op @ rho), atol=1e-13)
    np.testing.assert_allclose(right_multiplication(op) @ c, matrix_to_coefficients(rho @ op), atol=1e-13)


def test_pauli_liouvillian_matches_matrix_action():
    rng = np.random.default_rng(3)
    model = random_chain(rng, 3, periodic=True)
    direct = superop_to_pauli_basis(
        lambda m: liouvillian_action(model, OperatorVector.from_matrix(m)).to_matrix(), 3
    )
    assert np.isrealobj(direct)
    np.testing.assert_allclose(pauli_liouvillian(model).toarray(), direct, atol=1e-12)


def test_kron_terms_restriction_selects_submatrix():
    rng = np.random.default_rng(4)
    f = rng.normal(size=(4, 4))
    g = rng.normal(size=(4, 4))
    terms = [(1.0, {0: f, 2: g})]
    full = kron_terms(terms, 3).toarray()
    allowed = [[0, 1, 2, 3], [0, 1], [0, 1]]
    rows = [[0, 1, 2, 3], [0, 1], [2, 3]]
    col_idx = [np.ravel_multi_index(tuple(s[i] for s, i in zip(allowed, t)), (4, 4, 4))
               for t in np.ndindex(*[len(s) for s in allowed])]
    row_idx = [np.ravel_multi_index(tuple(s[i] for s, i in zip(rows, t)), (4, 4, 4))
               for t in np.ndindex(*[len(s) for s in rows])]
    sub = kron_terms(terms, 3, allowed).toarray()
    np.testing.assert_allclose(sub, full[np.ix_(col_idx, col_idx)])
    leak = kron_terms(terms, 3, allowed, row_allowed=rows).toarray()
    np.testing.assert_allclose(leak, full[np.ix_(row_idx, col_idx)])


def test_kron_terms_rejects_complex_sum():
    with pytest.raises(ValueError):
        kron_terms([(1j, {0: np.eye(4)})], 1)
    out = kron_terms([(1j, {0: np.eye(4)})], 1, real=False)
    assert np.iscomplexobj(out.toarray())


def test_expectation_weights():
    w = pauli_expectation_weights([(0.1, 0.2, 0.3), (0.0, -1.0, 0.0)])
    # letters (I, Z, X, Y) per site: <Z_0 Y_1> = 0.3 * -1
    assert w[PauliString("ZY").index] == pytest.approx(-0.3)
    assert w[0] == 1.0
    assert len(LETTERS) == 4
