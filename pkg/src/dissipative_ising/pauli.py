"""Pauli-string algebra and the Liouville-space representation of operators.

Operators on ``n`` spins are stored as coefficient vectors over the Pauli
basis.  Per site the letters are ordered ``(I, Z, X, Y)``; multi-site strings
are ordered lexicographically with site 0 varying slowest, so the index of a
string is its word read as a base-4 number.

The inner product is ``<<A|B>> = 2**-n Tr(A^dag B) = sum_mu conj(A_mu) B_mu``,
which makes the Pauli strings orthonormal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

LETTERS = "IZXY"
LETTER_INDEX = {c: i for i, c in enumerate(LETTERS)}

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)

#: single-site basis matrices in basis order (I, Z, X, Y)
SINGLE_SITE_BASIS = (IDENTITY, SIGMA_Z, SIGMA_X, SIGMA_Y)

# coefficient extraction: c_a = 1/2 sum_{r,c} sigma_a[c, r] M[r, c]
_ANALYSIS = np.array([0.5 * b.T.reshape(4) for b in SINGLE_SITE_BASIS])
# synthesis: M[r, c] = sum_a c_a sigma_a[r, c]
_SYNTHESIS = np.array([b.reshape(4) for b in SINGLE_SITE_BASIS]).T

HERMITIAN_DUST = 1e-12
MAX_DENSE_SITES = 7


class PauliError(ValueError):
    """Malformed Pauli word or mismatched operand sizes."""


class NonlinearActionError(ValueError):
    """A supposed superoperator failed a linearity spot check."""


def _single_site_table():
    table = {}
    for a, ma in zip(LETTERS, SINGLE_SITE_BASIS):
        for b, mb in zip(LETTERS, SINGLE_SITE_BASIS):
            prod = ma @ mb
            for c, mc in zip(LETTERS, SINGLE_SITE_BASIS):
                phase = np.trace(mc @ prod) / 2
                if abs(phase) > 0.5:
                    table[a, b] = (complex(np.round(phase.real) + 1j * np.round(phase.imag)), c)
                    break
    return table


_PRODUCT_TABLE = _single_site_table()


@dataclass(frozen=True)
class PauliString:
    """A word over ``{I, X, Y, Z}``, one letter per site."""

    word: str

    def __post_init__(self):
        word = self.word.upper()
        if any(c not in LETTER_INDEX for c in word):
            raise PauliError(f"invalid Pauli word {self.word!r}")
        object.__setattr__(self, "word", word)

    def __len__(self) -> int:
        return len(self.word)

    def __str__(self) -> str:
        return self.word

    @property
    def index(self) -> int:
        idx = 0
        for c in self.word:
            idx = 4 * idx + LETTER_INDEX[c]
        return idx

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        letters = []
        for _ in range(n):
            index, r = divmod(index, 4)
            letters.append(LETTERS[r])
        return cls("".join(reversed(letters)))

    @classmethod
    def from_sites(cls, n: int, letters: Mapping[int, str]) -> "PauliString":
        word = ["I"] * n
        for site, c in letters.items():
            if not 0 <= site < n:
                raise PauliError(f"site {site} outside 0..{n - 1}")
            word[site] = c.upper()
        return cls("".join(word))

    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.word) if c != "I")

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for c in self.word:
            out = np.kron(out, SINGLE_SITE_BASIS[LETTER_INDEX[c]])
        return out

    def commutes_with(self, other: "PauliString") -> bool:
        _check_lengths(self, other)
        anti = sum(
            1 for a, b in zip(self.word, other.word)
            if a != "I" and b != "I" and a != b
        )
        return anti % 2 == 0


def _check_lengths(a: PauliString, b: PauliString) -> None:
    if len(a) != len(b):
        raise PauliError(f"length mismatch: {len(a)} vs {len(b)}")


def multiply_paulis(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, c)`` with ``a @ b == phase * c``."""
    _check_lengths(a, b)
    phase = 1 + 0j
    letters = []
    for x, y in zip(a.word, b.word):
        p, c = _PRODUCT_TABLE[x, y]
        phase *= p
        letters.append(c)
    return phase, PauliString("".join(letters))


def xy_weight(mu: PauliString | str) -> int:
    """Number of X and Y letters in a Pauli word (the grade ``d``)."""
    word = mu.word if isinstance(mu, PauliString) else mu.upper()
    return sum(1 for c in word if c in "XY")


@lru_cache(maxsize=None)
def grade_vector(n: int) -> np.ndarray:
    """Grades of all ``4**n`` strings in basis order."""
    single = np.array([0, 0, 1, 1])
    out = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        out = (out[:, None] + single[None, :]).reshape(-1)
    out.setflags(write=False)
    return out


def _apply_per_axis(tensor: np.ndarray, mat: np.ndarray, n: int) -> np.ndarray:
    for axis in range(n):
        tensor = np.moveaxis(np.tensordot(mat, tensor, axes=([1], [axis])), 0, axis)
    return tensor


def matrix_to_coefficients(m: np.ndarray) -> np.ndarray:
    """Pauli-basis coefficients ``2**-n Tr(mu m)`` of a ``2**n`` square matrix."""
    m = np.asarray(m, dtype=complex)
    dim = m.shape[0]
    n = dim.bit_length() - 1
    if m.shape != (dim, dim) or 1 << n != dim:
        raise PauliError(f"expected a 2**n square matrix, got shape {m.shape}")
    if n == 0:
        return m.reshape(1).copy()
    t = m.reshape((2,) * (2 * n))
    order = [ax for pair in zip(range(n), range(n, 2 * n)) for ax in pair]
    t = t.transpose(order).reshape((4,) * n)
    return _apply_per_axis(t, _ANALYSIS, n).reshape(-1)


def coefficients_to_matrix(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    n = (c.size.bit_length() - 1) // 2
    if 4**n != c.size:
        raise PauliError(f"coefficient vector length {c.size} is not a power of 4")
    if n == 0:
        return c.reshape(1, 1).copy()
    t = _apply_per_axis(c.reshape((4,) * n), _SYNTHESIS, n)
    t = t.reshape((2, 2) * n)
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    return t.transpose(order).reshape(2**n, 2**n)


@dataclass(frozen=True, eq=False)
class OperatorVector:
    """An operator ``|A>>`` given by its Pauli-basis coefficients."""

    n_sites: int
    coefficients: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).reshape(-1)
        if c.size != 4**self.n_sites:
            raise PauliError(
                f"{c.size} coefficients do not match {self.n_sites} sites"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "OperatorVector":
        c = matrix_to_coefficients(m)
        return cls(int(round(np.log2(np.asarray(m).shape[0]))), c)

    @classmethod
    def from_pauli(cls, p: PauliString | str, coefficient: complex = 1.0) -> "OperatorVector":
        p = PauliString(p) if isinstance(p, str) else p
        c = np.zeros(4 ** len(p), dtype=complex)
        c[p.index] = coefficient
        return cls(len(p), c)

    def to_matrix(self) -> np.ndarray:
        return coefficients_to_matrix(self.coefficients)

    def is_hermitian(self, atol: float = HERMITIAN_DUST) -> bool:
        return bool(np.all(np.abs(self.coefficients.imag) <= atol))

    def __add__(self, other: "OperatorVector") -> "OperatorVector":
        _check_sites(self, other)
        return OperatorVector(self.n_sites, self.coefficients + other.coefficients)

    def __sub__(self, other: "OperatorVector") -> "OperatorVector":
        _check_sites(self, other)
        return OperatorVector(self.n_sites, self.coefficients - other.coefficients)

    def __mul__(self, scalar: complex) -> "OperatorVector":
        return OperatorVector(self.n_sites, self.coefficients * scalar)

    __rmul__ = __mul__


def _check_sites(a: OperatorVector, b: OperatorVector) -> None:
    if a.n_sites != b.n_sites:
        raise PauliError(f"dimension mismatch: {a.n_sites} vs {b.n_sites} sites")


def inner_product(a: OperatorVector, b: OperatorVector) -> complex:
    """``<<A|B>> = sum_mu conj(A_mu) B_mu``."""
    _check_sites(a, b)
    return complex(np.vdot(a.coefficients, b.coefficients))


def superop_to_pauli_basis(
    action: Callable[[np.ndarray], np.ndarray],
    n: int,
    *,
    linearity_checks: int = 3,
    seed: int = 0,
) -> np.ndarray:
    """Matrix ``S[mu, nu] = <<mu|S|nu>>`` of a map on ``2**n`` matrices.

    Column ``nu`` holds the expansion of ``action(nu)``.  If every entry has
    imaginary part below 1e-12 the result is returned as a real array.
    """
    if n > MAX_DENSE_SITES:
        raise PauliError(f"dense superoperators are limited to {MAX_DENSE_SITES} sites")
    dim = 4**n
    columns = np.empty((dim, dim), dtype=complex)
    images = []
    for nu in range(dim):
        basis = PauliString.from_index(nu, n).matrix()
        image = np.asarray(action(basis), dtype=complex)
        images.append(image)
        columns[:, nu] = matrix_to_coefficients(image)

    rng = np.random.default_rng(seed)
    for _ in range(linearity_checks if dim > 1 else 0):
        mu, nu = rng.choice(dim, size=2, replace=False)
        a, b = rng.normal(size=2)
        combo = a * PauliString.from_index(mu, n).matrix() + b * PauliString.from_index(nu, n).matrix()
        lhs = np.asarray(action(combo), dtype=complex)
        rhs = a * images[mu] + b * images[nu]
        scale = max(1.0, np.abs(rhs).max())
        if np.abs(lhs - rhs).max() > 1e-9 * scale:
            raise NonlinearActionError(
                f"action is not linear on basis elements {mu} and {nu}"
            )

    if np.abs(columns.imag).max(initial=0.0) < HERMITIAN_DUST:
        return np.ascontiguousarray(columns.real)
    return columns


@lru_cache(maxsize=None)
def _left_right(key: bytes, side: str) -> np.ndarray:
    op = np.frombuffer(key, dtype=complex).reshape(2, 2)
    if side == "left":
        return superop_to_pauli_basis(lambda m: op @ m, 1, linearity_checks=0).astype(complex)
    return superop_to_pauli_basis(lambda m: m @ op, 1, linearity_checks=0).astype(complex)


def left_multiplication(op: np.ndarray) -> np.ndarray:
    """4x4 Pauli-basis matrix of ``rho -> op @ rho`` on one site."""
    return _left_right(np.ascontiguousarray(op, dtype=complex).tobytes(), "left")


def right_multiplication(op: np.ndarray) -> np.ndarray:
    """4x4 Pauli-basis matrix of ``rho -> rho @ op`` on one site."""
    return _left_right(np.ascontiguousarray(op, dtype=complex).tobytes(), "right")


# A term is a coefficient times a tensor product of single-site 4x4 factors;
# sites not listed carry the identity.
Term = tuple[complex, Mapping[int, np.ndarray]]


def kron_terms(
    terms: Iterable[Term],
    n: int,
    allowed: Sequence[Sequence[int]] | None = None,
    *,
    row_allowed: Sequence[Sequence[int]] | None = None,
    real: bool = True,
) -> sp.csr_matrix:
    """Sum of tensor-product terms as a sparse matrix in the Pauli basis.

    ``allowed[s]`` restricts site ``s`` to a subset of its four basis letters;
    ``row_allowed`` optionally gives a different subset for the output side.
    """
    if allowed is None:
        allowed = [range(4)] * n
    cols = [np.asarray(list(a), dtype=np.intp) for a in allowed]
    rows = cols if row_allowed is None else [np.asarray(list(a), dtype=np.intp) for a in row_allowed]
    shape = (
        int(np.prod([len(r) for r in rows])) if n else 1,
        int(np.prod([len(c) for c in cols])) if n else 1,
    )
    eye4 = np.eye(4, dtype=complex)
    pieces = []
    for coef, factors in terms:
        mat = sp.identity(1, dtype=complex, format="coo")
        run = 1  # pending identity dimension, merged into one kron
        for s in range(n):
            if s not in factors and len(rows[s]) == len(cols[s]) and np.array_equal(rows[s], cols[s]):
                run *= len(cols[s])
                continue
            if run > 1:
                mat = sp.kron(mat, sp.identity(run, dtype=complex, format="coo"), format="coo")
                run = 1
            f = np.asarray(factors[s]) if s in factors else eye4
            mat = sp.kron(mat, sp.coo_matrix(f[np.ix_(rows[s], cols[s])]), format="coo")
        if run > 1:
            mat = sp.kron(mat, sp.identity(run, dtype=complex, format="coo"), format="coo")
        pieces.append((coef, mat))
    if pieces:
        data = np.concatenate([c * m.data for c, m in pieces])
        r = np.concatenate([m.row for _, m in pieces])
        c_ = np.concatenate([m.col for _, m in pieces])
        total = sp.coo_matrix((data, (r, c_)), shape=shape).tocsr()
    else:
        total = sp.csr_matrix(shape, dtype=complex)
    total.sum_duplicates()
    if real:
        if total.nnz and np.abs(total.data.imag).max() > 1e-9 * max(1.0, np.abs(total.data).max()):
            raise ValueError("term sum is not real in the Pauli basis")
        out = total.real.tocsr()
        out.data[np.abs(out.data) < HERMITIAN_DUST] = 0.0
        out.eliminate_zeros()
        return out
    return total


def pauli_expectation_weights(bloch: Sequence[Sequence[float]]) -> np.ndarray:
    """``Tr(rho mu)`` for every string ``mu`` when ``rho`` is a product state.

    Per site the weights are ``(1, bz, bx, by)`` in basis order.
    """
    out = np.ones(1)
    for bx, by, bz in bloch:
        out = np.kron(out, np.array([1.0, bz, bx, by]))
    return out
