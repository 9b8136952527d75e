"""Ising-type spin models with single-site Lindblad dissipation.

The Hamiltonian is ``H = sum_{j<k} h_jk Z_j Z_k + sum_j delta_j Z_j`` where each
stored coupling ``h_jk`` is the *total* coefficient of ``Z_j Z_k`` (an ordered
pair sum ``sum_{j != k} h_{j,k}`` contributes ``2 h_{j,k}`` here).  Dissipation
follows

    D(rho) = sum_{j,a} rate_ja / 2 * (2 J rho J^dag - {J^dag J, rho}).
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import (
    IDENTITY,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    OperatorVector,
    PauliError,
    Term,
    kron_terms,
    left_multiplication,
    right_multiplication,
)

MAX_DENSE_HAMILTONIAN_SITES = 14


class ModelError(ValueError):
    """A model violates one of its structural invariants."""


class SupportError(ValueError):
    """An operator's support is incompatible with the requested action."""


@dataclass(frozen=True, eq=False)
class Jump:
    site: int
    matrix: np.ndarray = field(repr=False)
    rate: float
    label: str = "custom"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ModelError(f"jump matrix on site {self.site} must be 2x2, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "rate", float(self.rate))
        if not self.rate >= 0:
            raise ModelError(f"rate on site {self.site} must be non-negative, got {self.rate}")


@dataclass(frozen=True, eq=False)
class SpinModel:
    n_sites: int
    couplings: tuple[tuple[int, int, float], ...] = ()
    fields: tuple[float, ...] | None = None
    jumps: tuple[Jump, ...] = ()

    def __post_init__(self):
        if self.n_sites < 1:
            raise ModelError("n_sites must be positive")
        seen = set()
        normalized = []
        for j, k, h in self.couplings:
            j, k = int(j), int(k)
            if j == k:
                raise ModelError(f"coupling ({j}, {k}) joins a site to itself")
            for s in (j, k):
                if not 0 <= s < self.n_sites:
                    raise ModelError(f"coupling site {s} outside 0..{self.n_sites - 1}")
            key = (min(j, k), max(j, k))
            if key in seen:
                raise ModelError(f"duplicate coupling for pair {key}")
            seen.add(key)
            normalized.append((key[0], key[1], float(h)))
        object.__setattr__(self, "couplings", tuple(normalized))
        if self.fields is not None:
            f = tuple(float(x) for x in self.fields)
            if len(f) != self.n_sites:
                raise ModelError(f"{len(f)} fields given for {self.n_sites} sites")
            object.__setattr__(self, "fields", f)
        for jump in self.jumps:
            if not 0 <= jump.site < self.n_sites:
                raise ModelError(f"jump site {jump.site} outside 0..{self.n_sites - 1}")
        object.__setattr__(self, "jumps", tuple(self.jumps))

    def field(self, site: int) -> float:
        return 0.0 if self.fields is None else self.fields[site]

    def jumps_on(self, site: int) -> list[Jump]:
        return [jp for jp in self.jumps if jp.site == site]

    def max_rate(self) -> float:
        return max((jp.rate for jp in self.jumps), default=0.0)

    def neighbors(self, site: int) -> set[int]:
        out = set()
        for j, k, _ in self.couplings:
            if j == site:
                out.add(k)
            elif k == site:
                out.add(j)
        return out

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "couplings": [list(c) for c in self.couplings],
            "fields": None if self.fields is None else list(self.fields),
            "jumps": [
                {
                    "site": jp.site,
                    "rate": jp.rate,
                    "label": jp.label,
                    "matrix": [[v.real, v.imag] for v in jp.matrix.reshape(-1)],
                }
                for jp in self.jumps
            ],
        }

    def model_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def relabel(self, sites: Sequence[int], *, couplings=None, field_sites=None) -> "SpinModel":
        """Restrict to ``sites`` (renumbered 0..m-1 in the given order).

        ``couplings`` and ``field_sites`` select which Hamiltonian terms to keep;
        by default every term lying entirely inside ``sites`` survives.
        """
        index = {s: i for i, s in enumerate(sites)}
        if couplings is None:
            couplings = [c for c in self.couplings if c[0] in index and c[1] in index]
        if field_sites is None:
            field_sites = sites
        fields = None
        if self.fields is not None:
            fields = [self.fields[s] if s in field_sites else 0.0 for s in sites]
        jumps = [
            Jump(index[jp.site], jp.matrix, jp.rate, jp.label)
            for jp in self.jumps if jp.site in index
        ]
        return SpinModel(
            len(sites),
            tuple((index[j], index[k], h) for j, k, h in couplings),
            None if fields is None else tuple(fields),
            tuple(jumps),
        )


@dataclass(frozen=True)
class LatticeSpec:
    kind: str
    extent: tuple[int, ...]
    periodic: bool = False
    range: int = 1
    coupling: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.kind not in ("chain", "square"):
            raise ModelError(f"unknown lattice kind {self.kind!r}")
        dims = 1 if self.kind == "chain" else 2
        if len(self.extent) != dims or any(e < 1 for e in self.extent):
            raise ModelError(f"{self.kind} lattice needs {dims} positive extent(s)")
        if self.range < 1:
            raise ModelError("interaction range must be a positive integer")
        if len(self.coupling) != self.range:
            raise ModelError(
                f"coupling law needs one value per distance 1..{self.range}, got {len(self.coupling)}"
            )

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extent))

    def coordinates(self, site: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(site, self.extent))

    def distance(self, a: int, b: int) -> int:
        total = 0
        for ca, cb, size in zip(self.coordinates(a), self.coordinates(b), self.extent):
            d = abs(ca - cb)
            if self.periodic:
                d = min(d, size - d)
            total += d
        return total

    def couplings(self) -> tuple[tuple[int, int, float], ...]:
        out = []
        for a, b in itertools.combinations(range(self.n_sites), 2):
            d = self.distance(a, b)
            if 1 <= d <= self.range and self.coupling[d - 1] != 0.0:
                out.append((a, b, float(self.coupling[d - 1])))
        return tuple(out)


@dataclass(frozen=True)
class InitialProductState:
    bloch: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        vecs = tuple(tuple(float(x) for x in b) for b in self.bloch)
        for i, b in enumerate(vecs):
            if len(b) != 3:
                raise ModelError(f"Bloch vector on site {i} needs three components")
            if sum(x * x for x in b) > 1 + 1e-12:
                raise ModelError(f"Bloch vector on site {i} has norm above 1")
        object.__setattr__(self, "bloch", vecs)

    @classmethod
    def uniform(cls, n: int, b: Sequence[float]) -> "InitialProductState":
        return cls(tuple(tuple(b) for _ in range(n)))

    @property
    def n_sites(self) -> int:
        return len(self.bloch)

    def is_pure(self, atol: float = 1e-12) -> bool:
        return all(abs(sum(x * x for x in b) - 1) <= atol for b in self.bloch)

    def site_density(self, site: int) -> np.ndarray:
        bx, by, bz = self.bloch[site]
        return 0.5 * (IDENTITY + bx * SIGMA_X + by * SIGMA_Y + bz * SIGMA_Z)

    def density_matrix(self, sites: Iterable[int] | None = None) -> np.ndarray:
        sites = range(self.n_sites) if sites is None else sites
        out = np.ones((1, 1), dtype=complex)
        for s in sites:
            out = np.kron(out, self.site_density(s))
        return out

    def site_ket(self, site: int) -> np.ndarray:
        bx, by, bz = self.bloch[site]
        theta = np.arccos(np.clip(bz, -1.0, 1.0))
        phi = np.arctan2(by, bx)
        return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])

    def statevector(self) -> np.ndarray:
        if not self.is_pure(1e-10):
            raise ModelError("state vector requested for a mixed product state")
        out = np.ones(1, dtype=complex)
        for s in range(self.n_sites):
            out = np.kron(out, self.site_ket(s))
        return out

    def expectation(self, letters: Mapping[int, str]) -> float:
        value = 1.0
        for site, c in letters.items():
            bx, by, bz = self.bloch[site]
            value *= {"I": 1.0, "X": bx, "Y": by, "Z": bz}[c.upper()]
        return value


NAMED_STATES = {
    "+x": (1.0, 0.0, 0.0), "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0), "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0), "-z": (0.0, 0.0, -1.0),
}

PRESETS = ("dephasing_z", "dephasing_xy", "emission_z", "pump_z", "emission_xy", "rotated_tfim")


def jump_preset(name: str, theta: float = 0.0) -> np.ndarray:
    """Named single-site jump operators that keep the model solvable."""
    in_plane = np.cos(theta) * SIGMA_X + np.sin(theta) * SIGMA_Y
    table = {
        "dephasing_z": lambda: SIGMA_Z,
        "dephasing_xy": lambda: in_plane,
        "emission_z": lambda: SIGMA_MINUS,
        "pump_z": lambda: SIGMA_PLUS,
        "emission_xy": lambda: SIGMA_Z + 1j * in_plane,
        "rotated_tfim": lambda: SIGMA_Y - 1j * SIGMA_Z,
    }
    if name not in table:
        raise ModelError(f"unknown jump preset {name!r}; choose from {', '.join(PRESETS)}")
    return np.array(table[name](), dtype=complex)


def hamiltonian_diagonal(model: SpinModel) -> np.ndarray:
    """Diagonal of ``H`` in the computational z basis (site 0 = leading bit)."""
    n = model.n_sites
    if n > MAX_DENSE_HAMILTONIAN_SITES:
        raise ModelError(f"dense Hamiltonian limited to {MAX_DENSE_HAMILTONIAN_SITES} sites")
    idx = np.arange(2**n)
    spins = 1 - 2 * ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1)
    diag = np.zeros(2**n)
    for j, k, h in model.couplings:
        diag += h * spins[:, j] * spins[:, k]
    if model.fields is not None:
        diag += spins @ np.asarray(model.fields)
    return diag


def build_hamiltonian(model: SpinModel) -> np.ndarray:
    return np.diag(hamiltonian_diagonal(model)).astype(complex)


def hamiltonian_terms(model: SpinModel) -> list[tuple[tuple[int, ...], float]]:
    terms = [((j, k), h) for j, k, h in model.couplings]
    if model.fields is not None:
        terms += [((j,), d) for j, d in enumerate(model.fields) if d != 0.0]
    return terms


def apply_local(op: np.ndarray, rho: np.ndarray, site: int, n: int, side: str = "left") -> np.ndarray:
    """``op_site @ rho`` (or ``rho @ op_site``) for a 2x2 ``op`` on one site."""
    dim = 2**n
    if side == "left":
        t = rho.reshape(2**site, 2, 2 ** (n - site - 1), dim)
        return np.einsum("ab,ibjk->iajk", op, t).reshape(dim, dim)
    t = rho.reshape(dim, 2**site, 2, 2 ** (n - site - 1))
    return np.einsum("kibj,ba->kiaj", t, op).reshape(dim, dim)


def _resolve_support(model: SpinModel, n_op: int, support):
    if support is None:
        if n_op != model.n_sites:
            raise SupportError(f"operator has {n_op} sites, model has {model.n_sites}")
        return model
    support = list(support)
    if len(support) != n_op:
        raise SupportError(f"support lists {len(support)} sites for a {n_op}-site operator")
    inside = set(support)
    for j, k, _ in model.couplings:
        if (j in inside) != (k in inside):
            raise SupportError(f"coupling ({j}, {k}) straddles the declared support")
    return model.relabel(support)


def _lindblad(model: SpinModel, op: np.ndarray, adjoint: bool) -> np.ndarray:
    n = model.n_sites
    diag = hamiltonian_diagonal(model)
    sign = 1.0 if adjoint else -1.0
    out = sign * 1j * (diag[:, None] - diag[None, :]) * op
    for jp in model.jumps:
        j, jd = jp.matrix, jp.matrix.conj().T
        jdj = jd @ j
        if adjoint:
            sandwich = apply_local(j, apply_local(jd, op, jp.site, n, "left"), jp.site, n, "right")
        else:
            sandwich = apply_local(jd, apply_local(j, op, jp.site, n, "left"), jp.site, n, "right")
        anti = apply_local(jdj, op, jp.site, n, "left") + apply_local(jdj, op, jp.site, n, "right")
        out = out + jp.rate / 2 * (2 * sandwich - anti)
    return out


def liouvillian_action(model: SpinModel, rho: OperatorVector, support=None) -> OperatorVector:
    """``L(rho) = -i[H, rho] + D(rho)``.

    With ``support`` the operator lives on those model sites (in order); jumps
    elsewhere are skipped and couplings crossing the boundary are rejected.
    """
    local = _resolve_support(model, rho.n_sites, support)
    return OperatorVector.from_matrix(_lindblad(local, rho.to_matrix(), adjoint=False))


def adjoint_liouvillian_action(model: SpinModel, op: OperatorVector, support=None) -> OperatorVector:
    """``L^dag(O) = i[H, O] + sum rate/2 (2 J^dag O J - {J^dag J, O})``."""
    local = _resolve_support(model, op.n_sites, support)
    return OperatorVector.from_matrix(_lindblad(local, op.to_matrix(), adjoint=True))


def single_site_dissipator(matrix: np.ndarray, rate: float) -> np.ndarray:
    """4x4 Pauli-basis matrix of one jump channel, order (1, z, x, y)."""
    j = np.asarray(matrix, dtype=complex)
    jd = j.conj().T
    jdj = jd @ j
    m = rate / 2 * (
        2 * left_multiplication(j) @ right_multiplication(jd)
        - left_multiplication(jdj)
        - right_multiplication(jdj)
    )
    return np.ascontiguousarray(m.real)


def pauli_liouvillian_terms(model: SpinModel, part: str = "full") -> list[Term]:
    """Tensor-product terms of ``L`` in the Pauli basis.

    ``part`` is ``"full"``, ``"dissipator"`` or ``"hamiltonian"`` (the latter
    being the matrix of ``-i[H, .]``).
    """
    terms: list[Term] = []
    if part in ("full", "hamiltonian"):
        lz, rz = left_multiplication(SIGMA_Z), right_multiplication(SIGMA_Z)
        for j, k, h in model.couplings:
            terms.append((-1j * h, {j: lz, k: lz}))
            terms.append((1j * h, {j: rz, k: rz}))
        if model.fields is not None:
            for j, d in enumerate(model.fields):
                if d != 0.0:
                    terms.append((-1j * d, {j: lz - rz}))
    if part in ("full", "dissipator"):
        for site in range(model.n_sites):
            chans = model.jumps_on(site)
            if chans:
                mat = sum(single_site_dissipator(jp.matrix, jp.rate) for jp in chans)
                terms.append((1.0, {site: mat.astype(complex)}))
    if part not in ("full", "dissipator", "hamiltonian"):
        raise ValueError(f"unknown Liouvillian part {part!r}")
    return terms


def pauli_liouvillian(model: SpinModel, part: str = "full"):
    """Sparse real Pauli-basis matrix of the Schroedinger-picture Liouvillian."""
    return kron_terms(pauli_liouvillian_terms(model, part), model.n_sites)


__all__ = [
    "Jump", "SpinModel", "LatticeSpec", "InitialProductState", "ModelError", "SupportError",
    "PauliError", "NAMED_STATES", "PRESETS", "jump_preset", "build_hamiltonian",
    "hamiltonian_diagonal", "hamiltonian_terms", "liouvillian_action",
    "adjoint_liouvillian_action", "single_site_dissipator", "pauli_liouvillian_terms",
    "pauli_liouvillian", "apply_local",
]
