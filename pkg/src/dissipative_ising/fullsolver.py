"""Brute-force master-equation oracle for small systems.

Everything here works in the computational basis with column-stacked
vectorization, ``vec(A rho B) = (B^T kron A) vec(rho)``, and shares no code
with the Pauli-basis machinery used by the exact reduction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import DOP853

from .model import InitialProductState, SpinModel

MAX_MATRIX_FREE_SITES = 10
MAX_DENSE_SITES = 6
MAX_SPECTRUM_SITES = 4

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ResourceError(RuntimeError):
    """Requested system exceeds the oracle's size caps."""


def _embed(op: np.ndarray, site: int, n: int) -> sp.csr_matrix:
    return sp.kron(
        sp.kron(sp.identity(2**site, format="csr"), sp.csr_matrix(op)),
        sp.identity(2 ** (n - site - 1), format="csr"),
        format="csr",
    )


def ising_hamiltonian(model: SpinModel) -> sp.csr_matrix:
    """``sum h Z_j Z_k + sum delta_j Z_j`` assembled from embedded Pauli matrices."""
    n = model.n_sites
    z = _PAULI["Z"]
    h = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for j, k, c in model.couplings:
        h = h + c * (_embed(z, j, n) @ _embed(z, k, n))
    if model.fields is not None:
        for j, d in enumerate(model.fields):
            h = h + d * _embed(z, j, n)
    return h.tocsr()


def transverse_ising_hamiltonian(
    n: int, bonds: Sequence[tuple[int, int]], coupling: float, delta: float = 0.0, axis: str = "X"
) -> sp.csr_matrix:
    """``coupling * sum_bonds s_j s_k + delta * sum_j Z_j`` with ``s`` along ``axis``."""
    s = _PAULI[axis.upper()]
    h = sp.csr_matrix((2**n, 2**n), dtype=complex)
    for j, k in bonds:
        h = h + coupling * (_embed(s, j, n) @ _embed(s, k, n))
    for j in range(n):
        if delta:
            h = h + delta * _embed(_PAULI["Z"], j, n)
    return h.tocsr()


def _hamiltonian(model: SpinModel, hamiltonian) -> sp.csr_matrix:
    if hamiltonian is None:
        return ising_hamiltonian(model)
    return sp.csr_matrix(hamiltonian, dtype=complex)


def liouvillian_matrix(model: SpinModel, hamiltonian=None) -> sp.csr_matrix:
    """Sparse column-stacked Liouvillian of dimension ``4**n``."""
    n = model.n_sites
    dim = 2**n
    eye = sp.identity(dim, dtype=complex, format="csr")
    h = _hamiltonian(model, hamiltonian)
    out = -1j * (sp.kron(eye, h) - sp.kron(h.T, eye))
    for jp in model.jumps:
        j = _embed(jp.matrix, jp.site, n)
        jdj = (j.conj().T @ j).tocsr()
        out = out + jp.rate * (
            sp.kron(j.conj(), j) - 0.5 * sp.kron(eye, jdj) - 0.5 * sp.kron(jdj.T, eye)
        )
    return out.tocsr()


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(v.size)))
    return np.asarray(v).reshape(dim, dim, order="F")


def pauli_operator(letters: Mapping[int, str], n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for s in range(n):
        out = np.kron(out, _PAULI[letters.get(s, "I").upper()])
    return out


@dataclass
class FullEvolution:
    times: np.ndarray
    expectations: dict[str, np.ndarray]
    trace_drift: float
    min_eigenvalue: float
    states: np.ndarray | None = None


def _rhs_factory(model: SpinModel, hamiltonian):
    n = model.n_sites
    dim = 2**n
    if hamiltonian is None:
        diag = ising_hamiltonian(model).diagonal().real
        gap = diag[:, None] - diag[None, :]
        coherent = lambda rho: -1j * gap * rho
    else:
        hmat = sp.csr_matrix(hamiltonian, dtype=complex)
        coherent = lambda rho: -1j * (hmat @ rho - (hmat.T @ rho.T).T)

    channels = []
    for jp in model.jumps:
        j = jp.matrix
        channels.append((jp.site, j, j.conj().T, j.conj().T @ j, jp.rate))

    def left(op, rho, site):
        t = rho.reshape(2**site, 2, 2 ** (n - site - 1), dim)
        return np.einsum("ab,ibjk->iajk", op, t).reshape(dim, dim)

    def right(op, rho, site):
        t = rho.reshape(dim, 2**site, 2, 2 ** (n - site - 1))
        return np.einsum("kibj,ba->kiaj", t, op).reshape(dim, dim)

    def rhs(_t, y):
        rho = y.reshape(dim, dim)
        out = coherent(rho)
        for site, j, jd, jdj, rate in channels:
            out = out + rate * (
                right(jd, left(j, rho, site), site)
                - 0.5 * left(jdj, rho, site)
                - 0.5 * right(jdj, rho, site)
            )
        return out.reshape(-1)

    return rhs


def evolve_full(
    model: SpinModel,
    rho0: np.ndarray | InitialProductState,
    times: Sequence[float],
    observables: Mapping[str, Mapping[int, str]] | None = None,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    hamiltonian=None,
    store_states: bool = False,
    mode: str = "rk",
    check_positivity: bool | None = None,
) -> FullEvolution:
    """Integrate ``d rho/dt = L(rho)`` and sample Pauli expectation values.

    ``mode="rk"`` uses adaptive DOP853 stepping with dense output (the
    integrator is never restarted at sample times); ``mode="expm"`` uses the
    dense propagator and needs ``n <= 6``.
    """
    n = model.n_sites
    if n > MAX_MATRIX_FREE_SITES:
        raise ResourceError(f"full evolution limited to {MAX_MATRIX_FREE_SITES} sites")
    if mode == "expm" and n > MAX_DENSE_SITES:
        raise ResourceError(f"dense-matrix mode limited to {MAX_DENSE_SITES} sites")
    if isinstance(rho0, InitialProductState):
        rho0 = rho0.density_matrix()
    rho0 = np.asarray(rho0, dtype=complex)
    times = np.asarray(times, dtype=float)
    observables = dict(observables or {})
    ops = {name: pauli_operator(letters, n) for name, letters in observables.items()}
    values = {name: np.empty(times.size) for name in ops}
    states = np.empty((times.size,) + rho0.shape, dtype=complex) if store_states else None
    drift = 0.0
    min_eig = np.inf
    if check_positivity is None:
        check_positivity = n <= 7

    def record(i, rho):
        nonlocal drift, min_eig
        rho = 0.5 * (rho + rho.conj().T)
        drift = max(drift, abs(np.trace(rho).real - 1.0))
        if check_positivity:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(rho).min()))
        for name, op in ops.items():
            values[name][i] = np.einsum("ij,ji->", op, rho).real
        if states is not None:
            states[i] = rho

    if mode == "expm":
        lmat = liouvillian_matrix(model, hamiltonian).toarray()
        v = vec(rho0)
        t_prev = times[0] if times.size else 0.0
        v = la.expm(lmat * t_prev) @ v if t_prev else v
        propagators: dict[float, np.ndarray] = {}
        for i, t in enumerate(times):
            if t != t_prev:
                # uniform grids reuse one propagator; keys are rounded so float jitter does not defeat the cache
                step = float(t - t_prev)
                key = round(step, 12)
                if key not in propagators:
                    propagators[key] = la.expm(lmat * step)
                v = propagators[key] @ v
                t_prev = t
            record(i, unvec(v))
    elif mode == "rk":
        rhs = _rhs_factory(model, hamiltonian)
        y0 = rho0.reshape(-1)
        t0 = 0.0
        if times.size and times[0] < t0:
            raise ValueError("sample times must be non-negative")
        t_end = float(times[-1]) if times.size else 0.0
        i = 0
        while i < times.size and times[i] == t0:
            record(i, rho0)
            i += 1
        if i < times.size:
            solver = DOP853(rhs, t0, y0, t_end, rtol=rtol, atol=atol)
            while i < times.size:
                if solver.status != "running":
                    raise RuntimeError(f"integrator stopped: {solver.status}")
                msg = solver.step()
                if msg is not None and solver.status == "failed":
                    raise RuntimeError(f"integrator failed: {msg}")
                interp = solver.dense_output()
                while i < times.size and times[i] <= solver.t:
                    y = solver.y if times[i] == solver.t else interp(times[i])
                    record(i, y.reshape(rho0.shape))
                    i += 1
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return FullEvolution(times, values, drift, min_eig if np.isfinite(min_eig) else np.nan, states)


@dataclass
class SteadyState:
    rho: np.ndarray
    null_dimension: int
    residual: float

    @property
    def unique(self) -> bool:
        return self.null_dimension == 1


def steady_state(model: SpinModel, hamiltonian=None, null_tol: float = 1e-8) -> SteadyState:
    """Null space of the dense Liouvillian; a representative when degenerate.

    The representative is the projection of the identity onto the null space,
    normalized to unit trace.
    """
    if model.n_sites > MAX_DENSE_SITES:
        raise ResourceError(f"steady state limited to {MAX_DENSE_SITES} sites")
    lmat = liouvillian_matrix(model, hamiltonian).toarray()
    _, s, vh = np.linalg.svd(lmat)
    small = s < null_tol * max(s[0], 1.0)
    null = vh[small].conj().T if small.any() else vh[-1:].conj().T
    identity = vec(np.eye(2**model.n_sites))
    v = null @ (null.conj().T @ identity)
    if np.linalg.norm(v) < 1e-12:
        v = null[:, 0]
    rho = unvec(v)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(np.abs(lmat @ vec(rho)).max())
    return SteadyState(rho, int(null.shape[1]), residual)


def liouvillian_spectrum(model: SpinModel, hamiltonian=None) -> np.ndarray:
    """All ``4**n`` eigenvalues, sorted by (real, imag)."""
    if model.n_sites > MAX_SPECTRUM_SITES:
        raise ResourceError(f"dense spectrum limited to {MAX_SPECTRUM_SITES} sites")
    eig = np.linalg.eigvals(liouvillian_matrix(model, hamiltonian).toarray())
    return eig[np.lexsort((eig.imag, eig.real))]


def commutator_norm(a: np.ndarray, b) -> float:
    b = b.toarray() if sp.issparse(b) else np.asarray(b)
    return float(np.linalg.norm(a @ b - b @ a))
