"""Exact observables of solvable models from finite patches.

For an observable supported on sites ``A`` the only sites that matter are
``A`` and its Hamiltonian neighbours ``B``.  The patch ``A | B`` is evolved
with the Hamiltonian terms touching ``A``, the jumps on the patch, and the
reduced product initial state; everything else is traced out up front.

Two independent routes are provided.  The Schroedinger route evolves the
reduced density matrix in the full Pauli basis of the patch.  The Heisenberg
route evolves the observable inside the invariant subspace of operators that
are arbitrary on ``A`` but diagonal (letters ``I``/``Z``) on ``B``, and checks
at every sample time that nothing leaks out of it.
"""
from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg as la
from scipy.integrate import solve_ivp

from . import fullsolver
from .model import InitialProductState, SpinModel, pauli_liouvillian, pauli_liouvillian_terms
from .pauli import LETTER_INDEX, kron_terms, pauli_expectation_weights
from .solvability import check_solvable

log = logging.getLogger(__name__)

DENSE_SCHRODINGER_MAX_SITES = 5
SCHRODINGER_MAX_SITES = 7
DENSE_EXPM_MAX_DIM = 4096
HEISENBERG_MAX_DIM = 2**24
LEAK_TOL = 1e-10
RK_RTOL = 1e-9
RK_ATOL = 1e-12

_OBSERVABLE = re.compile(r"^\s*([xyzXYZ]+)\s*@\s*(\d+(?:\s*,\s*\d+)*)\s*$")


class NotSolvableError(ValueError):
    """The model is outside the solvable family and no override was given."""


class SubspaceLeakError(RuntimeError):
    """Heisenberg evolution left the invariant subspace."""


class PatchTooLargeError(RuntimeError):
    """The reduced problem exceeds the size caps."""


def parse_observable(text: str) -> dict[int, str]:
    """``"xy@2,7"`` -> ``{2: "X", 7: "Y"}``."""
    m = _OBSERVABLE.match(text)
    if not m:
        raise ValueError(f"observable {text!r} is not of the form <axes>@<sites>")
    axes = m.group(1).upper()
    sites = [int(s) for s in m.group(2).split(",")]
    if len(axes) != len(sites):
        raise ValueError(f"observable {text!r}: {len(axes)} axes for {len(sites)} sites")
    if len(set(sites)) != len(sites):
        raise ValueError(f"observable {text!r} repeats a site")
    return dict(zip(sites, axes))


def observable_label(obs: Mapping[int, str]) -> str:
    sites = sorted(obs)
    return "".join(obs[s].lower() for s in sites) + "@" + ",".join(map(str, sites))


@dataclass
class ObservableSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""
    stderr: np.ndarray | None = None
    method: str = ""
    patch_size: int = 0
    exact: bool = True


def neighbor_set(model: SpinModel, a: Iterable[int]) -> tuple[int, ...]:
    """Sites outside ``a`` sharing a coupling with some site of ``a``."""
    a = set(a)
    if not a:
        raise ValueError("support A must be non-empty")
    for s in a:
        if not 0 <= s < model.n_sites:
            raise ValueError(f"site {s} outside 0..{model.n_sites - 1}")
    out = set()
    for j, k, _ in model.couplings:
        if j in a and k not in a:
            out.add(k)
        elif k in a and j not in a:
            out.add(j)
    return tuple(sorted(out))


@dataclass
class ReducedProblem:
    model: SpinModel
    A: tuple[int, ...]
    B: tuple[int, ...]
    patch: tuple[int, ...]
    local: SpinModel
    bloch: tuple[tuple[float, float, float], ...]
    exact: bool = True

    @property
    def size(self) -> int:
        return len(self.patch)

    @property
    def index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.patch)}

    def density_matrix(self) -> np.ndarray:
        return InitialProductState(self.bloch).density_matrix()

    def rho_coefficients(self) -> np.ndarray:
        return pauli_expectation_weights(self.bloch) / 2**self.size

    def covers_model(self) -> bool:
        return self.size == self.model.n_sites


def build_reduced(
    model: SpinModel,
    a: Iterable[int],
    psi0: InitialProductState,
    *,
    force: bool = False,
    extra: Iterable[int] = (),
) -> ReducedProblem:
    """Reduced problem on ``A | B``.

    ``extra`` enlarges the evolved region by further sites; inside an enlarged
    region every Hamiltonian term and jump is kept.
    """
    a = tuple(sorted(set(a)))
    b = neighbor_set(model, a)
    if psi0.n_sites != model.n_sites:
        raise ValueError(f"initial state has {psi0.n_sites} sites, model has {model.n_sites}")
    exact = True
    if not check_solvable(model).passed:
        if not force:
            raise NotSolvableError("model violates the solvability constraint; pass force=True to override")
        exact = False
    extra = tuple(sorted(set(extra) - set(a) - set(b)))
    patch = tuple(sorted(set(a) | set(b) | set(extra)))
    if extra:
        local = model.relabel(patch)
    else:
        inside_a = set(a)
        couplings = [c for c in model.couplings if c[0] in inside_a or c[1] in inside_a]
        local = model.relabel(patch, couplings=couplings, field_sites=inside_a)
    bloch = tuple(psi0.bloch[s] for s in patch)
    return ReducedProblem(model, a, b, patch, local, bloch, exact)


def _propagate_dense(gen: np.ndarray, v0: np.ndarray, times: np.ndarray):
    """Yield ``expm(gen * t) @ v0`` for each sample time."""
    steps = np.diff(np.concatenate([[0.0], times]))
    uniform = steps.size > 1 and np.allclose(steps[1:], steps[1], rtol=1e-12, atol=0.0)
    cache: dict[float, np.ndarray] = {}
    v = v0
    for i, dt in enumerate(steps):
        if dt < 0:
            raise ValueError("sample times must be non-decreasing and non-negative")
        if dt > 0:
            key = float(steps[1]) if (uniform and i >= 1) else float(dt)
            if key not in cache:
                cache[key] = la.expm(gen * key)
            v = cache[key] @ v
        yield v


def _propagate_rk(gen, v0: np.ndarray, times: np.ndarray):
    t_end = float(times[-1]) if times.size else 0.0
    if t_end == 0.0:
        for _ in times:
            yield v0
        return
    sol = solve_ivp(
        lambda _t, y: gen @ y, (0.0, t_end), v0, method="DOP853",
        t_eval=times, rtol=RK_RTOL, atol=RK_ATOL,
    )
    if not sol.success:
        raise RuntimeError(f"integrator failed: {sol.message}")
    for k in range(times.size):
        yield sol.y[:, k]


def _local_observable(problem: ReducedProblem, obs: Mapping[int, str]) -> dict[int, str]:
    idx = problem.index
    for s in obs:
        if s not in problem.A:
            raise ValueError(f"observable site {s} is not in the support A={problem.A}")
    return {idx[s]: c.upper() for s, c in obs.items()}


def _schrodinger(problem: ReducedProblem, obs: Mapping[int, str], times: np.ndarray) -> np.ndarray:
    m = problem.size
    if m > SCHRODINGER_MAX_SITES:
        raise PatchTooLargeError(f"Schroedinger route limited to {SCHRODINGER_MAX_SITES} patch sites, got {m}")
    local_obs = _local_observable(problem, obs)
    target = 0
    for s in range(m):
        target = 4 * target + LETTER_INDEX[local_obs.get(s, "I")]
    gen = pauli_liouvillian(problem.local)
    r0 = problem.rho_coefficients()
    scale = 2.0**m
    if 4**m <= DENSE_EXPM_MAX_DIM and m <= DENSE_SCHRODINGER_MAX_SITES:
        states = _propagate_dense(gen.toarray(), r0, times)
    else:
        states = _propagate_rk(gen, r0, times)
    return np.array([scale * v[target] for v in states])


@dataclass
class InvariantSubspace:
    allowed: list[list[int]]
    generator: object
    leaks: list
    weights: np.ndarray

    @property
    def dimension(self) -> int:
        return self.weights.size


def invariant_subspace(problem: ReducedProblem) -> InvariantSubspace:
    """Adjoint Liouvillian restricted to operators diagonal outside ``A``."""
    idx = problem.index
    a_local = {idx[s] for s in problem.A}
    m = problem.size
    allowed = [[0, 1, 2, 3] if s in a_local else [0, 1] for s in range(m)]
    dim = int(np.prod([len(x) for x in allowed]))
    if dim > HEISENBERG_MAX_DIM:
        raise PatchTooLargeError(f"invariant subspace dimension {dim} exceeds {HEISENBERG_MAX_DIM}")
    terms = [
        (coef, {s: f.T for s, f in factors.items()})
        for coef, factors in pauli_liouvillian_terms(problem.local)
    ]
    generator = kron_terms(terms, m, allowed)
    leaks = []
    for s in range(m):
        if s in a_local:
            continue
        touching = [t for t in terms if s in t[1]]
        if not touching:
            continue
        rows = list(allowed)
        rows[s] = [2, 3]
        leaks.append(kron_terms(touching, m, allowed, row_allowed=rows))
    weights = np.ones(1)
    for s, (bx, by, bz) in enumerate(problem.bloch):
        weights = np.kron(weights, np.array([1.0, bz, bx, by])[allowed[s]])
    return InvariantSubspace(allowed, generator, leaks, weights)


def heisenberg_invariant_evolve(
    problem: ReducedProblem,
    obs: Mapping[int, str],
    times: Sequence[float],
    *,
    leak_tol: float = LEAK_TOL,
) -> ObservableSeries:
    """Evolve ``obs`` under ``L^dag`` inside the invariant subspace."""
    times = np.asarray(times, dtype=float)
    local_obs = _local_observable(problem, obs)
    sub = invariant_subspace(problem)
    start = 0
    for s, allowed in enumerate(sub.allowed):
        start = len(allowed) * start + allowed.index(LETTER_INDEX[local_obs.get(s, "I")])
    c0 = np.zeros(sub.dimension)
    c0[start] = 1.0
    if sub.dimension <= DENSE_EXPM_MAX_DIM:
        states = _propagate_dense(sub.generator.toarray(), c0, times)
    else:
        states = _propagate_rk(sub.generator, c0, times)
    values = np.empty(times.size)
    for i, c in enumerate(states):
        for leak in sub.leaks:
            worst = float(np.abs(leak @ c).max(initial=0.0))
            if worst > leak_tol:
                raise SubspaceLeakError(
                    f"operator left the invariant subspace at t={times[i]:.6g} (leak {worst:.3g})"
                )
        values[i] = sub.weights @ c
    return ObservableSeries(
        times, values, observable_label(obs), method="heisenberg",
        patch_size=problem.size, exact=problem.exact,
    )


def evolve_observable(
    problem: ReducedProblem,
    obs: Mapping[int, str],
    times: Sequence[float],
    method: str = "auto",
) -> ObservableSeries:
    """``Tr(O exp(t L_AB) rho_AB)`` at the requested times.

    ``method`` is ``"auto"``, ``"schrodinger"``, ``"heisenberg"`` or ``"full"``.
    ``auto`` hands a patch that covers the whole model to the brute-force
    solver, uses the dense Schroedinger route for patches of up to five
    sites, and the invariant subspace otherwise.  Forced non-solvable
    problems have no invariant subspace and always take the Schroedinger
    route.
    """
    times = np.asarray(times, dtype=float)
    label = observable_label(obs)
    if method == "auto":
        if problem.covers_model() and problem.size <= fullsolver.MAX_MATRIX_FREE_SITES:
            method = "full"
        elif problem.size <= DENSE_SCHRODINGER_MAX_SITES or (
            not problem.exact and problem.size <= SCHRODINGER_MAX_SITES
        ):
            method = "schrodinger"
        else:
            method = "heisenberg"
    log.info("observable %s: patch %s (%d sites), method %s", label, problem.patch, problem.size, method)
    if method == "heisenberg":
        return heisenberg_invariant_evolve(problem, obs, times)
    if method == "schrodinger":
        values = _schrodinger(problem, obs, times)
    elif method == "full":
        # the patch is the whole system, so evolve the model itself
        target = problem.model if problem.covers_model() else problem.local
        res = fullsolver.evolve_full(
            target, InitialProductState(problem.bloch), times,
            {label: _local_observable(problem, obs)}, rtol=1e-10, atol=1e-12,
        )
        values = res.expectations[label]
    else:
        raise ValueError(f"unknown method {method!r}")
    return ObservableSeries(times, values, label, method=method, patch_size=problem.size, exact=problem.exact)


def expectation(
    model: SpinModel,
    obs: Mapping[int, str],
    psi0: InitialProductState,
    times: Sequence[float],
    *,
    method: str = "auto",
    force: bool = False,
) -> ObservableSeries:
    problem = build_reduced(model, obs.keys(), psi0, force=force)
    return evolve_observable(problem, obs, times, method)


@dataclass
class CorrelatorResult:
    full: ObservableSeries
    first: ObservableSeries
    second: ObservableSeries

    @property
    def connected(self) -> np.ndarray:
        return self.full.values - self.first.values * self.second.values


def correlator(
    model: SpinModel,
    first: tuple[int, str],
    second: tuple[int, str],
    psi0: InitialProductState,
    times: Sequence[float],
    *,
    method: str = "auto",
    force: bool = False,
) -> CorrelatorResult:
    (j, mu), (k, nu) = first, second
    for axis in (mu, nu):
        if axis.upper() not in "XYZ" or len(axis) != 1:
            raise ValueError(f"correlator axes must be x, y or z, got {axis!r}")
    if j == k:
        raise ValueError("correlator needs two distinct sites")
    pair = expectation(model, {j: mu.upper(), k: nu.upper()}, psi0, times, method=method, force=force)
    one = expectation(model, {j: mu.upper()}, psi0, times, method=method, force=force)
    two = expectation(model, {k: nu.upper()}, psi0, times, method=method, force=force)
    return CorrelatorResult(pair, one, two)


def evolve_many(
    model: SpinModel,
    observables: Sequence[Mapping[int, str]],
    psi0: InitialProductState,
    times: Sequence[float],
    *,
    method: str = "auto",
    force: bool = False,
    workers: int | None = None,
) -> list[ObservableSeries]:
    """Independent observables evaluated in parallel; output order follows input."""
    def one(obs):
        return expectation(model, obs, psi0, times, method=method, force=force)

    if workers == 1 or len(observables) <= 1:
        return [one(o) for o in observables]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, observables))
