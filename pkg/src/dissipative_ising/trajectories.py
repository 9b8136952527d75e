"""Stochastic unraveling of Ising dephasing by white-noise fields.

Each trajectory is a pure state driven by the Ising Hamiltonian and by
random fields ``Delta_j(t)`` with ``<Delta_j(t) Delta_k(s)> = gamma_j
delta_jk delta(t - s)``.  Over one step the noise enters only through its
integral ``W_j ~ Normal(0, gamma_j dt)``, applied exactly as the rotation
``exp(-i W_j n_j.sigma_j)``; the Ising part is split symmetrically around it.
Averaging over the noise reproduces the master equation with Hermitian jumps
``n_j.sigma_j`` at rates ``gamma_j``.

Two frames are supported.  ``"zz"`` is the solvable frame: diagonal Z-Z
couplings with in-plane noise.  ``"xx"`` rotates every spin so that the
couplings are X-X and the noise is along Z; there the Ising step is applied
after a Walsh-Hadamard basis change.  Observables and initial states are
always given in the solvable frame.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .fullsolver import ResourceError
from .model import InitialProductState, Jump, SpinModel, hamiltonian_diagonal, jump_preset
from .reduction import ObservableSeries, expectation, observable_label

log = logging.getLogger(__name__)

MAX_TRAJECTORY_SITES = 14
DT_GUARD = 0.1
REDUCTION_BLOCK = 64
ZERO_STDERR_ATOL = 1e-10

FRAMES = {"zz": kernels._kernels_py.FRAME_ZZ, "xx": kernels._kernels_py.FRAME_XX}
# solvable-frame letter -> (physical-frame letter, sign)
_TO_XX = {"X": ("Z", -1.0), "Y": ("Y", 1.0), "Z": ("X", 1.0)}


class TimeStepError(ValueError):
    """Step too coarse for the splitting scheme."""


@dataclass(frozen=True)
class NoisyIsing:
    """Ising couplings plus per-site in-plane noise ``cos(theta) X + sin(theta) Y``."""

    n_sites: int
    couplings: tuple[tuple[int, int, float], ...]
    gamma: tuple[float, ...]
    theta: tuple[float, ...] | None = None
    fields: tuple[float, ...] | None = None

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if len(g) != self.n_sites or min(g, default=0.0) < 0:
            raise ValueError("need one non-negative noise strength per site")
        object.__setattr__(self, "gamma", g)
        th = (0.0,) * self.n_sites if self.theta is None else tuple(float(x) for x in self.theta)
        if len(th) != self.n_sites:
            raise ValueError("need one noise angle per site")
        object.__setattr__(self, "theta", th)

    @classmethod
    def uniform(cls, n_sites, couplings, gamma: float, theta: float = 0.0, fields=None):
        return cls(n_sites, tuple(couplings), (gamma,) * n_sites, (theta,) * n_sites, fields)

    @classmethod
    def from_model(cls, model: SpinModel) -> "NoisyIsing":
        """Read noise strengths off Hermitian in-plane jumps, one per site at most."""
        gamma = [0.0] * model.n_sites
        theta = [0.0] * model.n_sites
        for site in range(model.n_sites):
            jumps = model.jumps_on(site)
            if len(jumps) > 1:
                raise ValueError(f"site {site}: trajectories support a single noise channel per site")
            if not jumps:
                continue
            m = jumps[0].matrix
            off = m[1, 0]
            ok = abs(m[0, 0]) < 1e-12 and abs(m[1, 1]) < 1e-12 and abs(m[0, 1] - np.conj(off)) < 1e-12
            if not ok or abs(off) < 1e-12:
                raise ValueError(
                    f"site {site}: only Hermitian in-plane dephasing can be unraveled by real noise"
                )
            gamma[site] = jumps[0].rate * abs(off) ** 2
            theta[site] = float(np.angle(off))
        return cls(model.n_sites, model.couplings, tuple(gamma), tuple(theta), model.fields)

    def to_model(self) -> SpinModel:
        jumps = tuple(
            Jump(s, jump_preset("dephasing_xy", t), g, "dephasing_xy")
            for s, (g, t) in enumerate(zip(self.gamma, self.theta)) if g > 0
        )
        return SpinModel(self.n_sites, self.couplings, self.fields, jumps)

    def energy_scale(self) -> float:
        scale = max((abs(h) for _, _, h in self.couplings), default=0.0)
        if self.fields is not None:
            scale = max(scale, max(abs(x) for x in self.fields))
        return scale


@dataclass
class TrajectoryEnsemble:
    times: np.ndarray
    labels: list[str]
    mean: np.ndarray
    std: np.ndarray
    M: int
    dt: float
    seed: int
    frame: str = "zz"
    start_index: int = 0
    backend: str = ""
    model_hash: str = ""
    max_norm_error: float = 0.0

    @property
    def stderr(self) -> np.ndarray:
        if self.M < 2:
            return np.zeros_like(self.mean)
        return self.std / np.sqrt(self.M)

    def series(self, label: str) -> ObservableSeries:
        o = self.labels.index(label)
        return ObservableSeries(
            self.times, self.mean[:, o], label, stderr=self.stderr[:, o],
            method=f"trajectories[M={self.M}]",
        )

    def metadata(self) -> dict:
        return {
            "seed": self.seed, "dt": self.dt, "M": self.M, "frame": self.frame,
            "start_index": self.start_index, "model_hash": self.model_hash,
            "backend": self.backend, "max_norm_error": self.max_norm_error,
        }


@dataclass
class _Moments:
    count: int
    mean: np.ndarray
    m2: np.ndarray


def _combine(a: _Moments, b: _Moments) -> _Moments:
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m2 = a.m2 + b.m2 + delta**2 * (a.count * b.count / n)
    return _Moments(n, mean, m2)


def _pairwise(parts: list[_Moments]) -> _Moments:
    while len(parts) > 1:
        merged = [_combine(parts[i], parts[i + 1]) for i in range(0, len(parts) - 1, 2)]
        if len(parts) % 2:
            merged.append(parts[-1])
        parts = merged
    return parts[0]


def trajectory_noise(seed: int, index: int, steps: int, scale: np.ndarray) -> np.ndarray:
    """Integrated noise ``W[step, site]`` of one trajectory, from its own Philox stream."""
    if not 0 <= seed < 2**64 or not 0 <= index < 2**64:
        raise ValueError("seed and trajectory index must fit in 64 bits")
    rng = np.random.Generator(np.random.Philox(key=(seed << 64) | index))
    return rng.standard_normal((steps, scale.size)) * scale


def _pauli_masks(obs: Mapping[int, str], n: int, frame: str) -> tuple[int, int, int, float]:
    flip = zy = ny = 0
    sign = 1.0
    for site, letter in obs.items():
        letter = letter.upper()
        if frame == "xx":
            letter, s = _TO_XX[letter]
            sign *= s
        bit = 1 << (n - 1 - site)
        if letter in "XY":
            flip |= bit
        if letter in "YZ":
            zy |= bit
        if letter == "Y":
            ny += 1
    return flip, zy, ny, sign


def _frame_state(psi0: InitialProductState, frame: str) -> InitialProductState:
    if frame == "zz":
        return psi0
    return InitialProductState(tuple((bz, by, -bx) for bx, by, bz in psi0.bloch))


def sample_grid(t_max: float, dt: float, sample_every: int | None = None) -> tuple[int, np.ndarray]:
    steps = int(round(t_max / dt))
    if steps < 0 or abs(steps * dt - t_max) > 1e-9 * max(1.0, t_max):
        raise TimeStepError(f"t_max={t_max} is not a whole number of steps dt={dt}")
    if sample_every is None:
        sample_every = max(1, steps // 100)
    grid = np.arange(0, steps + 1, sample_every, dtype=np.int64)
    if grid[-1] != steps:
        grid = np.append(grid, steps)
    return steps, grid


def run_ensemble(
    system: NoisyIsing,
    psi0: InitialProductState,
    t_max: float,
    dt: float,
    M: int,
    seed: int,
    observables: Sequence[Mapping[int, str]],
    *,
    sample_every: int | None = None,
    frame: str = "zz",
    start_index: int = 0,
    workers: int | None = 1,
    backend: str | None = None,
) -> TrajectoryEnsemble:
    """Ensemble mean and spread of Pauli observables over ``M`` noise trajectories.

    Trajectory ``i`` draws its noise from the Philox stream keyed by
    ``(seed, start_index + i)``; trajectories are grouped in fixed blocks and
    block moments are merged pairwise, so the output does not depend on
    ``workers``.
    """
    n = system.n_sites
    if n > MAX_TRAJECTORY_SITES:
        raise ResourceError(f"state-vector trajectories limited to {MAX_TRAJECTORY_SITES} sites")
    if psi0.n_sites != n:
        raise ValueError(f"initial state has {psi0.n_sites} sites, model has {n}")
    if not psi0.is_pure(1e-10):
        raise ValueError("trajectories need a pure product initial state")
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {sorted(FRAMES)}")
    if M < 1:
        raise ValueError("M must be at least 1")
    if dt <= 0:
        raise TimeStepError("dt must be positive")
    gmax = max(system.gamma)
    if gmax * dt > DT_GUARD or system.energy_scale() * dt > DT_GUARD:
        raise TimeStepError(
            f"dt={dt} too large: need gamma*dt and J*dt <= {DT_GUARD} "
            f"(gamma={gmax}, J={system.energy_scale()})"
        )
    if frame == "xx" and any(abs(np.sin(t)) > 1e-12 for g, t in zip(system.gamma, system.theta) if g > 0):
        raise ValueError("the X-X frame needs noise along X in the solvable frame (theta = 0)")

    steps, grid = sample_grid(t_max, dt, sample_every)
    model = system.to_model()
    energies = hamiltonian_diagonal(model)
    half = np.exp(-0.5j * dt * energies)
    full = half * half
    if frame == "xx":
        half = half / 2**n
        full = full / 2**n
    masks = [_pauli_masks(o, n, frame) for o in observables]
    flips = np.array([m[0] for m in masks], dtype=np.int64)
    zymask = np.array([m[1] for m in masks], dtype=np.int64)
    nys = np.array([m[2] for m in masks], dtype=np.int64)
    signs = np.array([m[3] for m in masks])
    psi = _frame_state(psi0, frame).statevector()
    scale = np.sqrt(np.asarray(system.gamma) * dt)
    noise_sign = -1.0 if frame == "xx" else 1.0
    cos_t = np.cos(system.theta)
    sin_t = np.sin(system.theta)
    backend = backend or kernels.DEFAULT_BACKEND
    impl = kernels.get_backend(backend)

    def block(b: int) -> tuple[_Moments, float]:
        lo = b * REDUCTION_BLOCK
        hi = min(M, lo + REDUCTION_BLOCK)
        noise = np.stack([
            noise_sign * trajectory_noise(seed, start_index + i, steps, scale) for i in range(lo, hi)
        ])
        values, norms = impl.propagate(
            psi, FRAMES[frame], half, full, cos_t, sin_t, noise, grid, flips, zymask, nys
        )
        values = values * signs
        # shift by the first sample so identical trajectories give exactly zero spread
        shifted = values - values[0]
        offset = shifted.mean(axis=0)
        mean = values[0] + offset
        m2 = ((shifted - offset) ** 2).sum(axis=0)
        return _Moments(hi - lo, mean, m2), float(np.abs(norms - 1.0).max())

    n_blocks = -(-M // REDUCTION_BLOCK)
    if workers == 1 or n_blocks == 1:
        results = [block(b) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(block, range(n_blocks)))
    total = _pairwise([r[0] for r in results])
    std = np.sqrt(total.m2 / (M - 1)) if M > 1 else np.zeros_like(total.mean)
    ens = TrajectoryEnsemble(
        times=grid * dt,
        labels=[observable_label(o) for o in observables],
        mean=total.mean,
        std=std,
        M=M, dt=dt, seed=seed, frame=frame, start_index=start_index,
        backend=backend, model_hash=model.model_hash(),
        max_norm_error=max(r[1] for r in results),
    )
    log.info("ensemble M=%d dt=%g frame=%s backend=%s", M, dt, frame, backend)
    return ens


def exact_reference(
    system: NoisyIsing,
    psi0: InitialProductState,
    times: Sequence[float],
    observables: Sequence[Mapping[int, str]],
) -> np.ndarray:
    """Exact ``[time, observable]`` values from the finite-patch reduction."""
    model = system.to_model()
    cols = [expectation(model, o, psi0, times).values for o in observables]
    return np.stack(cols, axis=1)


@dataclass
class ConvergenceReport:
    z: np.ndarray
    fraction_within: float
    rms: float
    rms_per_observable: np.ndarray
    z_max: float = 3.0
    labels: list[str] = field(default_factory=list)

    def passed(self, threshold: float = 0.95) -> bool:
        return self.fraction_within >= threshold

    def to_dict(self) -> dict:
        return {
            "fraction_within": self.fraction_within,
            "z_max": self.z_max,
            "rms": self.rms,
            "rms_per_observable": dict(zip(self.labels, map(float, self.rms_per_observable))),
            "max_abs_z": float(np.max(np.abs(self.z))) if self.z.size else 0.0,
        }


def convergence_report(ensemble: TrajectoryEnsemble, exact, z_max: float = 3.0) -> ConvergenceReport:
    """Per-time z-scores of the ensemble mean against exact values.

    ``exact`` is a ``[time, observable]`` array or a list of
    :class:`ObservableSeries`.  Where the standard error is below ``1e-10``
    (round-off only) the z-score is 0 if the mean agrees to ``1e-10`` and
    infinite otherwise.
    """
    if isinstance(exact, (list, tuple)) and exact and isinstance(exact[0], ObservableSeries):
        for s in exact:
            if s.times.shape != ensemble.times.shape or not np.allclose(s.times, ensemble.times, atol=1e-12):
                raise ValueError("time grids of ensemble and exact series differ")
        exact = np.stack([s.values for s in exact], axis=1)
    exact = np.asarray(exact, dtype=float)
    if exact.shape != ensemble.mean.shape:
        raise ValueError(f"exact values shape {exact.shape} does not match ensemble {ensemble.mean.shape}")
    diff = ensemble.mean - exact
    se = ensemble.stderr
    z = np.where(np.abs(diff) <= ZERO_STDERR_ATOL, 0.0, np.copysign(np.inf, diff))
    live = se > ZERO_STDERR_ATOL
    z[live] = diff[live] / se[live]
    within = float(np.mean(np.abs(z) <= z_max)) if z.size else 1.0
    rms_obs = np.sqrt(np.mean(diff**2, axis=0)) if diff.size else np.zeros(0)
    rms = float(np.sqrt(np.mean(diff**2))) if diff.size else 0.0
    return ConvergenceReport(z, within, rms, rms_obs, z_max, list(ensemble.labels))


def rms_scaling(ensembles: Mapping[int, TrajectoryEnsemble], exact: np.ndarray) -> dict:
    """RMS error versus ``M``, normalized by the ``M^{-1/2}`` law relative to the smallest ``M``.

    A ratio of 1 means perfect ``M^{-1/2}`` scaling.
    """
    ms = sorted(ensembles)
    rms = {m: convergence_report(ensembles[m], exact).rms for m in ms}
    base = ms[0]
    ratios = {m: rms[m] * np.sqrt(m / base) / rms[base] for m in ms}
    return {"rms": rms, "normalized": ratios}
