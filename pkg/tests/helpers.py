"""Random solvable models and shared tolerances for the test suite."""
import numpy as np

from dissipative_ising.model import PRESETS, InitialProductState, Jump, SpinModel, jump_preset
from dissipative_ising.pauli import SIGMA_X, SIGMA_Z

COUNTEREXAMPLE = (SIGMA_X + SIGMA_Z) / np.sqrt(2)


def random_bloch(rng, pure=False):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    return tuple(v if pure else v * rng.uniform(0.3, 1.0))


def random_state(rng, n, pure=False):
    return InitialProductState(tuple(random_bloch(rng, pure) for _ in range(n)))


def random_jumps(rng, n, rate_range=(0.2, 1.0), max_per_site=2):
    jumps = []
    for s in range(n):
        for _ in range(rng.integers(1, max_per_site + 1)):
            name = PRESETS[rng.integers(len(PRESETS))]
            jumps.append(Jump(s, jump_preset(name, rng.uniform(0, 2 * np.pi)), rng.uniform(*rate_range), name))
    return tuple(jumps)


def random_chain(rng, n, *, periodic=False, fields=True, coupling=1.0, **jump_kw):
    bonds = [(j, j + 1) for j in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    couplings = tuple((j, k, rng.uniform(-coupling, coupling)) for j, k in bonds)
    f = tuple(rng.uniform(-1, 1, n)) if fields else None
    return SpinModel(n, couplings, f, random_jumps(rng, n, **jump_kw))


def uniform_chain(n, h, jump, rate, delta=0.0, theta=0.0):
    couplings = tuple((j, j + 1, h) for j in range(n - 1))
    jumps = tuple(Jump(s, jump_preset(jump, theta), rate, jump) for s in range(n))
    return SpinModel(n, couplings, (delta,) * n if delta else None, jumps)
