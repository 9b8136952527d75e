"""Solvable driven-dissipative Ising models: exact observables, gaps and trajectories."""
from .model import InitialProductState, Jump, LatticeSpec, SpinModel, jump_preset
from .reduction import build_reduced, correlator, evolve_observable, expectation, parse_observable
from .solvability import check_gap_conditions, check_solvable
from .spectral import certify_gap, graded_decompose, spectrum_via_blocks

__version__ = "0.1.0"

__all__ = [
    "InitialProductState", "Jump", "LatticeSpec", "SpinModel", "jump_preset",
    "build_reduced", "correlator", "evolve_observable", "expectation", "parse_observable",
    "check_gap_conditions", "check_solvable",
    "certify_gap", "graded_decompose", "spectrum_via_blocks",
]
