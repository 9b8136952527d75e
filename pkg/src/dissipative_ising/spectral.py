"""Graded block structure of the Liouvillian and dissipative-gap certificates.

Pauli strings are grouped by their number ``d`` of X/Y letters.  For solvable
models the Liouvillian never lowers ``d``, so it is block-lower-triangular in
this grading and its spectrum is the union of the diagonal-block spectra.
Without a Hamiltonian the diagonal blocks split further into independent
single-site pieces, whose eigenvalues add.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np
from scipy.optimize import linear_sum_assignment

from .fullsolver import ResourceError
from .model import SpinModel, pauli_liouvillian
from .pauli import grade_vector
from .solvability import SolvabilityReport, check_gap_conditions

MAX_GRADED_SITES = 4
STRUCTURE_TOL = 1e-10
ZERO_TOL = 1e-9
GAP_SLACK = 1e-8
SYMMETRY_TOL = 1e-10
CERTIFICATE_SCHEMA = 1


class StructureError(ValueError):
    """A block required to vanish by the grading does not."""

    def __init__(self, block: str, norm: float, blocks: "GradedBlocks"):
        super().__init__(f"block {block} has norm {norm:.3g}; expected zero (non-solvable model?)")
        self.block = block
        self.norm = norm
        self.blocks = blocks


class GapConditionError(ValueError):
    """Some site fails the gap conditions; no certificate."""

    def __init__(self, report: SolvabilityReport):
        detail = "; ".join(report.failures) or "gap conditions not met"
        super().__init__(detail)
        self.report = report


class CertificateError(AssertionError):
    """Numerical verification contradicts the proven bound."""


@dataclass
class GradedBlocks:
    n_sites: int
    permutation: np.ndarray
    grades: np.ndarray
    full: dict[tuple[int, int], np.ndarray]
    dissipator: dict[tuple[int, int], np.ndarray]
    coherent: dict[tuple[int, int], np.ndarray]
    norms: dict[str, float] = field(default_factory=dict)

    def block_sizes(self) -> list[int]:
        return [int((self.grades == d).sum()) for d in range(self.n_sites + 1)]

    def violations(self) -> list[tuple[str, float]]:
        """Structurally-zero blocks whose norm exceeds the tolerance."""
        return [(k, v) for k, v in self.required_zero().items() if v >= STRUCTURE_TOL]

    def required_zero(self) -> dict[str, float]:
        n = self.n_sites
        out = {}
        for d in range(n + 1):
            for e in range(n + 1):
                if d < e:
                    out[f"L{d}{e}"] = self.norms[f"L{d}{e}"]
                if d != e and d != e + 1:
                    out[f"D{d}{e}"] = self.norms[f"D{d}{e}"]
                if d != e:
                    out[f"H{d}{e}"] = self.norms[f"H{d}{e}"]
        out["H00"] = self.norms["H00"]
        return out


def _slice(mat: np.ndarray, grades: np.ndarray, n: int) -> dict[tuple[int, int], np.ndarray]:
    idx = [np.flatnonzero(grades == d) for d in range(n + 1)]
    return {(d, e): mat[np.ix_(idx[d], idx[e])] for d in range(n + 1) for e in range(n + 1)}


def graded_decompose(model: SpinModel, check: bool = True) -> GradedBlocks:
    """Slice the Pauli-basis Liouvillian into grade blocks.

    ``coherent`` holds the real matrix of ``-i[H, .]``, i.e. ``i H`` in the
    block notation, so ``full = dissipator + coherent`` blockwise.
    """
    n = model.n_sites
    if n > MAX_GRADED_SITES:
        raise ResourceError(f"graded analysis limited to {MAX_GRADED_SITES} sites, got {n}")
    grades = grade_vector(n)
    perm = np.argsort(grades, kind="stable")
    d_mat = pauli_liouvillian(model, "dissipator").toarray()
    k_mat = pauli_liouvillian(model, "hamiltonian").toarray()
    blocks = GradedBlocks(
        n, perm, grades,
        _slice(d_mat + k_mat, grades, n), _slice(d_mat, grades, n), _slice(k_mat, grades, n),
    )
    for name, table in (("L", blocks.full), ("D", blocks.dissipator), ("H", blocks.coherent)):
        for (d, e), b in table.items():
            blocks.norms[f"{name}{d}{e}"] = float(np.linalg.norm(b))
    if check:
        bad = blocks.violations()
        if bad:
            worst = max(bad, key=lambda kv: kv[1])
            raise StructureError(worst[0], worst[1], blocks)
    return blocks


def _sorted(eig: np.ndarray) -> np.ndarray:
    eig = np.asarray(eig, dtype=complex)
    return eig[np.lexsort((eig.imag, eig.real))]


def spectrum_via_blocks(blocks: GradedBlocks) -> np.ndarray:
    """Union over ``d`` of the eigenvalues of the diagonal blocks."""
    parts = [
        np.linalg.eigvals(blocks.full[d, d])
        for d in range(blocks.n_sites + 1)
        if blocks.full[d, d].size
    ]
    return _sorted(np.concatenate(parts))


def multiset_distance(a, b) -> float:
    """Largest deviation between two eigenvalue multisets.

    Tries the sorted pairing first; degenerate clusters with scrambled
    imaginary parts fall back to an optimal assignment.
    """
    a, b = _sorted(a), _sorted(b)
    if a.shape != b.shape:
        return float("inf")
    if a.size == 0:
        return 0.0
    direct = float(np.abs(a - b).max())
    if direct < 1e-12:
        return direct
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return min(direct, float(cost[rows, cols].max()))


def site_eigen_sets(model: SpinModel, report: SolvabilityReport | None = None):
    """Per-site ``(E0, E1)``: eigenvalues of the (1,z) and (x,y) blocks of ``D_j``."""
    report = report or check_gap_conditions(model)
    out = []
    for r in report.sites:
        e0 = np.sort(np.linalg.eigvals(r.matrix[:2, :2]).real)[::-1]
        e1 = np.linalg.eigvals(r.matrix[2:, 2:])
        out.append((e0, _sorted(e1)[::-1]))
    return out


def assemble_projected_eigs(site_sets, d: int) -> np.ndarray:
    """Eigenvalues of the Hamiltonian-free grade-``d`` dissipator block.

    For every choice of ``d`` sites take the Minkowski sum of their ``E1``
    sets with the ``E0`` sets of the remaining sites.
    """
    n = len(site_sets)
    if not 0 <= d <= n:
        raise ValueError(f"grade {d} outside 0..{n}")
    out = []
    for chosen in combinations(range(n), d):
        acc = np.zeros(1, dtype=complex)
        for j, (e0, e1) in enumerate(site_sets):
            vals = np.asarray(e1 if j in chosen else e0, dtype=complex)
            acc = (acc[:, None] + vals[None, :]).reshape(-1)
        out.append(acc)
    result = np.concatenate(out)
    assert result.size == comb(n, d) * 2**n
    return _sorted(result)


@dataclass
class GapCertificate:
    gamma: float
    site_gammas: list[float]
    site_sets: list[tuple[np.ndarray, np.ndarray]]
    site_matrices: list[np.ndarray]
    conditions: list[dict]
    n_sites: int
    verified: bool = False
    true_gap: float | None = None
    zero_multiplicity: int | None = None
    rayleigh: dict[int, float] = field(default_factory=dict)
    symmetry_residuals: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def pairs(v):
            return [[float(np.real(x)), float(np.imag(x))] for x in v]

        return {
            "schema": CERTIFICATE_SCHEMA,
            "gamma": self.gamma,
            "n_sites": self.n_sites,
            "verified": self.verified,
            "true_gap": self.true_gap,
            "zero_multiplicity": self.zero_multiplicity,
            "rayleigh_max_eig": {str(k): v for k, v in self.rayleigh.items()},
            "symmetry_residuals": {str(k): v for k, v in self.symmetry_residuals.items()},
            "sites": [
                {
                    "gamma": g,
                    "E0": pairs(e0),
                    "E1": pairs(e1),
                    "matrix": [float(x) for x in m.reshape(-1)],
                    **c,
                }
                for g, (e0, e1), m, c in zip(
                    self.site_gammas, self.site_sets, self.site_matrices, self.conditions
                )
            ],
        }


def certify_gap(model: SpinModel, verify: bool | None = None) -> GapCertificate:
    """Proven lower bound ``Gamma = min_j Gamma_j`` on the dissipative gap.

    For ``n <= 4`` (or ``verify=True``) the bound is cross-checked against the
    block spectrum and the symmetric grade blocks of the dissipator; any
    disagreement raises :class:`CertificateError`.
    """
    report = check_gap_conditions(model)
    if not report.passed or report.gamma is None:
        raise GapConditionError(report)
    cert = GapCertificate(
        gamma=report.gamma,
        site_gammas=[r.gamma for r in report.sites],
        site_sets=site_eigen_sets(model, report),
        site_matrices=[r.matrix for r in report.sites],
        conditions=[
            {"condition_1": r.condition_1, "condition_2": r.condition_2} for r in report.sites
        ],
        n_sites=model.n_sites,
    )
    if verify is None:
        verify = model.n_sites <= MAX_GRADED_SITES
    if not verify:
        return cert
    blocks = graded_decompose(model)
    spec = spectrum_via_blocks(blocks)
    zero = np.abs(spec) < ZERO_TOL * max(1.0, model.max_rate())
    cert.zero_multiplicity = int(zero.sum())
    if cert.zero_multiplicity != 1:
        raise CertificateError(f"zero eigenvalue has multiplicity {cert.zero_multiplicity}")
    cert.true_gap = float(-spec[~zero].real.max()) if (~zero).any() else float("inf")
    if cert.true_gap < cert.gamma - GAP_SLACK:
        raise CertificateError(f"true gap {cert.true_gap:.6g} below certified {cert.gamma:.6g}")
    for d in range(1, model.n_sites + 1):
        block = blocks.dissipator[d, d]
        asym = float(np.abs(block - block.T).max())
        cert.symmetry_residuals[d] = asym
        if asym > SYMMETRY_TOL:
            raise CertificateError(f"dissipator block D{d}{d} is not symmetric ({asym:.3g})")
        top = float(np.linalg.eigvalsh(0.5 * (block + block.T)).max())
        cert.rayleigh[d] = top
        if top > -d * cert.gamma + GAP_SLACK:
            raise CertificateError(f"D{d}{d} has eigenvalue {top:.6g} above -{d} Gamma")
    cert.verified = True
    return cert
