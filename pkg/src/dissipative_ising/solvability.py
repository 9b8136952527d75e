"""Membership tests for the solvable family and the single-site gap conditions.

A model is solvable when no site's dissipator feeds coherences into
populations, i.e. ``Tr(Z_j D_j(sigma^+-_j)) = 0``.  In the single-site Pauli
basis ``(1, z, x, y)`` this is the vanishing of the upper-right 2x2 block of
``D_j``.  The gap certificate additionally needs a unique steady state per
site with a finite gap ``Gamma_j`` and symmetric diagonal blocks
(``D_z1 = 0``, ``D_xy = D_yx``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_Z,
    Jump,
    SpinModel,
    adjoint_liouvillian_action,
    single_site_dissipator,
)
from .pauli import OperatorVector, PauliString

RESIDUAL_TOL = 1e-10
ZERO_EIGEN_TOL = 1e-10


@dataclass
class SiteReport:
    site: int
    residual: float
    matrix: np.ndarray
    solvable: bool
    block_residual: float
    z1_zero: bool | None = None
    xy_symmetric: bool | None = None
    unique_steady_state: bool | None = None
    eigenvalues: np.ndarray | None = None
    gamma: float | None = None

    @property
    def condition_1(self) -> bool | None:
        if self.unique_steady_state is None:
            return None
        return bool(self.unique_steady_state and self.gamma is not None and self.gamma > 0)

    @property
    def condition_2(self) -> bool | None:
        if self.z1_zero is None:
            return None
        return bool(self.z1_zero and self.xy_symmetric)

    def to_dict(self) -> dict:
        out = {
            "site": self.site,
            "residual": self.residual,
            "block_residual": self.block_residual,
            "solvable": self.solvable,
            "matrix": [float(x) for x in self.matrix.reshape(-1)],
        }
        if self.z1_zero is not None:
            out.update(
                z1_zero=self.z1_zero,
                xy_symmetric=self.xy_symmetric,
                unique_steady_state=self.unique_steady_state,
                condition_1=self.condition_1,
                condition_2=self.condition_2,
                gamma=self.gamma,
                eigenvalues=[[float(e.real), float(e.imag)] for e in self.eigenvalues],
            )
        return out


@dataclass
class SolvabilityReport:
    sites: list[SiteReport]
    tolerance: float
    passed: bool
    gap_checked: bool = False
    gamma: float | None = None
    failures: list[str] = field(default_factory=list)

    @property
    def gap_conditions_hold(self) -> bool:
        return self.gamma is not None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tolerance": self.tolerance,
            "gap_checked": self.gap_checked,
            "gamma": self.gamma,
            "failures": list(self.failures),
            "sites": [s.to_dict() for s in self.sites],
        }


def _dissipator_image(jumps: Sequence[Jump], op: np.ndarray) -> np.ndarray:
    out = np.zeros((2, 2), dtype=complex)
    for jp in jumps:
        j, jd = jp.matrix, jp.matrix.conj().T
        jdj = jd @ j
        out += jp.rate / 2 * (2 * j @ op @ jd - jdj @ op - op @ jdj)
    return out


def single_site_dissipator_matrix(jumps: Sequence[Jump]) -> np.ndarray:
    """Summed 4x4 dissipator of all channels on one site, order (1, z, x, y)."""
    out = np.zeros((4, 4))
    for jp in jumps:
        out += single_site_dissipator(jp.matrix, jp.rate)
    return out


def _site_reports(model: SpinModel) -> tuple[list[SiteReport], float]:
    tol = RESIDUAL_TOL * max(model.max_rate(), 1.0)
    reports = []
    for site in range(model.n_sites):
        jumps = model.jumps_on(site)
        d = single_site_dissipator_matrix(jumps)
        residual = max(
            abs(np.trace(SIGMA_Z @ _dissipator_image(jumps, SIGMA_PLUS))),
            abs(np.trace(SIGMA_Z @ _dissipator_image(jumps, SIGMA_MINUS))),
        )
        block = float(np.abs(d[:2, 2:]).max())
        reports.append(SiteReport(site, float(residual), d, residual < tol, block))
    return reports, tol


def check_solvable(model: SpinModel) -> SolvabilityReport:
    reports, tol = _site_reports(model)
    failures = [
        f"site {r.site}: Tr(Z D(sigma+-)) = {r.residual:.3g}" for r in reports if not r.solvable
    ]
    return SolvabilityReport(reports, tol, not failures, failures=failures)


def check_gap_conditions(model: SpinModel) -> SolvabilityReport:
    report = check_solvable(model)
    report.gap_checked = True
    for r in report.sites:
        d = r.matrix
        scale = max(np.abs(d).max(), 1.0)
        r.z1_zero = bool(abs(d[1, 0]) < RESIDUAL_TOL * scale)
        r.xy_symmetric = bool(abs(d[2, 3] - d[3, 2]) < RESIDUAL_TOL * scale)
        eig = np.linalg.eigvals(d)
        r.eigenvalues = eig[np.lexsort((eig.imag, eig.real))]
        zero = np.abs(eig) < ZERO_EIGEN_TOL * scale
        r.unique_steady_state = bool(zero.sum() == 1)
        if r.unique_steady_state:
            r.gamma = float(-eig[~zero].real.max())
        if not r.solvable:
            continue
        if not r.unique_steady_state:
            report.failures.append(f"site {r.site}: condition (1) fails: degenerate steady state")
        elif not r.gamma > 0:
            report.failures.append(f"site {r.site}: condition (1) fails: no dissipative gap")
        if not r.z1_zero:
            report.failures.append(f"site {r.site}: condition (2) fails: D_z1 = {d[1, 0]:.3g}")
        if not r.xy_symmetric:
            report.failures.append(f"site {r.site}: condition (2) fails: D_xy != D_yx")
    if report.passed and all(r.condition_1 and r.condition_2 for r in report.sites):
        report.gamma = min(r.gamma for r in report.sites)
    return report


def diagonality_closure_test(
    model: SpinModel,
    support: Sequence[int],
    trials: int = 16,
    seed: int = 0,
) -> float:
    """Largest coherence on ``support`` produced by ``L^dag`` from diagonal input.

    Each trial draws a random Pauli string whose letters on ``support`` are
    ``I`` or ``Z`` (the first ``2**|support|`` trials enumerate those patterns)
    and arbitrary elsewhere.  Returns the largest coefficient of the image on
    any string carrying ``X`` or ``Y`` inside ``support``.
    """
    support = sorted(set(support))
    if not support:
        return 0.0
    n = model.n_sites
    rng = np.random.default_rng(seed)
    n_patterns = 2 ** len(support)
    worst = 0.0
    strings = [PauliString.from_index(i, n).word for i in range(4**n)]
    coherent = np.array(
        [any(w[s] in "XY" for s in support) for w in strings], dtype=bool
    )
    for t in range(trials):
        letters = list(rng.choice(list("IZXY"), size=n))
        pattern = t % n_patterns if t < n_patterns else int(rng.integers(n_patterns))
        for b, s in enumerate(support):
            letters[s] = "Z" if (pattern >> b) & 1 else "I"
        op = OperatorVector.from_pauli("".join(letters))
        image = adjoint_liouvillian_action(model, op).coefficients
        worst = max(worst, float(np.abs(image[coherent]).max(initial=0.0)))
    return worst


__all__ = [
    "SiteReport", "SolvabilityReport", "single_site_dissipator_matrix", "check_solvable",
    "check_gap_conditions", "diagonality_closure_test",
]
