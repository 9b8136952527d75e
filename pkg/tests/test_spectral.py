from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative_ising import spectral
from dissipative_ising.fullsolver import ResourceError, liouvillian_spectrum
from dissipative_ising.model import Jump, SpinModel, jump_preset

from helpers import COUNTEREXAMPLE, random_chain, uniform_chain


def gapped_chain(rng, n, hamiltonian=True):
    jumps = []
    for s in range(n):
        jumps.append(Jump(s, jump_preset("rotated_tfim"), rng.uniform(0.2, 1.0)))
        rate = rng.uniform(0, 0.5)
        jumps.append(Jump(s, jump_preset("emission_z"), rate))
        jumps.append(Jump(s, jump_preset("pump_z"), rate))
    couplings = tuple((j, j + 1, rng.uniform(-1, 1)) for j in range(n - 1)) if hamiltonian else ()
    fields = tuple(rng.uniform(-1, 1, n)) if hamiltonian else None
    return SpinModel(n, couplings, fields, tuple(jumps))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_block_sizes(n):
    blocks = spectral.graded_decompose(random_chain(np.random.default_rng(n), n))
    assert blocks.block_sizes() == [comb(n, d) * 2**n for d in range(n + 1)]
    assert not blocks.violations()


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
@settings(max_examples=15, deadline=None)
def test_block_spectrum_matches_dense(seed, n):
    model = random_chain(np.random.default_rng(seed), n, periodic=True)
    got = spectral.spectrum_via_blocks(spectral.graded_decompose(model))
    assert spectral.multiset_distance(got, liouvillian_spectrum(model)) < 1e-8


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
@settings(max_examples=15, deadline=None)
def test_minkowski_assembly(seed, n):
    model = gapped_chain(np.random.default_rng(seed), n, hamiltonian=False)
    blocks = spectral.graded_decompose(model)
    sets = spectral.site_eigen_sets(model)
    for d in range(n + 1):
        direct = np.linalg.eigvals(blocks.dissipator[d, d])
        assert spectral.multiset_distance(spectral.assemble_projected_eigs(sets, d), direct) < 1e-9


def test_assembly_rejects_bad_grade():
    sets = spectral.site_eigen_sets(uniform_chain(2, 1.0, "rotated_tfim", 0.5))
    with pytest.raises(ValueError):
        spectral.assemble_projected_eigs(sets, 3)


def test_multiset_distance():
    assert spectral.multiset_distance([1, 2], [2, 1]) == 0.0
    assert spectral.multiset_distance([1], [1, 2]) == float("inf")
    assert spectral.multiset_distance([1 + 1j, 1 - 1j], [1 - 1j, 1 + 1.1j]) == pytest.approx(0.1)


def test_rotated_tfim_certificate():
    cert = spectral.certify_gap(uniform_chain(3, 1.0, "rotated_tfim", 0.5))
    assert cert.verified
    assert cert.gamma == pytest.approx(1.0)
    assert cert.true_gap >= cert.gamma - 1e-8
    assert cert.zero_multiplicity == 1
    for d, top in cert.rayleigh.items():
        assert top <= -d * cert.gamma + 1e-8
    doc = cert.to_dict()
    assert doc["schema"] == 1 and len(doc["sites"]) == 3


@pytest.mark.parametrize("seed", range(4))
def test_random_gapped_models_certify(seed):
    rng = np.random.default_rng(seed)
    cert = spectral.certify_gap(gapped_chain(rng, int(rng.integers(1, 5))))
    assert cert.verified and cert.true_gap >= cert.gamma - 1e-8


def test_large_models_skip_verification():
    cert = spectral.certify_gap(uniform_chain(6, 1.0, "rotated_tfim", 0.3))
    assert not cert.verified and cert.gamma == pytest.approx(0.6)
    with pytest.raises(ResourceError):
        spectral.graded_decompose(uniform_chain(5, 1.0, "rotated_tfim", 0.3))


def test_dephasing_only_has_no_certificate():
    with pytest.raises(spectral.GapConditionError, match="condition \\(1\\)"):
        spectral.certify_gap(uniform_chain(2, 1.0, "dephasing_z", 0.5))


def test_structure_error_for_non_solvable():
    model = SpinModel(2, ((0, 1, 1.0),), None, (Jump(0, COUNTEREXAMPLE, 1.0),))
    with pytest.raises(spectral.StructureError) as info:
        spectral.graded_decompose(model)
    assert info.value.norm > 0.1
    blocks = spectral.graded_decompose(model, check=False)
    assert blocks.violations()
    with pytest.raises(spectral.GapConditionError):
        spectral.certify_gap(model)


def test_certificate_error_is_raised_on_contradiction(monkeypatch):
    monkeypatch.setattr(spectral, "GAP_SLACK", -10.0)
    with pytest.raises(spectral.CertificateError):
        spectral.certify_gap(uniform_chain(2, 1.0, "rotated_tfim", 0.5))
