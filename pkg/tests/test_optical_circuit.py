import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm, logm

from noonforge.errors import ConfigError, NumericalGuardError
from noonforge.fock_core import FockKet, annihilation, apply_channel, number_operator
from noonforge.optical_circuit import (
    DistinguishabilityModel,
    SourceParams,
    beam_splitter,
    db_to_transmission,
    delay_embedding,
    linear_element,
    loss_channel,
    mode_matrix,
    phase_shift,
    tmsv_state,
    two_mode_unitary,
)


def expm_mixer(r, phi, cutoff):
    """Fock-space mixer built from the generator ``sum_kl G_lk a_l^dag a_k`` with ``M = exp(G)``."""
    g = logm(mode_matrix(r, phi))
    a = annihilation(cutoff)
    eye = np.eye(cutoff + 1)
    ops = [np.kron(a, eye), np.kron(eye, a)]
    gen = sum(g[l, k] * ops[l].conj().T @ ops[k] for l in range(2) for k in range(2))
    return expm(gen)


def low_block(cutoff, limit=None):
    d = cutoff + 1
    n = np.add.outer(np.arange(d), np.arange(d)).reshape(-1)
    return n <= (cutoff if limit is None else limit)


@pytest.mark.parametrize("r,phi", [(0.5, math.pi), (0.5, math.pi / 2), (0.2, 0.7), (0.9, -1.3), (0.05, 0.0)])
def test_two_mode_unitary_matches_expm_oracle(r, phi):
    cutoff = 4
    u = two_mode_unitary(r, phi, cutoff).reshape(25, 25)
    oracle = expm_mixer(r, phi, cutoff)
    keep = low_block(cutoff)
    assert np.max(np.abs(u[np.ix_(keep, keep)] - oracle[np.ix_(keep, keep)])) < 1e-10


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.0, 1.0), phi=st.floats(-2 * math.pi, 2 * math.pi))
def test_linear_element_is_unitary_below_cutoff(r, phi):
    cutoff = 5
    u = two_mode_unitary(r, phi, cutoff).reshape(36, 36)
    keep = low_block(cutoff, cutoff - 1)
    block = u[np.ix_(keep, keep)]
    assert np.max(np.abs(block.conj().T @ block - np.eye(keep.sum()))) < 1e-10


def test_symmetric_bs_single_photon():
    out = beam_splitter(FockKet.basis((1, 0), 3), 0, 1)
    assert out.amplitude(1, 0) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude(0, 1) == pytest.approx(1 / math.sqrt(2))


def test_symmetric_bs_hom_bunching():
    out = beam_splitter(FockKet.basis((1, 1), 3), 0, 1)
    assert abs(out.amplitude(1, 1)) < 1e-15
    assert out.amplitude(2, 0) == pytest.approx(1 / math.sqrt(2))
    assert out.amplitude(0, 2) == pytest.approx(-1 / math.sqrt(2))


def test_reverse_hom_in_matched_phase_convention():
    noon = FockKet.from_terms({(2, 0): 1, (0, 2): 1}, 3, normalize=True)
    out = linear_element(noon, 0, 1, 0.5, math.pi / 2)
    oracle = expm_mixer(0.5, math.pi / 2, 3) @ noon.vector
    assert np.allclose(out.vector, oracle, atol=1e-12)
    assert abs(abs(out.amplitude(1, 1)) ** 2 - 1) < 1e-10


def test_bs_norm_preserved():
    rng = np.random.default_rng(0)
    amps = np.zeros((5, 5), dtype=complex)
    for n in range(5):
        for m in range(5 - n):
            amps[n, m] = rng.normal() + 1j * rng.normal()
    ket = FockKet(amps, 4).normalize()
    assert linear_element(ket, 0, 1, 0.3, 1.1).norm() == pytest.approx(1.0, abs=1e-10)


def test_phase_shift_is_degenerate_element():
    ket = FockKet.from_terms({(0, 0): 1, (0, 1): 1, (0, 3): 1}, 3, normalize=True)
    a = phase_shift(ket, 1, 0.4)
    b = linear_element(ket, 0, 1, 0.0, 0.4)
    assert np.allclose(a.vector, b.vector, atol=1e-14)
    assert a.amplitude(0, 3) == pytest.approx(ket.amplitude(0, 3) * np.exp(3j * 0.4))


def test_linear_element_errors():
    ket = FockKet.vacuum(2, 2)
    with pytest.raises(ConfigError):
        linear_element(ket, 0, 1, 1.5)
    with pytest.raises(ConfigError):
        linear_element(ket, 0, 0, 0.5)


def test_tmsv_zero_gamma_is_vacuum():
    assert tmsv_state(SourceParams(0.0, 4)).amplitude(0, 0) == 1


def test_tmsv_amplitudes():
    ket = tmsv_state(SourceParams(0.1, 2))
    amps = ket.amplitudes
    expected = np.diag([1.0, 0.1, 0.01])
    assert np.allclose(amps, expected / np.linalg.norm(expected), atol=1e-15)


def test_tmsv_pair_weight_at_methods_gamma():
    g2 = 0.007
    ket = tmsv_state(SourceParams(math.sqrt(g2), 6))
    norm = sum(g2**n for n in range(7))
    assert abs(ket.amplitude(1, 1)) ** 2 == pytest.approx(g2 / norm, rel=1e-12)


def test_source_rejects_large_gamma_and_leakage():
    with pytest.raises(ConfigError):
        SourceParams(1.0)
    with pytest.raises(NumericalGuardError):
        SourceParams(0.5, cutoff=4)


def test_loss_identity_and_example():
    ch = loss_channel(1.0, 3)
    assert np.allclose(ch.operators[0], np.eye(4))
    out = apply_channel(FockKet.basis((2,), 3).to_density(), loss_channel(0.55, 3), 0)
    assert out.populations()[:3] == pytest.approx([0.2025, 0.495, 0.3025], abs=1e-12)


def test_db_split():
    assert db_to_transmission(5.0) == pytest.approx(10**-0.5)
    assert db_to_transmission(5.0) == pytest.approx(0.316, abs=5e-4)


@pytest.mark.parametrize("eta", [-0.1, 1.1])
def test_loss_range(eta):
    with pytest.raises(ConfigError):
        loss_channel(eta, 3)


@settings(max_examples=30, deadline=None)
@given(e1=st.floats(0.0, 1.0), e2=st.floats(0.0, 1.0))
def test_loss_semigroup(e1, e2):
    rho = FockKet.from_terms({(0,): 0.3, (2,): 0.5j, (4,): 1.0}, 5, normalize=True).to_density()
    two = apply_channel(apply_channel(rho, loss_channel(e1, 5), 0), loss_channel(e2, 5), 0)
    one = apply_channel(rho, loss_channel(e1 * e2, 5), 0)
    assert np.max(np.abs(two.matrix - one.matrix)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0.0, 1.0))
def test_loss_scales_photon_number(eta):
    rho = FockKet.from_terms({(1,): 1.0, (3,): 1.0}, 5, normalize=True).to_density()
    n = number_operator(5)
    before = np.trace(rho.matrix @ n).real
    after = np.trace(apply_channel(rho, loss_channel(eta, 5), 0).matrix @ n).real
    assert after == pytest.approx(eta * before, abs=1e-9)


def test_kraus_completeness():
    ch = loss_channel(0.37, 6)
    assert np.max(np.abs(ch.completeness() - np.eye(7))) < 1e-9
    assert ch.leakage() <= 1e-6


def test_overlap_values():
    assert DistinguishabilityModel(0.0).overlap == 1.0
    assert DistinguishabilityModel(math.inf).overlap == 0.0
    assert DistinguishabilityModel(5.0, 1.6).overlap == pytest.approx(math.exp(-25 / 5.12))
    assert DistinguishabilityModel(5.0, 1.6).overlap == pytest.approx(0.0076, abs=5e-5)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 50), b=st.floats(0, 50))
def test_overlap_monotone(a, b):
    lo, hi = sorted((a, b))
    xl, xh = DistinguishabilityModel(lo).overlap, DistinguishabilityModel(-hi).overlap
    assert 0.0 <= xh <= xl <= 1.0


def test_delay_zero_leaves_state():
    ket = FockKet.from_terms({(1, 0): 1, (0, 2): 1}, 3, normalize=True)
    out = delay_embedding(ket, 1, DistinguishabilityModel(0.0))
    assert out.mode_count == 3
    assert np.allclose(out.amplitudes[..., 0], ket.amplitudes, atol=1e-15)
    assert np.allclose(out.amplitudes[..., 1:], 0)


def test_infinite_delay_moves_photon():
    out = delay_embedding(FockKet.basis((0, 1), 3), 1, DistinguishabilityModel(math.inf))
    assert abs(out.amplitude(0, 0, 1)) == pytest.approx(1.0)


@pytest.mark.parametrize("tau", [0.5, 1.6, 3.0])
def test_delay_split_amplitudes(tau):
    model = DistinguishabilityModel(tau)
    out = delay_embedding(FockKet.basis((0, 1), 3), 1, model)
    xi = model.overlap
    assert abs(out.amplitude(0, 1, 0)) == pytest.approx(xi, abs=1e-12)
    assert abs(out.amplitude(0, 0, 1)) == pytest.approx(math.sqrt(1 - xi**2), abs=1e-12)
