import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from noonforge.errors import ConfigError, NumericalGuardError
from noonforge.fock_core import (
    DensityOp,
    FockKet,
    KrausChannel,
    annihilation,
    apply_channel,
    apply_operator,
    fidelity,
    partial_trace,
    permute_modes,
    tensor_product,
)
from noonforge.optical_circuit import SourceParams, loss_channel, tmsv_state


def random_density(rng, modes, cutoff, rank=None):
    dim = (cutoff + 1) ** modes
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityOp(rho / np.trace(rho).real, modes, cutoff)


def random_ket(rng, modes, cutoff):
    v = rng.normal(size=(cutoff + 1) ** modes) + 1j * rng.normal(size=(cutoff + 1) ** modes)
    return FockKet.from_vector(v / np.linalg.norm(v), modes, cutoff)


def test_basis_layout_is_row_major_mode_one_slowest():
    ket = FockKet.basis((1, 2), 2)
    assert np.flatnonzero(ket.vector).tolist() == [1 * 3 + 2]


def test_vacuum_tensor_vacuum():
    out = tensor_product(FockKet.vacuum(1, 3), FockKet.vacuum(1, 3))
    assert out.mode_count == 2
    assert out.amplitude(0, 0) == 1
    assert np.count_nonzero(out.vector) == 1


def test_one_tensor_one():
    out = tensor_product(FockKet.basis((1,), 3), FockKet.basis((1,), 3))
    assert abs(out.inner(FockKet.basis((1, 1), 3)) - 1) < 1e-15


def test_superposition_tensor_fock_two():
    left = FockKet.from_terms({(0,): 1, (1,): 1}, 3, normalize=True)
    out = tensor_product(left, FockKet.basis((2,), 3))
    expected = np.zeros((4, 4), dtype=complex)
    expected[0, 2] = expected[1, 2] = 1 / np.sqrt(2)
    assert np.allclose(out.amplitudes, expected, atol=1e-15)


def test_tensor_product_mismatched_cutoff():
    with pytest.raises(ConfigError):
        tensor_product(FockKet.vacuum(1, 2), FockKet.vacuum(1, 3))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), ca=st.floats(0.1, 2.0), cb=st.floats(0.1, 2.0))
def test_tensor_product_norm_is_product(seed, ca, cb):
    rng = np.random.default_rng(seed)
    a = FockKet(random_ket(rng, 1, 3).amplitudes * ca, 3)
    b = FockKet(random_ket(rng, 2, 3).amplitudes * cb, 3)
    assert tensor_product(a, b).norm() == pytest.approx(a.norm() * b.norm(), rel=1e-12)


def test_normalize_gives_unit_norm():
    ket = FockKet.from_terms({(0, 1): 3.0, (2, 2): 4.0j}, 3).normalize()
    assert abs(ket.norm() - 1) < 1e-9


def test_identity_channel_leaves_state():
    rho = random_density(np.random.default_rng(1), 2, 3)
    out = apply_channel(rho, KrausChannel.identity(3), 1)
    assert np.max(np.abs(out.matrix - rho.matrix)) < 1e-12


def test_full_loss_sends_one_photon_to_vacuum():
    out = apply_channel(FockKet.basis((1,), 3).to_density(), loss_channel(0.0, 3), 0)
    assert np.allclose(out.matrix, FockKet.vacuum(1, 3).to_density().matrix, atol=1e-15)


@pytest.mark.parametrize("eta", [0.0, 0.3, 0.55, 0.9, 1.0])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_loss_matches_binomial_oracle(eta, n):
    out = apply_channel(FockKet.basis((n,), 5).to_density(), loss_channel(eta, 5), 0)
    expected = binom.pmf(np.arange(6), n, eta)
    assert np.allclose(out.populations(), expected, atol=1e-12)
    assert abs(out.trace() - 1) < 1e-9


def test_loss_on_one_photon_example():
    out = apply_channel(FockKet.basis((1,), 3).to_density(), loss_channel(0.55, 3), 0)
    assert out.populations()[:2] == pytest.approx([0.45, 0.55], abs=1e-12)


def test_apply_channel_mode_out_of_range():
    with pytest.raises(ConfigError):
        apply_channel(FockKet.vacuum(2, 2).to_density(), loss_channel(0.5, 2), 2)


def test_partial_trace_vacuum():
    out = partial_trace(FockKet.vacuum(2, 3).to_density(), {0})
    assert np.allclose(out.matrix, FockKet.vacuum(1, 3).to_density().matrix)


def test_partial_trace_noon_by_direct_summation():
    ket = FockKet.from_terms({(2, 0): 1, (0, 2): 1}, 3, normalize=True)
    rho = ket.to_density()
    t = rho.tensor
    oracle = np.zeros((4, 4), dtype=complex)
    for a in range(4):
        for b in range(4):
            for k in range(4):
                oracle[a, b] += t[a, k, b, k]
    out = partial_trace(rho, {0})
    assert np.allclose(out.matrix, oracle, atol=1e-15)
    assert np.allclose(np.diag(out.matrix).real, [0.5, 0, 0.5, 0])


def test_partial_trace_of_pair_source_weights():
    rho = tmsv_state(SourceParams(0.1, 4)).to_density()
    out = partial_trace(rho, {0})
    pops = out.populations()
    assert np.allclose(pops / pops[0], [1, 0.01, 1e-4, 1e-6, 1e-8], rtol=1e-10)
    assert np.max(np.abs(out.matrix - np.diag(np.diag(out.matrix)))) < 1e-15


def test_partial_trace_empty_keep():
    with pytest.raises(ConfigError):
        partial_trace(FockKet.vacuum(2, 2).to_density(), set())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), keep=st.sampled_from([{0}, {1}, {2}, {0, 2}, {1, 2}]))
def test_partial_trace_preserves_trace(seed, keep):
    rho = random_density(np.random.default_rng(seed), 3, 2)
    out = partial_trace(rho, keep)
    assert out.mode_count == len(keep)
    assert abs(out.trace() - rho.trace()) < 1e-10


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), eta=st.floats(0.0, 1.0))
def test_channel_commutes_with_partial_trace(seed, eta):
    rho = random_density(np.random.default_rng(seed), 2, 3)
    ch = loss_channel(eta, 3)
    left = partial_trace(apply_channel(rho, ch, 0), {0})
    right = apply_channel(partial_trace(rho, {0}), ch, 0)
    assert np.max(np.abs(left.matrix - right.matrix)) < 1e-10


def test_product_then_trace_recovers_factor():
    rng = np.random.default_rng(3)
    a, b = random_density(rng, 1, 3), random_density(rng, 1, 3)
    out = partial_trace(tensor_product(a, b), {0})
    assert np.max(np.abs(out.matrix - a.matrix)) < 1e-14


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), eta=st.floats(0.0, 1.0))
def test_operations_keep_density_invariants(seed, eta):
    rho = random_density(np.random.default_rng(seed), 2, 2, rank=2)
    out = partial_trace(apply_channel(rho, loss_channel(eta, 2), 1), [1, 0])
    out.check()
    assert out.hermiticity_error() < 1e-10
    assert out.eigenvalues().min() > -1e-8


def test_fidelity_with_itself():
    rho = random_density(np.random.default_rng(5), 1, 4)
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)


def test_fidelity_orthogonal():
    assert fidelity(FockKet.vacuum(1, 2).to_density(), FockKet.basis((1,), 2).to_density()) == pytest.approx(0.0, abs=1e-12)


def test_fidelity_diagonal_closed_form():
    mix = DensityOp.diagonal({(0,): 0.45, (1,): 0.55}, 2)
    assert fidelity(FockKet.vacuum(1, 2).to_density(), mix) == pytest.approx(0.45, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_fidelity_symmetric_and_pure_overlap(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(rng, 1, 3), random_density(rng, 1, 3)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-9)
    assert 0.0 <= fidelity(a, b) <= 1.0 + 1e-12
    u, v = random_ket(rng, 2, 2), random_ket(rng, 2, 2)
    assert fidelity(u.to_density(), v.to_density()) == pytest.approx(abs(u.inner(v)) ** 2, abs=1e-10)


def test_fidelity_rejects_non_positive():
    bad = DensityOp(np.diag([1.5, -0.5]).astype(complex), 1, 1)
    with pytest.raises(NumericalGuardError):
        fidelity(bad, FockKet.vacuum(1, 1).to_density())


def test_check_flags_negative_eigenvalue_and_clip_repairs():
    bad = DensityOp(np.diag([1.1, -0.1]).astype(complex), 1, 1)
    with pytest.raises(NumericalGuardError):
        bad.check()
    fixed = bad.clip_negative()
    fixed.check()
    assert fixed.populations() == pytest.approx([1.0, 0.0])


def test_density_json_round_trip():
    rho = random_density(np.random.default_rng(7), 2, 2)
    data = json.loads(rho.to_json())
    assert set(data) == {"cutoff", "mode_count", "re", "im"}
    back = DensityOp.from_json(rho.to_json())
    assert np.array_equal(back.matrix, rho.matrix)
    assert back.mode_count == 2 and back.cutoff == 2


def test_apply_operator_on_ket_and_density_agree():
    rng = np.random.default_rng(11)
    ket = random_ket(rng, 3, 2)
    a = annihilation(2)
    k_out = apply_operator(ket, a, (1,))
    r_out = apply_operator(ket.to_density(), a, (1,))
    assert np.allclose(k_out.to_density().matrix, r_out.matrix, atol=1e-14)


def test_permute_modes_reorders_occupations():
    ket = FockKet.basis((1, 2, 0), 2)
    out = permute_modes(ket, (2, 0, 1))
    assert out.amplitude(0, 1, 2) == 1


def test_truncate_and_pad_round_trip():
    rho = random_density(np.random.default_rng(2), 1, 2)
    assert np.allclose(rho.pad(4).truncate(2).matrix, rho.matrix)


def test_kraus_adjoint_matches_direct_sum():
    ch = loss_channel(0.3, 3)
    op = np.diag(np.arange(4.0)).astype(complex)
    direct = sum(k.conj().T @ op @ k for k in ch.operators)
    assert np.allclose(ch.adjoint_apply(op), direct)
