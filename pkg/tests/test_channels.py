"""Noise-channel tests, including the compiled-CZ fault catalogue."""

import numpy as np
import pytest

from spinmesh.channels import (
    CZErrorClass,
    ExchangeErrorModel,
    NoiseModel,
    QuantumChannel,
    channel_distance,
    channels_close,
    cz_error_catalogue,
    cz_from_sequence,
    cz_sequence,
    dephasing,
    depolarizing,
    noisy_sqrt_swap,
    sqrt_swap_error_decomposition,
    swap_error,
)
from spinmesh.channels import _on_first, _on_second
from spinmesh.states import CZ, SQRT_SWAP, SWAP, X, Y, Z, operator_allclose_up_to_phase


def test_all_channels_cptp():
    for ch in (depolarizing(0.1), dephasing(0.2), swap_error(0.05),
               noisy_sqrt_swap(ExchangeErrorModel(0.03)),
               sqrt_swap_error_decomposition(ExchangeErrorModel(0.03))):
        assert ch.is_cptp()


def test_depolarizing_contracts_bloch_vector():
    p = 0.12
    ch = depolarizing(p)
    rho = 0.5 * (np.eye(2) + 0.8 * Z)
    out = ch(rho)
    z_in = np.trace(rho @ Z).real
    z_out = np.trace(out @ Z).real
    assert np.isclose(z_out, (1 - 4 * p / 3) * z_in, atol=1e-14)
    assert np.allclose(ch(np.eye(2) / 2), np.eye(2) / 2, atol=1e-14)


def test_dephasing_kills_coherence():
    p = 0.25
    rho = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    out = dephasing(p)(rho)
    assert np.isclose(out[0, 1], 0.5 * (1 - 2 * p))
    assert np.isclose(out[0, 0], 0.5)


def test_noise_model_validation():
    NoiseModel(0.1, 0.2, 0.3)
    with pytest.raises(ValueError):
        NoiseModel(p_1q=-0.01)
    with pytest.raises(ValueError):
        NoiseModel(p_sh=1.5)


def test_exchange_error_swap_weight():
    for eps in (1e-4, 1e-3, 1e-2):
        m = ExchangeErrorModel(eps)
        assert abs(m.p_swap - eps ** 2) <= eps ** 4


def test_noisy_sqrt_swap_equals_unitary_mixture():
    """Symmetric over/under-rotation is exactly cos^2/sin^2 {ideal, SWAP-after}."""
    for eps in (1e-3, 0.01, 0.1, 0.3):
        a = noisy_sqrt_swap(ExchangeErrorModel(eps))
        b = sqrt_swap_error_decomposition(ExchangeErrorModel(eps))
        assert channel_distance(a, b) < 1e-12


def test_compiled_cz_matches_ideal():
    assert operator_allclose_up_to_phase(cz_from_sequence(), CZ, atol=1e-12)


def _inject(position, fault):
    """Dense product of the CZ sequence with `fault` inserted after factor #position."""
    u = np.eye(4, dtype=complex)
    for i, f in enumerate(cz_sequence()):
        u = f @ u
        if i == position:
            u = fault @ u
    return u


def test_swap_after_first_sqrt_swap_propagates_to_zz_swap():
    got = _inject(1, SWAP)
    want = _on_first(Z) @ _on_second(Z) @ SWAP @ CZ
    assert operator_allclose_up_to_phase(got, want, atol=1e-12)


def test_swap_after_second_sqrt_swap_is_swap_after_gate():
    got = _inject(3, SWAP)
    assert operator_allclose_up_to_phase(got, SWAP @ CZ, atol=1e-12)


def test_mid_sequence_pauli_propagates_through_final_sqrt_swap():
    for sigma in (X, Y, Z):
        got = _inject(2, _on_first(sigma))
        eff = SQRT_SWAP @ _on_first(sigma) @ SQRT_SWAP.conj().T
        assert operator_allclose_up_to_phase(got, eff @ CZ, atol=1e-12)


def test_catalogue_matches_direct_propagation():
    cat = {c.name: c for c in cz_error_catalogue()}
    assert set(cat) == {"swap_after_second", "swap_after_first", "mid_rotation_pauli"}
    (w, u), = cat["swap_after_second"].operators
    assert w == 1.0 and operator_allclose_up_to_phase(_inject(3, SWAP), u @ CZ)
    (w, u), = cat["swap_after_first"].operators
    assert operator_allclose_up_to_phase(_inject(1, SWAP), u @ CZ)
    mids = cat["mid_rotation_pauli"].operators
    assert len(mids) == 3 and all(np.isclose(w, 1 / 3) for w, _ in mids)
    for (w, u), sigma in zip(mids, (X, Y, Z)):
        assert operator_allclose_up_to_phase(_inject(2, _on_first(sigma)), u @ CZ)


def test_catalogue_probability_gating():
    noise = NoiseModel(p_1q=0.001, p_swap=0.004)
    cat = {c.name: c for c in cz_error_catalogue()}
    assert cat["swap_after_first"].prob_of(noise) == 0.004
    assert cat["mid_rotation_pauli"].prob_of(noise) == 0.001
    for c in cat.values():
        assert c.conditional_channel().is_cptp()


def test_superoperator_composition():
    a, b = depolarizing(0.1), dephasing(0.2)
    assert np.allclose(a.compose(b).superoperator(),
                       a.superoperator() @ b.superoperator(), atol=1e-13)
