"""State-vector / density-operator layer tests."""

import numpy as np
import pytest

from spinmesh.paulis import PauliString
from spinmesh.states import (
    CZ,
    SQRT_SWAP,
    SWAP,
    DensityOperator,
    StateVector,
    X,
    Y,
    Z,
    bell_pair,
    exchange_unitary,
    operator_allclose_up_to_phase,
    rotation,
    singlet,
)


def test_apply_places_gate_on_named_qubit():
    for k in range(4):
        sv = StateVector(4).apply(X, (k,))
        assert np.argmax(np.abs(sv.psi)) == 2 ** k


def test_two_qubit_ordering():
    sv = StateVector(3).apply(X, (0,)).apply(SWAP, (0, 2))
    assert np.argmax(np.abs(sv.psi)) == 4


def test_exchange_composition_is_additive():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.uniform(-np.pi, np.pi, 2)
        assert np.allclose(
            exchange_unitary(a) @ exchange_unitary(b),
            exchange_unitary(a + b), atol=1e-12)


def test_sqrt_swap_squares_to_swap():
    assert operator_allclose_up_to_phase(SQRT_SWAP @ SQRT_SWAP, SWAP)
    canonical = np.array(
        [[1, 0, 0, 0],
         [0, (1 + 1j) / 2, (1 - 1j) / 2, 0],
         [0, (1 - 1j) / 2, (1 + 1j) / 2, 0],
         [0, 0, 0, 1]], dtype=complex)
    assert operator_allclose_up_to_phase(SQRT_SWAP, canonical, atol=1e-12)


def test_rotation_period():
    for ax in "xyz":
        assert operator_allclose_up_to_phase(rotation(ax, 2 * np.pi), np.eye(2))
        assert np.allclose(rotation(ax, 0), np.eye(2))


def test_singlet_state():
    sv = singlet(2, 0, 1)
    v = sv.psi
    # (|01> - |10>)/sqrt(2) up to global sign lives on indices 1 and 2
    assert np.isclose(abs(v[1]), 1 / np.sqrt(2))
    assert np.isclose(abs(v[2]), 1 / np.sqrt(2))
    assert np.isclose(v[1] + v[2], 0)
    assert np.isclose(abs(v[0]), 0) and np.isclose(abs(v[3]), 0)
    # rotationally invariant under simultaneous single-qubit rotation
    u = rotation("y", 0.7) @ rotation("x", -1.1)
    rot = sv.copy().apply(u, (0,)).apply(u, (1,))
    assert np.isclose(abs(rot.overlap(sv)), 1.0)


def test_singlet_pauli_expectations():
    dm = DensityOperator.from_state(singlet(2, 0, 1))
    for lab, want in [("XX", -1.0), ("YY", -1.0), ("ZZ", -1.0), ("IZ", 0.0), ("XY", 0.0)]:
        got = dm.expectation(PauliString.from_label(lab))
        assert np.isclose(got, want, atol=1e-12), lab


def test_singlet_on_embedded_pair():
    sv = singlet(4, 1, 3)
    assert np.isclose(sv.expectation(PauliString.from_label("IXIX")), -1.0)
    assert np.isclose(sv.expectation(PauliString.from_label("IZIZ")), -1.0)


def test_bell_pair():
    v = bell_pair(2, 0, 1).psi
    assert np.isclose(v[0], 1 / np.sqrt(2)) and np.isclose(v[3], 1 / np.sqrt(2))


def test_measurement_branches_z():
    sv = StateVector(2).apply(rotation("y", np.pi / 2), (0,))
    branches = sv.measurement_branches(0, basis="Z")
    probs = {bit: p for bit, p, _ in branches}
    assert np.isclose(probs[0], 0.5) and np.isclose(probs[1], 0.5)
    _, _, post = branches[1]
    assert np.isclose(abs(post.psi[1]), 1.0)


def test_measurement_branches_x():
    # |0> is an even mix of |+> and |->
    p0, p1 = StateVector(1).probabilities_measure(0, basis="X")
    assert np.isclose(p0, 0.5) and np.isclose(p1, 0.5)
    plus = StateVector(1, np.array([1, 1]) / np.sqrt(2))
    assert np.isclose(plus.probabilities_measure(0, basis="X")[0], 1.0)


def test_measure_is_projective():
    rng = np.random.default_rng(0)
    sv = bell_pair(2, 0, 1)
    b0 = sv.measure(0, rng)
    b1 = sv.measure(1, rng)
    assert b0 == b1  # perfectly correlated in Z
    assert np.isclose(sv.norm(), 1.0)


def test_density_tracks_state_vector():
    rng = np.random.default_rng(5)
    sv = StateVector(3)
    dm = DensityOperator.from_state(sv)
    for _ in range(6):
        th = rng.uniform(0, 2 * np.pi)
        q = int(rng.integers(3))
        u = rotation("xyz"[int(rng.integers(3))], th)
        sv.apply(u, (q,))
        dm.apply_unitary(u, (q,))
        qs = tuple(int(x) for x in rng.choice(3, 2, replace=False))
        sv.apply(SQRT_SWAP, qs)
        dm.apply_unitary(SQRT_SWAP, qs)
    ref = np.outer(sv.psi, sv.psi.conj())
    assert np.allclose(dm.rho, ref, atol=1e-12)


def test_partial_trace():
    red = DensityOperator.from_state(bell_pair(2, 0, 1)).partial_trace(keep=(0,))
    assert np.allclose(red.rho, np.eye(2) / 2, atol=1e-12)
    prod = DensityOperator.from_state(StateVector(2).apply(X, (1,)))
    red0 = prod.partial_trace(keep=(0,))
    assert np.allclose(red0.rho, np.diag([1.0, 0.0]), atol=1e-12)
    red1 = prod.partial_trace(keep=(1,))
    assert np.allclose(red1.rho, np.diag([0.0, 1.0]), atol=1e-12)


def test_density_measurement_branches():
    dm = DensityOperator.from_state(StateVector(1, np.array([1, 1]) / np.sqrt(2)))
    branches = dm.measurement_branches(0, basis="X")
    assert np.isclose(branches[0][1], 1.0, atol=1e-12)
    assert np.isclose(branches[1][1], 0.0, atol=1e-12)


def test_density_kraus_application():
    dm = DensityOperator(1)
    p = 0.3
    dm.apply_kraus([np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * X], (0,))
    assert np.allclose(np.diag(dm.rho).real, [1 - p, p], atol=1e-12)
    assert np.isclose(dm.trace().real, 1.0)


def test_qubit_caps():
    with pytest.raises(ValueError):
        StateVector(40)
    with pytest.raises(ValueError):
        DensityOperator(14)
