"""Tests for the Pauli algebra layer against dense linear algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinmesh.paulis import (
    PauliString,
    all_paulis,
    bit_parity,
    clifford_gates,
    conjugate_pauli,
    conjugate_pauli_signed,
    mul_with_phase,
    pauli_matrix,
)
from spinmesh.states import apply_unitary


def embed(u, qubits, n):
    """Dense n-qubit embedding of a gate acting on `qubits`."""
    d = 2 ** n
    out = np.zeros((d, d), dtype=complex)
    for col in range(d):
        e = np.zeros(d, dtype=complex)
        e[col] = 1.0
        out[:, col] = apply_unitary(e.reshape((2,) * n), u, qubits, n).reshape(d)
    return out


def random_pauli(rng, n):
    return PauliString(n, int(rng.integers(0, 2 ** n)), int(rng.integers(0, 2 ** n)))


def test_label_roundtrip():
    for lab in ("I", "X", "Y", "Z", "XZ", "IYXI", "ZZZZZ"):
        assert PauliString.from_label(lab).to_label() == lab


def test_single_and_letter():
    p = PauliString.single(4, 2, "Y")
    assert p.to_label() == "IIYI"
    assert p.letter(2) == "Y" and p.letter(0) == "I"
    assert p.weight == 1 and p.support() == (2,)


def test_pauli_matrix_ordering():
    # qubit 0 is the least-significant bit of the basis index
    zi = pauli_matrix(PauliString.from_label("ZI"))  # Z on qubit 0
    assert zi[1, 1] == -1 and zi[2, 2] == 1
    xi = pauli_matrix(PauliString.from_label("XI"))
    assert xi[0, 1] == 1 and xi[1, 0] == 1 and xi[2, 3] == 1


def test_product_phases_against_dense():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        a, b = random_pauli(rng, n), random_pauli(rng, n)
        ab, k = mul_with_phase(a, b)
        lhs = pauli_matrix(a) @ pauli_matrix(b)
        rhs = (1j) ** k * pauli_matrix(ab)
        assert np.allclose(lhs, rhs, atol=1e-14)


def test_commutes_against_dense():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(1, 4))
        a, b = random_pauli(rng, n), random_pauli(rng, n)
        ma, mb = pauli_matrix(a), pauli_matrix(b)
        dense_commute = np.allclose(ma @ mb, mb @ ma)
        assert a.commutes(b) == dense_commute


def test_conjugation_matches_dense_on_random_cases():
    """U P U^dag agrees with the table-driven update on 200 random draws."""
    rng = np.random.default_rng(2024)
    gates = clifford_gates()
    names = sorted(gates)
    n = 4
    for _ in range(200):
        g = names[rng.integers(len(names))]
        nq = 1 if gates[g].shape[0] == 2 else 2
        qubits = tuple(int(q) for q in rng.choice(n, size=nq, replace=False))
        p = random_pauli(rng, n)
        q, sign = conjugate_pauli_signed(g, qubits, p)
        assert conjugate_pauli(g, qubits, p) == q
        u = embed(gates[g], qubits, n)
        lhs = u @ pauli_matrix(p) @ u.conj().T
        assert np.allclose(lhs, sign * pauli_matrix(q), atol=1e-12)


def test_cz_conjugation_spot_checks():
    cz = lambda p: conjugate_pauli("CZ", (0, 1), PauliString.from_label(p)).to_label()
    assert cz("XI") == "XZ"
    assert cz("IX") == "ZX"
    assert cz("ZI") == "ZI"
    assert cz("YZ") == "YI"


def test_all_paulis_count():
    ps = list(all_paulis(2))
    assert len(ps) == 16
    assert len(set(ps)) == 16
    assert ps[0].is_identity()


def test_bit_parity():
    assert bit_parity(0) == 0
    assert bit_parity(0b1011) == 1
    assert bit_parity(0b1111) == 0


@given(st.integers(1, 6), st.data())
@settings(max_examples=60, deadline=None)
def test_mul_is_xor_group(n, data):
    mask = st.integers(0, 2 ** n - 1)
    a = PauliString(n, data.draw(mask), data.draw(mask))
    b = PauliString(n, data.draw(mask), data.draw(mask))
    assert (a * b) * b == a  # every element squares to identity mod phase
    assert a * PauliString.identity(n) == a


@given(st.integers(1, 5), st.data())
@settings(max_examples=60, deadline=None)
def test_restrict_embed_roundtrip(n, data):
    mask = st.integers(0, 2 ** n - 1)
    p = PauliString(n, data.draw(mask), data.draw(mask))
    sub = tuple(range(n))
    assert p.restricted(sub).embedded(n, sub) == p


def test_invalid_label_rejected():
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")
