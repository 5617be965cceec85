"""Phase-free Pauli strings and Clifford conjugation rules.

Qubit-ordering convention (the single authoritative statement for the whole
package): *little-endian*.  Qubit ``k`` is bit ``k`` of a computational basis
index, so the basis state ``|b_{n-1} ... b_1 b_0>`` has index
``sum_k b_k 2**k`` and qubit 0 is the least-significant bit.  Dense state
vectors and operators in :mod:`spinmesh.states` follow the same convention.
Pauli string labels read left to right in *ascending* qubit order: the label
``"XZ"`` means X on qubit 0 and Z on qubit 1.

A Pauli string is stored as an (x-mask, z-mask) integer pair; per qubit the
letter encoding is I=(0,0), X=(1,0), Y=(1,1), Z=(0,1).  Multiplication is
mask XOR, commutation is the symplectic form.  Signs are dropped for frame
propagation (the Monte Carlo never needs them); the phase-aware variants used
by the density-operator oracle live alongside and are generated from explicit
2x2 / 4x4 matrices at import time so they cannot drift from the definitions.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iproduct

import numpy as np

_LETTERS = "IXYZ"
# letter index -> (x, z) bit pair; index = x + 2*z gives I=0, X=1, Z=2, Y=3,
# so we keep an explicit table instead of arithmetic tricks.
_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_FROM_BITS = {v: k for k, v in _BITS.items()}


@dataclass(frozen=True)
class PauliString:
    """Phase-free n-qubit Pauli operator as an (x-mask, z-mask) pair."""

    n: int
    x: int
    z: int

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, 0, 0)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        x, z = _BITS[letter]
        return cls(n, x << qubit, z << qubit)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for q, ch in enumerate(label):
            if ch not in _BITS:
                raise ValueError(f"invalid Pauli letter {ch!r} in {label!r}")
            xb, zb = _BITS[ch]
            x |= xb << q
            z |= zb << q
        return cls(len(label), x, z)

    def to_label(self) -> str:
        return "".join(self.letter(q) for q in range(self.n))

    def letter(self, qubit: int) -> str:
        return _FROM_BITS[((self.x >> qubit) & 1, (self.z >> qubit) & 1)]

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("Pauli strings act on different qubit counts")
        return PauliString(self.n, self.x ^ other.x, self.z ^ other.z)

    def commutes(self, other: "PauliString") -> bool:
        """True iff the symplectic form <self, other> vanishes."""
        return (bit_parity(self.x & other.z) ^ bit_parity(self.z & other.x)) == 0

    @property
    def weight(self) -> int:
        return bin(self.x | self.z).count("1")

    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n) if (mask >> q) & 1)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def restricted(self, qubits: tuple[int, ...]) -> "PauliString":
        """Project onto a subset of qubits (marginalizing the rest).

        The result is re-indexed: output qubit i carries the letter of input
        qubit ``qubits[i]``.
        """
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x >> q) & 1) << i
            z |= ((self.z >> q) & 1) << i
        return PauliString(len(qubits), x, z)

    def embedded(self, n: int, qubits: tuple[int, ...]) -> "PauliString":
        """Embed into an n-qubit register, qubit i -> qubits[i]."""
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x >> i) & 1) << q
            z |= ((self.z >> i) & 1) << q
        return PauliString(n, x, z)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"PauliString({self.to_label()!r})"


def bit_parity(v: int) -> int:
    return bin(v).count("1") & 1


def all_paulis(n: int):
    """Iterate over all 4**n phase-free Pauli strings (I first)."""
    for letters in _iproduct(_LETTERS, repeat=n):
        yield PauliString.from_label("".join(letters))


# ---------------------------------------------------------------------------
# Matrix-generated tables: single-qubit product phases and Clifford
# conjugation with signs.  Everything below is derived from the 2x2 matrices
# once at import; hand-written tableaus are easy to get subtly wrong.
# ---------------------------------------------------------------------------

_M1 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense matrix of a Pauli string (little-endian kron order)."""
    out = np.array([[1.0 + 0j]])
    for q in range(p.n):
        out = np.kron(_M1[p.letter(q)], out)
    return out


def _match_phase(m: np.ndarray, target: np.ndarray) -> complex:
    """Return c with m = c * target (target a Pauli matrix)."""
    idx = np.unravel_index(np.argmax(np.abs(target)), target.shape)
    c = m[idx] / target[idx]
    if not np.allclose(m, c * target, atol=1e-12):
        raise ValueError("operator is not proportional to the target Pauli")
    return complex(c)


def _build_product_phase():
    tbl = {}
    for a in _LETTERS:
        for b in _LETTERS:
            prod = _M1[a] @ _M1[b]
            xa, za = _BITS[a]
            xb, zb = _BITS[b]
            c = _FROM_BITS[(xa ^ xb, za ^ zb)]
            phase = _match_phase(prod, _M1[c])
            k = int(round(np.angle(phase) / (np.pi / 2))) % 4
            tbl[(a, b)] = (c, k)
    return tbl


_PRODUCT_PHASE = _build_product_phase()


def mul_with_phase(a: PauliString, b: PauliString) -> tuple[PauliString, int]:
    """Product with phase: matrix(a) @ matrix(b) = i**k * matrix(a*b)."""
    k = 0
    for q in range(a.n):
        _, kq = _PRODUCT_PHASE[(a.letter(q), b.letter(q))]
        k += kq
    return a * b, k % 4


# Clifford gate matrices used only to generate conjugation tables.  Two-qubit
# matrices are written in the basis |q1 q0> where the *first listed* qubit is
# the least-significant index bit (matching the package convention).
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j]).astype(complex)


def _two_qubit(u_pairs):
    m = np.zeros((4, 4), dtype=complex)
    for (a, b), (ap, bp, amp) in u_pairs.items():
        m[ap + 2 * bp, a + 2 * b] = amp
    return m


_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_CNOT = _two_qubit({(a, b): (a, b ^ a, 1.0) for a in (0, 1) for b in (0, 1)})
_SWAP = _two_qubit({(a, b): (b, a, 1.0) for a in (0, 1) for b in (0, 1)})

_GATES_1Q = {"H": _H, "S": _S, "SDG": _S.conj().T, "X": _M1["X"], "Y": _M1["Y"], "Z": _M1["Z"]}
_GATES_2Q = {"CZ": _CZ, "CNOT": _CNOT, "SWAP": _SWAP}


def clifford_gates() -> dict[str, np.ndarray]:
    """Supported Clifford gate names with their defining matrices (copies)."""
    out = {k: v.copy() for k, v in _GATES_1Q.items()}
    out.update({k: v.copy() for k, v in _GATES_2Q.items()})
    return out


def _kron2(a_letter: str, b_letter: str) -> np.ndarray:
    # qubit order: first letter = least significant factor
    return np.kron(_M1[b_letter], _M1[a_letter])


def _build_conjugation_tables():
    t1, t2 = {}, {}
    for name, u in _GATES_1Q.items():
        for a in _LETTERS:
            conj = u @ _M1[a] @ u.conj().T
            for c in _LETTERS:
                try:
                    phase = _match_phase(conj, _M1[c])
                except ValueError:
                    continue
                t1[(name, a)] = (c, int(round(phase.real)))
                break
    for name, u in _GATES_2Q.items():
        for a in _LETTERS:
            for b in _LETTERS:
                conj = u @ _kron2(a, b) @ u.conj().T
                done = False
                for c, d in _iproduct(_LETTERS, repeat=2):
                    try:
                        phase = _match_phase(conj, _kron2(c, d))
                    except ValueError:
                        continue
                    t2[(name, a, b)] = (c, d, int(round(phase.real)))
                    done = True
                    break
                if not done:  # pragma: no cover - would mean a non-Clifford entry
                    raise RuntimeError(f"gate {name} is not Clifford on {a}{b}")
    return t1, t2


_CONJ_1Q, _CONJ_2Q = _build_conjugation_tables()


def conjugate_pauli(gate: str, qubits: tuple[int, ...], p: PauliString) -> PauliString:
    """Phase-free Clifford conjugation U p U^dag for a named gate.

    Supported gates: H, S, SDG, X, Y, Z (one qubit); CZ, CNOT, SWAP (two
    qubits, CNOT control listed first).
    """
    q, _ = conjugate_pauli_signed(gate, qubits, p)
    return q


def conjugate_pauli_signed(gate: str, qubits: tuple[int, ...], p: PauliString) -> tuple[PauliString, int]:
    """Clifford conjugation with the real sign (+1/-1) retained."""
    if gate in _CONJ_1Q or gate in _GATES_1Q:
        (q,) = qubits
        c, sign = _CONJ_1Q[(gate, p.letter(q))]
        out = _set_letter(p, q, c)
        return out, sign
    if gate in _GATES_2Q:
        qa, qb = qubits
        c, d, sign = _CONJ_2Q[(gate, p.letter(qa), p.letter(qb))]
        out = _set_letter(_set_letter(p, qa, c), qb, d)
        return out, sign
    raise ValueError(f"unknown Clifford gate {gate!r}")


def _set_letter(p: PauliString, qubit: int, letter: str) -> PauliString:
    xb, zb = _BITS[letter]
    mask = ~(1 << qubit)
    return PauliString(p.n, (p.x & mask) | (xb << qubit), (p.z & mask) | (zb << qubit))
