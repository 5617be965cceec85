"""Dense state-vector and density-operator simulation for small registers.

Follows the little-endian qubit convention documented in
:mod:`spinmesh.paulis` (qubit k = bit k of the basis index).  Two-qubit gate
matrices are written in the basis where the *first listed* qubit is the
least-significant index bit.

The density-operator path is deliberately capped at 12 qubits: that is all
the repository ever needs (the check-round oracle works on 10 wires), and it
keeps an accidental exponential blow-up from looking like a hang.
"""

from __future__ import annotations

import numpy as np

from .paulis import PauliString, pauli_matrix

MAX_STATE_QUBITS = 16
MAX_DENSITY_QUBITS = 12

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.diag([1, 1j]).astype(complex)

SWAP = np.array(
    [[1, 0, 0, 0],
     [0, 0, 1, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)

_AXES = {"x": X, "y": Y, "z": Z}


def rotation(axis: str, theta: float) -> np.ndarray:
    """exp(-i theta sigma_axis / 2)."""
    sigma = _AXES[axis]
    return np.cos(theta / 2) * I2 - 1j * np.sin(theta / 2) * sigma


def exchange_unitary(theta: float) -> np.ndarray:
    """Exchange evolution cos(theta) I - i sin(theta) SWAP.

    theta = J*tau/2; theta=pi/4 is sqrt-of-SWAP, theta=pi/2 is SWAP (up to
    phase).  Composition is additive: U(a) @ U(b) == U(a+b) exactly.
    """
    return np.cos(theta) * np.eye(4, dtype=complex) - 1j * np.sin(theta) * SWAP


SQRT_SWAP = exchange_unitary(np.pi / 4)


def apply_unitary(psi: np.ndarray, u: np.ndarray, qubits: tuple[int, ...], n: int) -> np.ndarray:
    """Apply a k-qubit unitary to the listed qubits of an n-qubit vector."""
    k = len(qubits)
    ut = np.asarray(u, dtype=complex).reshape((2,) * (2 * k))
    # tensor axis of qubit q is n-1-q (C order, last axis = qubit 0);
    # matrix index bits run most-significant-first = reversed listed order.
    in_axes = [n - 1 - q for q in reversed(qubits)]
    out = np.tensordot(ut, psi.reshape((2,) * n), axes=(list(range(k, 2 * k)), in_axes))
    out = np.moveaxis(out, list(range(k)), in_axes)
    return np.ascontiguousarray(out).reshape(-1)


class StateVector:
    """Mutable dense pure state."""

    def __init__(self, n: int, data: np.ndarray | None = None):
        if n > MAX_STATE_QUBITS:
            raise ValueError(f"refusing state vector on {n} qubits (cap {MAX_STATE_QUBITS})")
        self.n = n
        if data is None:
            self.psi = np.zeros(2 ** n, dtype=complex)
            self.psi[0] = 1.0
        else:
            self.psi = np.asarray(data, dtype=complex).reshape(2 ** n).copy()

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.psi)

    def apply(self, u: np.ndarray, qubits: tuple[int, ...]) -> "StateVector":
        self.psi = apply_unitary(self.psi, u, qubits, self.n)
        return self

    def apply_pauli(self, p: PauliString) -> "StateVector":
        for q in p.support():
            letter = p.letter(q)
            self.apply({"X": X, "Y": Y, "Z": Z}[letter], (q,))
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.psi, other.psi))

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|^2 -- insensitive to global phase."""
        return abs(self.overlap(other)) ** 2

    def expectation(self, p: PauliString) -> float:
        work = self.copy().apply_pauli(p)
        return float(np.real(np.vdot(self.psi, work.psi)))

    def probabilities_measure(self, qubit: int, basis: str = "Z") -> tuple[float, float]:
        """(p0, p1) for measuring one qubit; basis 'Z' or 'X'."""
        branches = self.measurement_branches(qubit, basis)
        return branches[0][1], branches[1][1]

    def measurement_branches(self, qubit: int, basis: str = "Z"):
        """Both projective branches as [(outcome_bit, prob, normalized state)].

        Outcome bit 0 is the +1 eigenvalue (|0> for Z, |+> for X).
        """
        work = self.copy()
        if basis == "X":
            work.apply(H, (qubit,))
        elif basis != "Z":
            raise ValueError(f"unsupported basis {basis!r}")
        t = work.psi.reshape((2,) * self.n)
        axis = self.n - 1 - qubit
        out = []
        for bit in (0, 1):
            proj = np.zeros_like(t)
            sl = [slice(None)] * self.n
            sl[axis] = bit
            proj[tuple(sl)] = t[tuple(sl)]
            p = float(np.sum(np.abs(proj) ** 2))
            st = StateVector(self.n, proj.reshape(-1))
            if basis == "X":
                st.apply(H, (qubit,))
            if p > 0:
                st.psi /= np.sqrt(p)
            out.append((bit, p, st))
        return out

    def measure(self, qubit: int, rng: np.random.Generator, basis: str = "Z") -> int:
        branches = self.measurement_branches(qubit, basis)
        p0 = branches[0][1]
        bit = 0 if rng.random() < p0 else 1
        self.psi = branches[bit][2].psi
        return bit


def bell_pair(n: int, a: int, b: int, state: StateVector | None = None) -> StateVector:
    """Overlay (|00>+|11>)/sqrt(2) on qubits (a, b) of |0...0> registers."""
    st = state if state is not None else StateVector(n)
    hadamard_then_cnot(st, a, b)
    return st


def hadamard_then_cnot(st: StateVector, a: int, b: int) -> None:
    st.apply(H, (a,))
    cnot = np.zeros((4, 4), dtype=complex)
    for qa in (0, 1):
        for qb in (0, 1):
            cnot[(qa + 2 * (qb ^ qa)), (qa + 2 * qb)] = 1.0
    st.apply(cnot, (a, b))


def singlet(n: int, a: int, b: int, state: StateVector | None = None) -> StateVector:
    """Overlay the singlet (|01> - |10>)/sqrt(2) on qubits (a, b)."""
    st = bell_pair(n, a, b, state)
    # (X ⊗ I)(|00>+|11>) = |10>+|01>; add phase via Z on one arm: Z_b X_a gives |01> - |10> up to sign
    st.apply(X, (a,))
    st.apply(Z, (b,))
    return st


class DensityOperator:
    """Mutable dense density operator (or general operator -- linearity is
    exploited by the oracle code, which evolves non-positive operators)."""

    def __init__(self, n: int, data: np.ndarray | None = None):
        if n > MAX_DENSITY_QUBITS:
            raise ValueError(f"refusing density operator on {n} qubits (cap {MAX_DENSITY_QUBITS})")
        self.n = n
        d = 2 ** n
        if data is None:
            self.rho = np.zeros((d, d), dtype=complex)
            self.rho[0, 0] = 1.0
        else:
            self.rho = np.asarray(data, dtype=complex).reshape(d, d).copy()

    @classmethod
    def from_state(cls, st: StateVector) -> "DensityOperator":
        return cls(st.n, np.outer(st.psi, st.psi.conj()))

    def copy(self) -> "DensityOperator":
        return DensityOperator(self.n, self.rho)

    def apply_unitary(self, u: np.ndarray, qubits: tuple[int, ...]) -> "DensityOperator":
        n, k = self.n, len(qubits)
        ut = np.asarray(u, dtype=complex).reshape((2,) * (2 * k))
        t = self.rho.reshape((2,) * (2 * n))
        row_axes = [n - 1 - q for q in reversed(qubits)]
        t = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), row_axes))
        t = np.moveaxis(t, list(range(k)), row_axes)
        col_axes = [n + n - 1 - q for q in reversed(qubits)]
        t = np.tensordot(ut.conj(), t, axes=(list(range(k, 2 * k)), col_axes))
        t = np.moveaxis(t, list(range(k)), col_axes)
        self.rho = np.ascontiguousarray(t).reshape(2 ** n, 2 ** n)
        return self

    def apply_kraus(self, kraus: list[np.ndarray], qubits: tuple[int, ...]) -> "DensityOperator":
        acc = None
        base = self.rho
        for k in kraus:
            work = DensityOperator(self.n, base)
            work.apply_unitary(k, qubits)  # works for non-unitary k as well
            acc = work.rho if acc is None else acc + work.rho
        self.rho = acc
        return self

    def expectation(self, p: PauliString) -> float:
        return float(np.real(np.trace(pauli_matrix(p) @ self.rho)))

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def partial_trace(self, keep: tuple[int, ...]) -> "DensityOperator":
        n = self.n
        t = self.rho.reshape((2,) * (2 * n))
        drop = [q for q in range(n) if q not in keep]
        for q in sorted(drop, reverse=True):
            row_ax = n - 1 - q
            # locate current axis positions; after each contraction the rank
            # shrinks by two, so recompute from the live qubit list instead.
            t = np.trace(t, axis1=row_ax, axis2=row_ax + t.ndim // 2)
            n -= 1
            # relabel: removing qubit q shifts qubits above it down by one
            keep = tuple(k - 1 if k > q else k for k in keep)
        d = 2 ** len(keep)
        out = DensityOperator(len(keep), t.reshape(d, d))
        # reorder so that keep[i] -> qubit position of sorted order is preserved
        return out

    def measurement_branches(self, qubit: int, basis: str = "Z"):
        """[(outcome_bit, prob, unnormalized post DensityOperator), ...]."""
        if basis == "X":
            pl, mn = (I2 + X) / 2, (I2 - X) / 2
        elif basis == "Z":
            pl, mn = (I2 + Z) / 2, (I2 - Z) / 2
        else:
            raise ValueError(f"unsupported basis {basis!r}")
        out = []
        for bit, proj in ((0, pl), (1, mn)):
            work = self.copy()
            work.apply_unitary(proj, (qubit,))
            out.append((bit, float(np.real(work.trace())), work))
        return out


def operator_allclose_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-10) -> bool:
    """Compare two matrices up to a global complex phase."""
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) < atol:
        return bool(np.allclose(a, b, atol=atol))
    phase = a[idx] / b[idx]
    if abs(abs(phase) - 1.0) > 1e-8:
        return False
    return bool(np.allclose(a, phase * b, atol=atol))
