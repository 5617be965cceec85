"""Noise channels for the spin-qubit error model.

Three physical error mechanisms drive everything downstream:

* depolarizing noise with probability ``p_1q`` attached to single-qubit
  gates, initialization and measurement,
* a two-qubit SWAP error with probability ``p_swap`` attached to each
  sqrt-of-SWAP exchange pulse (symmetric over/under-rotation of the exchange
  angle by eps gives *exactly* a mixture of the ideal gate and a trailing
  SWAP, with SWAP weight sin^2(eps) ~= eps^2),
* dephasing with probability ``p_sh`` applied once to the shuttled member of
  each distributed singlet.

The controlled-Z gate is compiled as Rz(pi/2) x Rz(-pi/2), sqrt-SWAP,
Rz(pi) on the unmeasured qubit, sqrt-SWAP.  Faults inside that sequence
surface after the full gate as one of three classes (SWAP; Z.Z * SWAP;
sqrt-SWAP-conjugated single-qubit Pauli), which `cz_error_catalogue`
enumerates and the tests verify by direct propagation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .states import CZ, I2, SQRT_SWAP, SWAP, X, Y, Z, DensityOperator, exchange_unitary, rotation


@dataclass(frozen=True)
class NoiseModel:
    """Physical error probabilities; all in [0, 1]."""

    p_1q: float = 0.0
    p_swap: float = 0.0
    p_sh: float = 0.0

    def __post_init__(self):
        for name in ("p_1q", "p_swap", "p_sh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class ExchangeErrorModel:
    """Symmetric exchange-angle miscalibration: theta = pi/4 +/- epsilon."""

    epsilon: float

    @property
    def p_swap(self) -> float:
        # sin^2(eps) = eps^2 + O(eps^4); the Monte Carlo uses this weight.
        return float(np.sin(self.epsilon) ** 2)


class QuantumChannel:
    """Kraus-represented channel on a fixed number of qubits."""

    def __init__(self, kraus: list[np.ndarray], check: bool = True, atol: float = 1e-12):
        self.kraus = [np.asarray(k, dtype=complex) for k in kraus]
        d = self.kraus[0].shape[0]
        self.dim = d
        self.nq = int(round(np.log2(d)))
        if check:
            acc = sum(k.conj().T @ k for k in self.kraus)
            if not np.allclose(acc, np.eye(d), atol=max(atol, 1e-12)):
                raise ValueError("Kraus operators do not satisfy sum K^dag K = I")

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    def apply(self, dm: DensityOperator, qubits: tuple[int, ...]) -> DensityOperator:
        return dm.apply_kraus(self.kraus, qubits)

    def superoperator(self) -> np.ndarray:
        """Row-stacking superoperator: vec(E(rho)) = S vec(rho)."""
        return sum(np.kron(k, k.conj()) for k in self.kraus)

    def compose(self, other: "QuantumChannel") -> "QuantumChannel":
        """self after other (Kraus products; no compression)."""
        return QuantumChannel(
            [a @ b for a in self.kraus for b in other.kraus], check=False)

    def is_cptp(self, atol: float = 1e-12) -> bool:
        acc = sum(k.conj().T @ k for k in self.kraus)
        return bool(np.allclose(acc, np.eye(self.dim), atol=atol))


def channels_close(a: QuantumChannel, b: QuantumChannel, atol: float = 1e-12) -> bool:
    return bool(np.allclose(a.superoperator(), b.superoperator(), atol=atol))


def channel_distance(a: QuantumChannel, b: QuantumChannel) -> float:
    return float(np.max(np.abs(a.superoperator() - b.superoperator())))


def identity_channel(nq: int = 1) -> QuantumChannel:
    return QuantumChannel([np.eye(2 ** nq, dtype=complex)], check=False)


def depolarizing(p: float) -> QuantumChannel:
    """rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)."""
    return QuantumChannel([
        np.sqrt(1 - p) * I2,
        np.sqrt(p / 3) * X,
        np.sqrt(p / 3) * Y,
        np.sqrt(p / 3) * Z,
    ])


def dephasing(p: float) -> QuantumChannel:
    """rho -> (1-p) rho + p Z rho Z (shuttling phase noise)."""
    return QuantumChannel([np.sqrt(1 - p) * I2, np.sqrt(p) * Z])


def swap_error(p: float) -> QuantumChannel:
    """rho -> (1-p) rho + p SWAP rho SWAP."""
    return QuantumChannel([np.sqrt(1 - p) * np.eye(4), np.sqrt(p) * SWAP])


def noisy_sqrt_swap(model: ExchangeErrorModel) -> QuantumChannel:
    """Equal mixture of exchange rotations at pi/4 + eps and pi/4 - eps."""
    e = model.epsilon
    return QuantumChannel([
        exchange_unitary(np.pi / 4 + e) / np.sqrt(2),
        exchange_unitary(np.pi / 4 - e) / np.sqrt(2),
    ])


def sqrt_swap_error_decomposition(model: ExchangeErrorModel) -> QuantumChannel:
    """The same channel written as an incoherent mixture: ideal sqrt-SWAP
    with weight cos^2(eps) plus SWAP-after-sqrt-SWAP with weight sin^2(eps).

    The over/under-rotation cross terms cancel exactly, so this equals
    `noisy_sqrt_swap` to machine precision; the weights are eps^2-close to
    the nominal (1 - eps^2, eps^2) split.
    """
    e = model.epsilon
    return QuantumChannel([
        np.cos(e) * SQRT_SWAP,
        np.sin(e) * (SWAP @ SQRT_SWAP),
    ])


# ---------------------------------------------------------------------------
# Controlled-Z compilation and its fault classes
# ---------------------------------------------------------------------------

def _on_first(u: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(2), u)  # first listed qubit = least significant


def _on_second(u: np.ndarray) -> np.ndarray:
    return np.kron(u, np.eye(2))


def cz_sequence() -> list[np.ndarray]:
    """The compiled CZ as a list of 4x4 factors, first applied first.

    Qubit 1 (first/least-significant slot) is the leg that stays in the
    circuit; qubit 2 is the X-measured leg.
    """
    return [
        _on_first(rotation("z", np.pi / 2)) @ _on_second(rotation("z", -np.pi / 2)),
        SQRT_SWAP,
        _on_first(rotation("z", np.pi)),
        SQRT_SWAP,
    ]


def cz_from_sequence() -> np.ndarray:
    u = np.eye(4, dtype=complex)
    for f in cz_sequence():
        u = f @ u
    return u


@dataclass(frozen=True)
class CZErrorClass:
    """One fault class of the compiled CZ, expressed *after* the ideal gate.

    `operators` is a list of (weight, unitary); weights sum to 1 and give the
    conditional distribution once the class fires (probability `prob_of`
    evaluated on a NoiseModel).
    """

    name: str
    prob_attr: str  # which NoiseModel field gates this class
    operators: tuple[tuple[float, np.ndarray], ...]

    def prob_of(self, noise: NoiseModel) -> float:
        return getattr(noise, self.prob_attr)

    def conditional_channel(self) -> QuantumChannel:
        return QuantumChannel(
            [np.sqrt(w) * u for w, u in self.operators], check=False)


def cz_attached_noise(noise: NoiseModel) -> QuantumChannel:
    """Everything that can fail inside one compiled CZ, as a single channel
    positioned after the ideal gate.

    Faults: depolarizing (p_1q) after each of the three Rz's, and a SWAP
    error (p_swap) after each of the two sqrt-SWAPs.  The faults do not
    commute with a twirl of the whole gate individually, so downstream code
    twirls this composite channel rather than the per-class catalogue.
    """
    dep_q1 = QuantumChannel([_on_first(k) for k in depolarizing(noise.p_1q).kraus], check=False)
    dep_q2 = QuantumChannel([_on_second(k) for k in depolarizing(noise.p_1q).kraus], check=False)
    sw = swap_error(noise.p_swap)
    seq = cz_sequence()
    steps = [
        (seq[0], [dep_q1, dep_q2]),
        (seq[1], [sw]),
        (seq[2], [dep_q1]),
        (seq[3], [sw]),
    ]
    total = identity_channel(2)
    for factor, noise_channels in steps:
        total = QuantumChannel([factor], check=False).compose(total)
        for ch in noise_channels:
            total = ch.compose(total)
    # attach after the ideal gate: N = U_noisy o CZ^-1
    return QuantumChannel([k @ CZ.conj().T for k in total.kraus], check=False)


def cz_error_catalogue() -> list[CZErrorClass]:
    """The three non-Pauli fault classes of the compiled CZ.

    * SWAP after the second sqrt-SWAP  -> SWAP after the CZ.
    * SWAP after the first sqrt-SWAP   -> (Z1 Z2) . SWAP after the CZ.
    * Pauli sigma_i on qubit 1 after the mid Rz(pi) -> sqrt-SWAP . sigma_i1
      . sqrt-SWAP^dag after the CZ.

    Pre-gate rotation noise (after the two opening Rz's) stays Pauli and is
    handled as ordinary depolarizing locations, not listed here.
    """
    zz = _on_first(Z) @ _on_second(Z)
    mid = tuple(
        (1.0 / 3.0, SQRT_SWAP @ _on_first(sigma) @ SQRT_SWAP.conj().T)
        for sigma in (X, Y, Z)
    )
    return [
        CZErrorClass("swap_after_second", "p_swap", ((1.0, SWAP),)),
        CZErrorClass("swap_after_first", "p_swap", ((1.0, zz @ SWAP),)),
        CZErrorClass("mid_rotation_pauli", "p_1q", mid),
    ]
