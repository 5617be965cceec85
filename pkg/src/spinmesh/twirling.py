"""Pauli twirling, including the reduced {I, X2} twirl for measured CZ legs.

Twirling converts an arbitrary channel into an incoherent Pauli mixture by
averaging conjugations over a gate set.  The full 4^n-element set always
works; the point proved here operationally is that for a controlled-Z whose
second qubit is immediately X-measured -- with the *individual* result
forgotten and only the joint parity with the leg's entangled partner kept --
the two-element set {I, X2} already produces the same effective process on
(continuing qubit, parity-flip bit) as the full sixteen-element twirl.  The
pre-gate X2 does not commute with CZ; permuting it through turns it into
Z1 X2 applied before the gate, with a plain X2 after the noise; that is the
physically applied sequence simulated in `gadget_instrument`.

The effective process is represented as a probability table over
(single-qubit Pauli on the continuing leg, parity-flip bit).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import QuantumChannel
from .paulis import PauliString, all_paulis, pauli_matrix
from .states import CZ, DensityOperator, bell_pair


@dataclass(frozen=True)
class TwirlGateSet:
    """Conjugating Pauli gate set; must contain the identity."""

    gates: tuple[PauliString, ...]

    def __post_init__(self):
        if not self.gates:
            raise ValueError("empty twirl gate set")
        n = self.gates[0].n
        if any(g.n != n for g in self.gates):
            raise ValueError("mixed arities in twirl gate set")
        if not any(g.is_identity() for g in self.gates):
            raise ValueError("twirl gate set must include the identity")

    @property
    def n(self) -> int:
        return self.gates[0].n


def full_set(n: int) -> TwirlGateSet:
    return TwirlGateSet(tuple(all_paulis(n)))


# {I, X on the measured (second) leg} -- label letters read qubit 0 first.
REDUCED_MEASURED_LEG = TwirlGateSet(
    (PauliString.from_label("II"), PauliString.from_label("IX")))


@dataclass
class PauliChannel:
    """Probability map over phase-free Pauli strings."""

    n: int
    probabilities: dict[PauliString, float] = field(default_factory=dict)

    def validate(self, atol: float = 1e-10) -> "PauliChannel":
        total = sum(self.probabilities.values())
        if abs(total - 1.0) > atol:
            raise ValueError(f"Pauli channel mass {total} != 1")
        low = min(self.probabilities.values(), default=0.0)
        if low < -1e-12:
            raise ValueError(f"negative Pauli weight {low}")
        return self

    def prob(self, p: PauliString) -> float:
        return self.probabilities.get(p, 0.0)

    def as_channel(self) -> QuantumChannel:
        kraus = [np.sqrt(max(w, 0.0)) * pauli_matrix(p)
                 for p, w in self.probabilities.items() if w > 0]
        return QuantumChannel(kraus, check=False)

    def identity_mass(self) -> float:
        return self.prob(PauliString.identity(self.n))


def pauli_twirl(channel: QuantumChannel, gate_set: TwirlGateSet) -> QuantumChannel:
    """(1/|S|) sum_g g (channel(g . g)) g, by exact enumeration."""
    if gate_set.n != channel.nq:
        raise ValueError("twirl set arity does not match channel arity")
    scale = 1.0 / np.sqrt(len(gate_set.gates))
    kraus = []
    for g in gate_set.gates:
        m = pauli_matrix(g)
        for k in channel.kraus:
            kraus.append(scale * (m @ k @ m))
    return QuantumChannel(kraus, check=False)


def pauli_transfer_matrix(channel: QuantumChannel) -> np.ndarray:
    """R[a, b] = tr(P_a channel(P_b)) / 2^n over the all_paulis order."""
    ps = list(all_paulis(channel.nq))
    d = channel.dim
    mats = [pauli_matrix(p) for p in ps]
    r = np.zeros((len(ps), len(ps)))
    for b, pb in enumerate(mats):
        out = channel(pb)
        for a, pa in enumerate(mats):
            r[a, b] = np.real(np.trace(pa @ out)) / d
    return r


def extract_pauli_diagonal(channel: QuantumChannel, atol: float = 1e-8) -> PauliChannel:
    """Pauli-basis diagonal of a (twirled) channel as a probability map.

    Inverts R_PP = sum_Q p_Q (-1)^<P,Q> by the symplectic Walsh transform.
    Exact for Pauli-diagonal channels; a genuinely negative weight signals a
    channel that was not twirled first.
    """
    n = channel.nq
    ps = list(all_paulis(n))
    d = channel.dim
    diag = np.array(
        [np.real(np.trace(pauli_matrix(p) @ channel(pauli_matrix(p)))) / d for p in ps])
    probs: dict[PauliString, float] = {}
    for q in ps:
        w = sum(diag[i] * (1 if p.commutes(q) else -1) for i, p in enumerate(ps)) / len(ps)
        if w < -atol:
            raise ValueError(f"negative Pauli weight {w} at {q.to_label()}; twirl first")
        probs[q] = float(w)
    return PauliChannel(n, probs)


def twirl_to_pauli_channel(channel: QuantumChannel) -> PauliChannel:
    """Full-set twirl followed by diagonal extraction."""
    return extract_pauli_diagonal(pauli_twirl(channel, full_set(channel.nq)))


# ---------------------------------------------------------------------------
# Measurement-terminated CZ gadget
# ---------------------------------------------------------------------------
#
# The reduced twirl is *not* equivalent to the full twirl if the measured
# leg's individual outcome is kept: it only becomes equivalent once the
# protocol forgets the outcome and retains the joint parity with the leg's
# entangled partner.  The extraction register therefore reproduces the whole
# context:
#
#   wire 0: reference for the continuing leg          (kept, quantum)
#   wire 1: continuing leg q1 of the noisy CZ         (kept, quantum)
#   wire 2: measured leg q2                           (X-measured)
#   wire 3: partner of q2 (other half of the pair)    (X-measured)
#   wire 4: continuing leg of the partner's own CZ    (kept, quantum)
#   wire 5: reference for wire 4                      (kept, quantum)
#
# Wires (2, 3) start maximally entangled; the partner's CZ (4, 3) is ideal.
# Only the parity m2 xor m3 is recorded.

_GADGET_N = 6
_Q1, _Q2, _PARTNER, _PARTNER_Q1 = 1, 2, 3, 4
_KEEP = (0, 1, 4, 5)


def _gadget_input() -> DensityOperator:
    st = bell_pair(_GADGET_N, 0, _Q1)
    bell_pair(_GADGET_N, _Q2, _PARTNER, state=st)
    bell_pair(_GADGET_N, 5, _PARTNER_Q1, state=st)
    return DensityOperator.from_state(st)


def gadget_instrument(cz_noise: QuantumChannel | None, scheme: str) -> list[np.ndarray]:
    """Parity-resolved instrument [chi_even, chi_odd] of the measured-CZ gadget.

    chi_p is the unnormalized output operator on the four kept wires given
    the maximally entangled input, with joint X-outcome parity p on the
    measured pair.  scheme: 'none' (no twirl), 'reduced' ({I, X2}, pre-op
    permuted through the CZ to Z1 X2), or 'full' (all 16 Paulis sandwiching
    the noise).  The post gate runs before the measurement, so no classical
    relabeling is needed -- an anticommuting post gate flips the recorded
    outcome physically.
    """
    if scheme == "none":
        branches = [(None, None, 1.0)]
    elif scheme == "reduced":
        zx = pauli_matrix(PauliString.from_label("ZX"))
        branches = [(None, None, 0.5), (zx, pauli_matrix(PauliString.from_label("IX")), 0.5)]
    elif scheme == "full":
        branches = [(pauli_matrix(g), pauli_matrix(g), 1.0 / 16.0) for g in all_paulis(2)]
    else:
        raise ValueError(f"unknown twirl scheme {scheme!r}")

    d = 2 ** len(_KEEP)
    chi = [np.zeros((d, d), dtype=complex), np.zeros((d, d), dtype=complex)]
    for pre, post, weight in branches:
        dm = _gadget_input()
        if pre is not None and scheme == "reduced":
            dm.apply_unitary(pre, (_Q1, _Q2))  # before the gate (permuted form)
        dm.apply_unitary(CZ, (_Q1, _Q2))
        if pre is not None and scheme == "full":
            dm.apply_unitary(pre, (_Q1, _Q2))  # mathematical twirl of the noise
        if cz_noise is not None:
            cz_noise.apply(dm, (_Q1, _Q2))
        if post is not None:
            dm.apply_unitary(post, (_Q1, _Q2))
        dm.apply_unitary(CZ, (_PARTNER_Q1, _PARTNER))
        for m2, _, a in dm.measurement_branches(_Q2, basis="X"):
            for m3, _, b in a.measurement_branches(_PARTNER, basis="X"):
                chi[m2 ^ m3] += weight * b.partial_trace(keep=_KEEP).rho
    return chi


@dataclass
class MeasuredGadgetChannel:
    """Pauli process on (continuing qubit, parity-flip bit).

    entries[(letter, flip)] = probability that the gadget applies `letter`
    to the surviving leg and XORs `flip` into the measured parity.
    """

    entries: dict[tuple[str, int], float]
    residual: float = 0.0

    def validate(self, atol: float = 1e-9) -> "MeasuredGadgetChannel":
        total = sum(self.entries.values())
        if abs(total - 1.0) > atol:
            raise ValueError(f"gadget table mass {total} != 1")
        if min(self.entries.values()) < -1e-9:
            raise ValueError("negative gadget probability")
        return self

    def prob(self, letter: str, flip: int) -> float:
        return self.entries.get((letter, flip), 0.0)

    def close_to(self, other: "MeasuredGadgetChannel", atol: float = 1e-10) -> bool:
        keys = set(self.entries) | set(other.entries)
        return all(abs(self.prob(*k) - other.prob(*k)) <= atol for k in keys)


def _solve_gadget_table(chi: list[np.ndarray]) -> MeasuredGadgetChannel:
    """Decompose an instrument over the ideal one conjugated by (P1, flip)."""
    ideal = gadget_instrument(None, "none")
    cols, keys = [], []
    for letter in "IXYZ":
        # q1 sits at kept-register position 1
        u = pauli_matrix(PauliString.single(len(_KEEP), 1, letter))
        for flip in (0, 1):
            keys.append((letter, flip))
            cols.append(np.concatenate(
                [(u @ ideal[m ^ flip] @ u.conj().T).reshape(-1) for m in (0, 1)]))
    target = np.concatenate([chi[0].reshape(-1), chi[1].reshape(-1)])
    m = np.array(cols).T
    sol, *_ = np.linalg.lstsq(m, target, rcond=None)
    residual = float(np.max(np.abs(m @ sol - target)))
    if np.max(np.abs(sol.imag)) > 1e-9:
        raise ValueError("gadget decomposition has imaginary weights")
    entries = {k: float(w) for k, w in zip(keys, sol.real)}
    return MeasuredGadgetChannel(entries, residual)


def reduced_twirl_gadget(cz_noise: QuantumChannel) -> MeasuredGadgetChannel:
    """Effective (P1, flip) table of the {I, X2}-twirled measured-CZ gadget.

    The decomposition residual is stored on the result; a large residual
    means the twirled gadget is *not* Pauli-diagonal, which violates the
    construction and raises.
    """
    table = _solve_gadget_table(gadget_instrument(cz_noise, "reduced"))
    if table.residual > 1e-9:
        raise ValueError(f"reduced twirl left non-Pauli structure (residual {table.residual:.2e})")
    return table.validate()


def full_twirl_gadget(cz_noise: QuantumChannel) -> MeasuredGadgetChannel:
    """Same table under the full 16-Pauli twirl (the reference construction)."""
    table = _solve_gadget_table(gadget_instrument(cz_noise, "full"))
    return table.validate()


def gadget_table_from_diagonal(diag: PauliChannel) -> MeasuredGadgetChannel:
    """Marginalize a 2-qubit Pauli diagonal onto (q1 letter, X-flip of q2).

    The measured leg cannot distinguish I from X (no flip) nor Z from Y
    (flip), so those pairs merge.
    """
    entries: dict[tuple[str, int], float] = {}
    for p, w in diag.probabilities.items():
        key = (p.letter(0), 0 if p.letter(1) in "IX" else 1)
        entries[key] = entries.get(key, 0.0) + w
    return MeasuredGadgetChannel(entries)
