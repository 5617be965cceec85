"""One stabilizer-check round of the four-node module.

Wire layout (10 wires, little-endian):

    0 A data    1 A ancilla-1
    2 B data    3 B ancilla-1
    4 C data    5 C ancilla-1
    6 D data    7 D ancilla-1
    8 A ancilla-2       9 C ancilla-2

A round measures Z.Z.Z.Z (or X.X.X.X, via Hadamard-conjugated couplings) on
the four data wires:

1. singlet pairs are loaded on (1,3), (5,7), (8,9); the second member of
   each pair arrives by shuttling and picks up dephasing ``p_sh``;
2. Y_pi on wires 1, 5, 8, then CZ(1,8) and CZ(5,9), then X measurements of
   wires 8 and 9 leave the ancilla-1 wires in a GHZ state; on odd outcome
   parity an X_pi on wires 1 and 3 restores |0000> + |1111>;
3. CZ between each data wire and its ancilla-1 wire, then X measurements of
   wires 1, 3, 5, 7.  The recorded syndrome is the parity of the four
   outcomes; individual outcomes are forgotten.

Every CZ is compiled into Rz's and two sqrt-SWAPs and carries the faults of
:func:`spinmesh.channels.cz_attached_noise`; all other single-qubit gates,
initialisations and measurements carry depolarizing ``p_1q``.  Each CZ is
sandwiched in the two-branch {I, X2} twirl (pre-gate branch permuted to
Z1 X2), which is part of the physical protocol, not a simulation trick.

Two independent routes compute the exact joint distribution of (residual
Pauli on the data wires, syndrome-flip bit) for one round:

* :func:`extract_round_distribution` twirls each compiled CZ's composite
  fault channel into a (residual letter, parity flip) table, then pushes
  every fault location through the ideal Clifford skeleton and convolves
  the independent locations.
* :func:`oracle_round_distribution` evolves parity-weighted operators for a
  complete set of probe Paulis through the full noisy circuit (sparse
  Pauli-coefficient representation, exact twirl average) and inverts the
  resulting characters.

Both are exact in the noise parameters, not leading-order truncations.
Residuals are only defined modulo the measured stabilizer itself, so
comparisons go through :meth:`RoundErrorDistribution.canonicalized`.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from .channels import NoiseModel, cz_attached_noise
from .paulis import (
    PauliString,
    all_paulis,
    conjugate_pauli,
    conjugate_pauli_signed,
    mul_with_phase,
    pauli_matrix,
)
from .states import CZ as CZ_MAT
from .states import SQRT_SWAP, SWAP, H, StateVector, X, Y, Z, rotation, singlet

N_WIRES = 10
A_DATA, A_ANC1, B_DATA, B_ANC1, C_DATA, C_ANC1, D_DATA, D_ANC1, A_ANC2, C_ANC2 = range(N_WIRES)

DATA_WIRES = (A_DATA, B_DATA, C_DATA, D_DATA)
ANC1_WIRES = (A_ANC1, B_ANC1, C_ANC1, D_ANC1)
ANC2_WIRES = (A_ANC2, C_ANC2)
SINGLET_PAIRS = ((A_ANC1, B_ANC1), (C_ANC1, D_ANC1), (A_ANC2, C_ANC2))
SHUTTLED_WIRES = (B_ANC1, D_ANC1, C_ANC2)
PREP_Y_WIRES = (A_ANC1, C_ANC1, A_ANC2)
# (continuing leg, measured leg) per CZ
PREP_CZS = ((A_ANC1, A_ANC2), (C_ANC1, C_ANC2))
CHECK_CZS = ((A_DATA, A_ANC1), (B_DATA, B_ANC1), (C_DATA, C_ANC1), (D_DATA, D_ANC1))
FEEDBACK_WIRES = (A_ANC1, B_ANC1)

_ID4 = PauliString.identity(4)
_FEEDBACK_PAULI = PauliString.single(N_WIRES, A_ANC1, "X") * PauliString.single(N_WIRES, B_ANC1, "X")
_ANC_MASK = sum(1 << w for w in ANC1_WIRES + ANC2_WIRES)


@dataclass(frozen=True)
class NodeRegister:
    """Wire-role assignment of the ten-wire module."""

    roles: tuple[tuple[str, str], ...] = (
        ("data", "A"), ("ancilla1", "A"), ("data", "B"), ("ancilla1", "B"),
        ("data", "C"), ("ancilla1", "C"), ("data", "D"), ("ancilla1", "D"),
        ("ancilla2", "A"), ("ancilla2", "C"),
    )

    def __post_init__(self):
        counts = Counter(role for role, _ in self.roles)
        if len(self.roles) != N_WIRES or dict(counts) != {"data": 4, "ancilla1": 4, "ancilla2": 2}:
            raise ValueError("register needs 4 data, 4 ancilla-1 and 2 ancilla-2 wires")

    def wires(self, role: str) -> tuple[int, ...]:
        return tuple(i for i, (r, _) in enumerate(self.roles) if r == role)


def stabilizer_pauli(stabilizer_type: str) -> PauliString:
    """The measured four-qubit operator on the data wires."""
    if stabilizer_type not in ("X", "Z"):
        raise ValueError(f"stabilizer type must be 'X' or 'Z', got {stabilizer_type!r}")
    return PauliString.from_label(stabilizer_type * 4)


@dataclass
class RoundErrorDistribution:
    """Joint distribution of (data residual, syndrome flip) for one round.

    ``entries[(pauli, flip)]`` is the probability that the round acts as the
    ideal projective stabilizer measurement followed by ``pauli`` on the
    data wires, with the recorded syndrome equal to the ideal outcome XOR
    ``flip``.  A residual is physically indistinguishable from itself times
    the measured stabilizer, so comparisons and lookups use
    :meth:`canonicalized`.
    """

    stabilizer_type: str
    entries: dict[tuple[PauliString, int], float] = field(default_factory=dict)

    def validate(self, atol: float = 1e-9) -> "RoundErrorDistribution":
        total = sum(self.entries.values())
        if abs(total - 1.0) > atol:
            raise ValueError(f"round distribution mass {total!r} differs from 1 beyond {atol}")
        if self.entries and min(self.entries.values()) < -1e-12:
            raise ValueError("negative probability in round distribution")
        return self

    def prob(self, pauli: PauliString, flip: int) -> float:
        return self.entries.get((pauli, flip), 0.0)

    def identity_mass(self) -> float:
        """Probability of a harmless round (identity coset, no flip)."""
        return self.canonicalized().prob(_ID4, 0)

    def canonicalized(self) -> "RoundErrorDistribution":
        s = stabilizer_pauli(self.stabilizer_type)
        out: dict[tuple[PauliString, int], float] = {}
        for (p, f), w in self.entries.items():
            key = (_coset_representative(p, s), f)
            out[key] = out.get(key, 0.0) + w
        return RoundErrorDistribution(self.stabilizer_type, out)

    def close_to(self, other: "RoundErrorDistribution", atol: float = 1e-9) -> bool:
        if self.stabilizer_type != other.stabilizer_type:
            return False
        a = self.canonicalized().entries
        b = other.canonicalized().entries
        return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= atol for k in set(a) | set(b))

    def to_json(self) -> str:
        payload = {
            "stabilizer_type": self.stabilizer_type,
            "entries": {
                f"{p.to_label()}:{f}": w
                for (p, f), w in sorted(self.entries.items(), key=lambda kv: (kv[0][0].to_label(), kv[0][1]))
            },
        }
        return json.dumps(payload, indent=None, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RoundErrorDistribution":
        payload = json.loads(text)
        entries = {}
        for key, w in payload["entries"].items():
            label, flip = key.split(":")
            entries[(PauliString.from_label(label), int(flip))] = float(w)
        return cls(payload["stabilizer_type"], entries)


def _coset_representative(p: PauliString, s: PauliString) -> PauliString:
    q = p * s
    return p if (p.x, p.z) <= (q.x, q.z) else q


# ---------------------------------------------------------------------------
# Route (a): twirled fault tables pushed through the Clifford skeleton
# ---------------------------------------------------------------------------

def _check_parameters(noise: NoiseModel) -> None:
    for name in ("p_1q", "p_swap", "p_sh"):
        v = getattr(noise, name)
        if not 0.0 <= v <= 0.1:
            raise ValueError(f"{name}={v} outside the supported range [0, 0.1]")


def _fault_plan(stabilizer_type: str, noise: NoiseModel):
    """Ideal-op sequence plus every fault location referencing it.

    Returns (ops, locations).  ops entries: ("G", gate, wires),
    ("MX", wire, sink) with sink "prep" or "check", or ("FB",).  Locations:
    (position, "pauli", (wire, {letter: prob})) or
    (position, "cz", ((q1, q2), sink)); a location's faults are injected
    before ops[position].
    """
    stabilizer_pauli(stabilizer_type)  # validates the type
    p1, psh = noise.p_1q, noise.p_sh
    dep = {"X": p1 / 3, "Y": p1 / 3, "Z": p1 / 3}
    ops: list[tuple] = []
    locs: list[tuple] = []

    def pauli_loc(wire, dist):
        if any(dist.values()):
            locs.append((len(ops), "pauli", (wire, dist)))

    for w in ANC1_WIRES + ANC2_WIRES:      # initialisation of fresh ancillas
        pauli_loc(w, dep)
    for w in SHUTTLED_WIRES:               # pair halves that travelled
        pauli_loc(w, {"Z": psh})
    for w in PREP_Y_WIRES:
        ops.append(("G", "Y", (w,)))
        pauli_loc(w, dep)
    for pair in PREP_CZS:
        ops.append(("G", "CZ", pair))
        locs.append((len(ops), "cz", (pair, "prep")))
    for w in ANC2_WIRES:
        pauli_loc(w, dep)                  # measurement fault
        ops.append(("MX", w, "prep"))
    ops.append(("FB",))
    # The conditional feedback X's fire on odd parity.  The recorded
    # parity is exactly uniform and independent of every fault pattern
    # (the ideal GHZ branch is a fresh fair coin), so their depolarizing
    # folds to an unconditional location -- but a *joint* one: both wires
    # fire together or not at all, which matters at second order.
    if p1:
        locs.append((len(ops), "feedback_dep", p1))
    if stabilizer_type == "X":
        for w in DATA_WIRES:
            ops.append(("G", "H", (w,)))
            pauli_loc(w, dep)
    for pair in CHECK_CZS:
        ops.append(("G", "CZ", pair))
        locs.append((len(ops), "cz", (pair, "check")))
    if stabilizer_type == "X":
        for w in DATA_WIRES:
            ops.append(("G", "H", (w,)))
            pauli_loc(w, dep)
    for w in ANC1_WIRES:
        pauli_loc(w, dep)
        ops.append(("MX", w, "check"))
    return ops, locs


def _propagate(p: PauliString, position: int, ops, prep_flip: int = 0, check_flip: int = 0):
    """Push a fault through the ideal remainder of the circuit.

    Measurements absorb the letter on their wire, flipping the sink parity
    when it anticommutes with X.  An accumulated prep-parity flip makes the
    recorded GHZ parity disagree with the ideal branch, so the feedback
    step applies an extra X on wires 1 and 3 relative to the ideal run.
    """
    for op in ops[position:]:
        tag = op[0]
        if tag == "G":
            p = conjugate_pauli(op[1], op[2], p)
        elif tag == "MX":
            w = op[1]
            letter = p.letter(w)
            if letter in ("Y", "Z"):
                if op[2] == "prep":
                    prep_flip ^= 1
                else:
                    check_flip ^= 1
            if letter != "I":
                p = PauliString(p.n, p.x & ~(1 << w), p.z & ~(1 << w))
        else:  # FB
            if prep_flip:
                p = p * _FEEDBACK_PAULI
    return p.restricted(DATA_WIRES), check_flip


def _convolve(dist, outcomes):
    new: dict[tuple[PauliString, int], float] = {}
    for (r0, f0), w0 in dist.items():
        for r1, f1, w1 in outcomes:
            key = (r0 * r1, f0 ^ f1)
            new[key] = new.get(key, 0.0) + w0 * w1
    return new


@lru_cache(maxsize=None)
def _round_cz_table(p_1q: float, p_swap: float):
    """(residual letter on continuing leg, parity flip) table of one CZ.

    The composite fault channel of the whole compiled gate is twirled in
    one piece: the internal faults share a single twirl sandwich, so they
    may not be twirled class by class.
    """
    from .twirling import gadget_table_from_diagonal, twirl_to_pauli_channel

    noise = NoiseModel(p_1q=p_1q, p_swap=p_swap, p_sh=0.0)
    return gadget_table_from_diagonal(twirl_to_pauli_channel(cz_attached_noise(noise)))


def extract_round_distribution(stabilizer_type: str, noise: NoiseModel) -> RoundErrorDistribution:
    """Exact round distribution via twirled tables and Pauli propagation."""
    _check_parameters(noise)
    ops, locs = _fault_plan(stabilizer_type, noise)
    table = _round_cz_table(noise.p_1q, noise.p_swap)
    dist = {(_ID4, 0): 1.0}
    for position, kind, payload in locs:
        outcomes = []
        if kind == "pauli":
            wire, letters = payload
            bulk = 1.0 - sum(letters.values())
            if bulk:
                outcomes.append((_ID4, 0, bulk))
            for letter, w in letters.items():
                if w == 0.0:
                    continue
                r, f = _propagate(PauliString.single(N_WIRES, wire, letter), position, ops)
                outcomes.append((r, f, w))
        elif kind == "feedback_dep":
            p1 = payload
            q = {"I": 1.0 - p1, "X": p1 / 3, "Y": p1 / 3, "Z": p1 / 3}
            for l1, l3 in product("IXYZ", repeat=2):
                w = 0.5 * q[l1] * q[l3] + (0.5 if l1 == l3 == "I" else 0.0)
                if w == 0.0:
                    continue
                if l1 == l3 == "I":
                    outcomes.append((_ID4, 0, w))
                    continue
                fault = (PauliString.single(N_WIRES, FEEDBACK_WIRES[0], l1)
                         * PauliString.single(N_WIRES, FEEDBACK_WIRES[1], l3))
                r, f = _propagate(fault, position, ops)
                outcomes.append((r, f, w))
        else:
            (q1, _), sink = payload
            for (letter, flip), w in table.entries.items():
                if w == 0.0:
                    continue
                if letter == "I" and flip == 0:
                    outcomes.append((_ID4, 0, w))
                    continue
                p = (PauliString.single(N_WIRES, q1, letter) if letter != "I"
                     else PauliString.identity(N_WIRES))
                r, f = _propagate(
                    p, position, ops,
                    prep_flip=flip if sink == "prep" else 0,
                    check_flip=flip if sink == "check" else 0)
                outcomes.append((r, f, w))
        if len(outcomes) > 1 or outcomes[0][:2] != (_ID4, 0):
            dist = _convolve(dist, outcomes)
    return RoundErrorDistribution(stabilizer_type, dist).validate()


# ---------------------------------------------------------------------------
# Route (b): parity-weighted operator evolution oracle
# ---------------------------------------------------------------------------

def _transfer_basis() -> list[PauliString]:
    """Two-qubit Paulis in local-transfer index order x1, z1, x2, z2."""
    out = []
    for idx in range(16):
        out.append(PauliString(
            2,
            (idx & 1) | (((idx >> 2) & 1) << 1),
            ((idx >> 1) & 1) | (((idx >> 3) & 1) << 1)))
    return out


@lru_cache(maxsize=None)
def _cz_transfer(p_1q: float, p_swap: float, scheme: str = "reduced") -> np.ndarray:
    """Local 16x16 Pauli-transfer matrix of one twirled noisy compiled CZ.

    scheme "reduced" averages the physical two-branch {I, X2} twirl,
    "full" the sixteen-gate reference twirl, and "branch0"/"branch1" are
    the two un-averaged reduced branches (for the explicit enumeration
    cross-check).
    """
    attached = cz_attached_noise(NoiseModel(p_1q=p_1q, p_swap=p_swap, p_sh=0.0))
    gates = {
        "reduced": ["II", "IX"],
        "full": None,
        "branch0": ["II"],
        "branch1": ["IX"],
    }[scheme]
    if gates is None:
        gate_mats = [pauli_matrix(g) for g in all_paulis(2)]
    else:
        gate_mats = [pauli_matrix(PauliString.from_label(g)) for g in gates]
    basis = [pauli_matrix(p) for p in _transfer_basis()]
    t = np.zeros((16, 16))
    for i, pin in enumerate(basis):
        rotated = CZ_MAT @ pin @ CZ_MAT.conj().T
        out = np.zeros((4, 4), dtype=complex)
        for g in gate_mats:
            inner = g @ rotated @ g
            acc = sum(k @ inner @ k.conj().T for k in attached.kraus)
            out += g @ acc @ g
        out /= len(gate_mats)
        for j, pout in enumerate(basis):
            val = np.trace(pout @ out) / 4.0
            if abs(val.imag) > 1e-12:
                raise ValueError("transfer matrix of the twirled CZ is not real")
            t[j, i] = val.real
    return t


class _PauliAccum:
    """Operator as a sum of 10-wire Pauli strings, vectorized.

    Rows carry (probe id, x mask, z mask, complex coefficient) so every
    probe input evolves in a single pass.
    """

    __slots__ = ("pid", "x", "z", "c")

    def __init__(self, pid, x, z, c):
        self.pid = np.asarray(pid, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.int64)
        self.z = np.asarray(z, dtype=np.int64)
        self.c = np.asarray(c, dtype=complex)

    def copy(self) -> "_PauliAccum":
        return _PauliAccum(self.pid.copy(), self.x.copy(), self.z.copy(), self.c.copy())

    def merge(self, prune: float = 1e-18) -> None:
        key = (self.pid << (2 * N_WIRES)) | (self.x << N_WIRES) | self.z
        uniq, inv = np.unique(key, return_inverse=True)
        c = np.zeros(len(uniq), dtype=complex)
        np.add.at(c, inv, self.c)
        keep = np.abs(c) > prune
        uniq, c = uniq[keep], c[keep]
        self.pid = uniq >> (2 * N_WIRES)
        self.x = (uniq >> N_WIRES) & ((1 << N_WIRES) - 1)
        self.z = uniq & ((1 << N_WIRES) - 1)
        self.c = c

    def conjugate_gate(self, gate: str, wire: int) -> None:
        tx, tz, ts = _conjugation_table_1q(gate)
        xb = (self.x >> wire) & 1
        zb = (self.z >> wire) & 1
        idx = xb | (zb << 1)
        self.x = (self.x & ~(1 << wire)) | (tx[idx] << wire)
        self.z = (self.z & ~(1 << wire)) | (tz[idx] << wire)
        self.c = self.c * ts[idx]

    def scale_depolarizing(self, wire: int, p: float) -> None:
        if p == 0.0:
            return
        hit = ((self.x | self.z) >> wire) & 1
        self.c = self.c * np.where(hit == 1, 1.0 - 4.0 * p / 3.0, 1.0)

    def scale_dephasing(self, wire: int, p: float) -> None:
        if p == 0.0:
            return
        hit = (self.x >> wire) & 1
        self.c = self.c * np.where(hit == 1, 1.0 - 2.0 * p, 1.0)

    def apply_pair_transfer(self, w1: int, w2: int, t: np.ndarray) -> None:
        idx = (((self.x >> w1) & 1)
               | (((self.z >> w1) & 1) << 1)
               | (((self.x >> w2) & 1) << 2)
               | (((self.z >> w2) & 1) << 3))
        clear = ~((1 << w1) | (1 << w2))
        bx, bz = self.x & clear, self.z & clear
        pids, xs, zs, cs = [], [], [], []
        for j in range(16):
            col = t[j, idx]
            m = np.abs(col) > 1e-16
            if not m.any():
                continue
            pids.append(self.pid[m])
            xs.append(bx[m] | ((j & 1) << w1) | (((j >> 2) & 1) << w2))
            zs.append(bz[m] | (((j >> 1) & 1) << w1) | (((j >> 3) & 1) << w2))
            cs.append(self.c[m] * col[m])
        self.pid = np.concatenate(pids)
        self.x = np.concatenate(xs)
        self.z = np.concatenate(zs)
        self.c = np.concatenate(cs)
        self.merge()

    def measure_x_forget(self, wire: int) -> None:
        """Sum over both X outcomes (outcome forgotten)."""
        keep = ((self.z >> wire) & 1) == 0
        self.pid, self.x, self.z, self.c = self.pid[keep], self.x[keep], self.z[keep], self.c[keep]

    def measure_x_weighted(self, wire: int) -> None:
        """Outcome-sign-weighted sum: multiplies the surviving terms by X."""
        keep = ((self.z >> wire) & 1) == 0
        self.pid, self.z, self.c = self.pid[keep], self.z[keep], self.c[keep]
        self.x = self.x[keep] ^ (1 << wire)

    def conjugate_by_pauli(self, f: PauliString) -> None:
        sign = (np.bitwise_count(self.x & f.z) + np.bitwise_count(self.z & f.x)) & 1
        self.c = self.c * np.where(sign == 1, -1.0, 1.0)

    def drop_lettered(self, wires: tuple[int, ...]) -> None:
        mask = sum(1 << w for w in wires)
        keep = ((self.x | self.z) & mask) == 0
        self.pid, self.x, self.z, self.c = self.pid[keep], self.x[keep], self.z[keep], self.c[keep]

    def coefficients(self, pid: int) -> dict[tuple[int, int], complex]:
        sel = self.pid == pid
        return {(int(x), int(z)): complex(c)
                for x, z, c in zip(self.x[sel], self.z[sel], self.c[sel])}


@lru_cache(maxsize=None)
def _conjugation_table_1q(gate: str):
    tx = np.zeros(4, dtype=np.int64)
    tz = np.zeros(4, dtype=np.int64)
    ts = np.zeros(4, dtype=float)
    for idx in range(4):
        p = PauliString(1, idx & 1, idx >> 1)
        q, sign = conjugate_pauli_signed(gate, (0,), p)
        tx[idx], tz[idx], ts[idx] = q.x, q.z, sign
    return tx, tz, ts


def _initial_accum(probes: list[PauliString]) -> _PauliAccum:
    """Probe on the data wires tensored with the three singlet operators."""
    pids, xs, zs, cs = [], [], [], []
    for pid, probe in enumerate(probes):
        base = probe.embedded(N_WIRES, DATA_WIRES)
        for letters in product("IXYZ", repeat=len(SINGLET_PAIRS)):
            p = base
            weight = 1.0
            for (a, b), letter in zip(SINGLET_PAIRS, letters):
                if letter != "I":
                    p = p * PauliString.single(N_WIRES, a, letter)
                    p = p * PauliString.single(N_WIRES, b, letter)
                    weight = -weight
            pids.append(pid)
            xs.append(p.x)
            zs.append(p.z)
            cs.append(weight / 64.0)
    return _PauliAccum(pids, xs, zs, cs)


def _linear_combination(parts) -> _PauliAccum:
    pid = np.concatenate([a.pid for a, _ in parts])
    x = np.concatenate([a.x for a, _ in parts])
    z = np.concatenate([a.z for a, _ in parts])
    c = np.concatenate([a.c * w for a, w in parts])
    out = _PauliAccum(pid, x, z, c)
    out.merge()
    return out


def _oracle_final_accums(stabilizer_type: str, noise: NoiseModel, probes,
                         twirl_bits=None, cz_noise=None, twirl_scheme="reduced"):
    """Evolve all probes; return (unweighted, parity-weighted) final operators.

    twirl_bits fixes the {I, X2} branch of each of the six CZs instead of
    averaging (testing hook); cz_noise optionally overrides the NoiseModel
    per CZ, ordered prep A, prep C, check A..D.
    """
    stabilizer_pauli(stabilizer_type)
    cz_models = list(cz_noise) if cz_noise is not None else [noise] * 6
    if len(cz_models) != 6:
        raise ValueError("cz_noise must list one NoiseModel per CZ (6 total)")
    schemes = ([twirl_scheme] * 6 if twirl_bits is None
               else [f"branch{int(b)}" for b in twirl_bits])
    transfers = [_cz_transfer(m.p_1q, m.p_swap, s) for m, s in zip(cz_models, schemes)]

    op = _initial_accum(probes)
    for w in ANC1_WIRES + ANC2_WIRES:
        op.scale_depolarizing(w, noise.p_1q)
    for w in SHUTTLED_WIRES:
        op.scale_dephasing(w, noise.p_sh)
    for w in PREP_Y_WIRES:
        op.conjugate_gate("Y", w)
        op.scale_depolarizing(w, noise.p_1q)
    for (q1, q2), t in zip(PREP_CZS, transfers[:2]):
        op.apply_pair_transfer(q1, q2, t)
    for w in ANC2_WIRES:
        op.scale_depolarizing(w, noise.p_1q)

    # GHZ parity measurement and conditional feedback.  With parity-p
    # projection M_p = (M_even_weight + (-1)^p M_odd_weight)/2, the
    # feedback channel is  M_0 + Dep(X1X3 M_1 X1X3):  the feedback gates
    # (and their own depolarizing) act only on the odd branch.
    unweighted = op.copy()
    for w in ANC2_WIRES:
        unweighted.measure_x_forget(w)
    weighted = op
    for w in ANC2_WIRES:
        weighted.measure_x_weighted(w)
    even = _linear_combination([(unweighted, 0.5), (weighted, 0.5)])
    odd = _linear_combination([(unweighted, 0.5), (weighted, -0.5)])
    odd.conjugate_by_pauli(_FEEDBACK_PAULI)
    for w in FEEDBACK_WIRES:
        odd.scale_depolarizing(w, noise.p_1q)
    op = _linear_combination([(even, 1.0), (odd, 1.0)])
    op.drop_lettered(ANC2_WIRES)  # nothing touches these wires again

    if stabilizer_type == "X":
        for w in DATA_WIRES:
            op.conjugate_gate("H", w)
            op.scale_depolarizing(w, noise.p_1q)
    for (q1, q2), t in zip(CHECK_CZS, transfers[2:]):
        op.apply_pair_transfer(q1, q2, t)
    if stabilizer_type == "X":
        for w in DATA_WIRES:
            op.conjugate_gate("H", w)
            op.scale_depolarizing(w, noise.p_1q)
    for w in ANC1_WIRES:
        op.scale_depolarizing(w, noise.p_1q)

    o0 = op.copy()
    for w in ANC1_WIRES:
        o0.measure_x_forget(w)
    o1 = op
    for w in ANC1_WIRES:
        o1.measure_x_weighted(w)
    for o in (o0, o1):
        o.drop_lettered(ANC1_WIRES + ANC2_WIRES)
        o.merge()
    return o0, o1


def _oracle_characters(stabilizer_type: str, noise: NoiseModel,
                       twirl_bits=None, cz_noise=None, twirl_scheme="reduced"):
    """lambda(Q, u) for all stabilizer-commuting probes Q, u in {0, 1}.

    lambda(Q, 0) scales the unweighted output back onto Q; lambda(Q, 1)
    scales the parity-weighted output onto S*Q.  Also returns the largest
    off-target coefficient: for a proper stabilizer-measurement instrument
    it vanishes identically.
    """
    s = stabilizer_pauli(stabilizer_type)
    probes = [q for q in all_paulis(4) if q.commutes(s)]
    o0, o1 = _oracle_final_accums(stabilizer_type, noise, probes, twirl_bits,
                                  cz_noise, twirl_scheme)
    lam = {}
    leak = 0.0
    for pid, q in enumerate(probes):
        target0 = q.embedded(N_WIRES, DATA_WIRES)
        sq, phase_k = mul_with_phase(s, q)
        target1 = sq.embedded(N_WIRES, DATA_WIRES)
        c0 = o0.coefficients(pid)
        c1 = o1.coefficients(pid)
        l0 = 64.0 * c0.pop((target0.x, target0.z), 0.0)
        l1 = 64.0 * c1.pop((target1.x, target1.z), 0.0) * (-1j) ** phase_k
        for leftovers in (c0, c1):
            if leftovers:
                leak = max(leak, 64.0 * max(abs(v) for v in leftovers.values()))
        if abs(l0.imag) > 1e-10 or abs(l1.imag) > 1e-10:
            raise ValueError("complex character in round-instrument decomposition")
        lam[q] = (l0.real, l1.real)
    return lam, leak


def _invert_characters(stabilizer_type: str, lam) -> dict[tuple[PauliString, int], float]:
    s = stabilizer_pauli(stabilizer_type)
    entries: dict[tuple[PauliString, int], float] = {}
    for e in all_paulis(4):
        if _coset_representative(e, s) != e:
            continue
        es = 0 if e.commutes(s) else 1
        for f in (0, 1):
            acc = 0.0
            for q, (l0, l1) in lam.items():
                a = 0 if e.commutes(q) else 1
                acc += -l0 if a else l0
                acc += -l1 if (a + f + es) & 1 else l1
            w = acc / 256.0
            if abs(w) > 1e-14:
                entries[(e, f)] = w
    return entries


def oracle_round_distribution(stabilizer_type: str, noise: NoiseModel,
                              cz_noise=None, twirl_scheme: str = "reduced") -> RoundErrorDistribution:
    """Exact round distribution from full operator evolution of the circuit.

    Independent of the fault-propagation route: the complete local transfer
    matrix of every twirled noisy CZ is kept (off-diagonal structure and
    all), the two GHZ-parity branches are evolved explicitly, and the
    distribution is recovered by character inversion over all
    stabilizer-commuting probe operators.  ``cz_noise`` optionally
    overrides the noise of individual CZs for fault-injection studies;
    ``twirl_scheme`` "full" swaps the physical two-branch twirl for the
    sixteen-gate reference twirl (they must agree).
    """
    lam, leak = _oracle_characters(stabilizer_type, noise, cz_noise=cz_noise,
                                   twirl_scheme=twirl_scheme)
    if leak > 1e-8:
        raise ValueError(
            f"round instrument deviates from stabilizer-measurement form (leak {leak:.2e})")
    entries = _invert_characters(stabilizer_type, lam)
    return RoundErrorDistribution(stabilizer_type, entries).validate()


# ---------------------------------------------------------------------------
# State-vector protocol: GHZ preparation and sampled rounds
# ---------------------------------------------------------------------------

def _slice_wires(st: StateVector, fixed: dict[int, int], keep: tuple[int, ...]) -> StateVector:
    """Project out collapsed (computational) wires, keeping `keep` ascending."""
    t = st.psi.reshape((2,) * st.n)
    sl: list = [slice(None)] * st.n
    for w, bit in fixed.items():
        sl[st.n - 1 - w] = bit
    sub = np.asarray(t[tuple(sl)]).reshape(-1)
    norm = np.linalg.norm(sub)
    if norm < 1e-12:
        raise ValueError("sliced branch has no amplitude")
    return StateVector(len(keep), sub / norm)


def prepare_ghz(outcome_draws: tuple[float, float], feedback: bool = True):
    """Noiseless GHZ preparation on the four ancilla-1 qubits.

    outcome_draws are two uniform [0,1) numbers deciding the X-measurement
    branches of the two ancilla-2 wires.  Returns (state on the ancilla-1
    qubits in node order A..D, parity bit).  With feedback (the default),
    every branch ends in (|0000> + |1111>)/sqrt(2); without it the odd
    branches show the pre-correction |0011> + |1100> form.
    """
    st = StateVector(6)  # wires: A1(A), A1(B), A1(C), A1(D), A2(A), A2(C)
    for a, b in ((0, 1), (2, 3), (4, 5)):
        singlet(6, a, b, state=st)
    for w in (0, 2, 4):
        st.apply(rotation("y", np.pi), (w,))
    st.apply(CZ_MAT, (0, 4))
    st.apply(CZ_MAT, (2, 5))
    bits = []
    for w, draw in zip((4, 5), outcome_draws):
        st.apply(H, (w,))  # X measurement as H + computational readout
        branches = st.measurement_branches(w, basis="Z")
        bit = 0 if draw < branches[0][1] else 1
        st = branches[bit][2]
        bits.append(bit)
    parity = bits[0] ^ bits[1]
    if feedback and parity:
        st.apply(X, (0,))
        st.apply(X, (1,))
    return _slice_wires(st, {4: bits[0], 5: bits[1]}, (0, 1, 2, 3)), parity


def _load_register(data_state: StateVector) -> StateVector:
    if data_state.n != 4:
        raise ValueError("data state must cover exactly the four data qubits")
    st = StateVector(N_WIRES)
    st.psi[:] = 0.0
    idx = np.arange(16)
    targets = sum(((idx >> k) & 1) << DATA_WIRES[k] for k in range(4))
    st.psi[targets] = data_state.psi
    for a, b in SINGLET_PAIRS:
        singlet(N_WIRES, a, b, state=st)
    return st


def _sample_depolarizing(st: StateVector, wire: int, p: float, rng) -> None:
    if p > 0.0 and rng.random() < p:
        st.apply((X, Y, Z)[rng.integers(3)], (wire,))


def _trajectory_cz(st: StateVector, q1: int, q2: int, noise: NoiseModel, rng) -> None:
    """One compiled, twirled CZ with sampled faults."""
    branch = int(rng.integers(2))
    if branch:  # pre-gate twirl in its permuted Z1 X2 form
        st.apply(Z, (q1,))
        st.apply(X, (q2,))
    st.apply(rotation("z", np.pi / 2), (q1,))
    _sample_depolarizing(st, q1, noise.p_1q, rng)
    st.apply(rotation("z", -np.pi / 2), (q2,))
    _sample_depolarizing(st, q2, noise.p_1q, rng)
    st.apply(SQRT_SWAP, (q1, q2))
    if noise.p_swap > 0.0 and rng.random() < noise.p_swap:
        st.apply(SWAP, (q1, q2))
    st.apply(rotation("z", np.pi), (q1,))
    _sample_depolarizing(st, q1, noise.p_1q, rng)
    st.apply(SQRT_SWAP, (q1, q2))
    if noise.p_swap > 0.0 and rng.random() < noise.p_swap:
        st.apply(SWAP, (q1, q2))
    if branch:
        st.apply(X, (q2,))


def run_check_round(data_state: StateVector, stabilizer_type: str,
                    noise: NoiseModel, rng) -> tuple[int, StateVector]:
    """Sample one full check round on concrete data (trajectory simulation).

    Returns (syndrome bit, post-measurement data state); syndrome bit 0
    means the +1 eigenvalue was recorded.  At zero noise this is the ideal
    projective measurement of the four-qubit stabilizer.
    """
    stabilizer_pauli(stabilizer_type)
    st = _load_register(data_state)
    for w in ANC1_WIRES + ANC2_WIRES:
        _sample_depolarizing(st, w, noise.p_1q, rng)
    for w in SHUTTLED_WIRES:
        if noise.p_sh > 0.0 and rng.random() < noise.p_sh:
            st.apply(Z, (w,))
    for w in PREP_Y_WIRES:
        st.apply(rotation("y", np.pi), (w,))
        _sample_depolarizing(st, w, noise.p_1q, rng)
    for q1, q2 in PREP_CZS:
        _trajectory_cz(st, q1, q2, noise, rng)
    outcome = {}
    for w in ANC2_WIRES:
        _sample_depolarizing(st, w, noise.p_1q, rng)
        st.apply(H, (w,))
        outcome[w] = st.measure(w, rng, basis="Z")
    if outcome[A_ANC2] ^ outcome[C_ANC2]:
        for w in FEEDBACK_WIRES:
            st.apply(X, (w,))
            _sample_depolarizing(st, w, noise.p_1q, rng)
    if stabilizer_type == "X":
        for w in DATA_WIRES:
            st.apply(H, (w,))
            _sample_depolarizing(st, w, noise.p_1q, rng)
    for q1, q2 in CHECK_CZS:
        _trajectory_cz(st, q1, q2, noise, rng)
    if stabilizer_type == "X":
        for w in DATA_WIRES:
            st.apply(H, (w,))
            _sample_depolarizing(st, w, noise.p_1q, rng)
    syndrome = 0
    for w in ANC1_WIRES:
        _sample_depolarizing(st, w, noise.p_1q, rng)
        st.apply(H, (w,))
        outcome[w] = st.measure(w, rng, basis="Z")
        syndrome ^= outcome[w]
    post = _slice_wires(st, {w: outcome[w] for w in ANC1_WIRES + ANC2_WIRES}, DATA_WIRES)
    return syndrome, post
