"""Planar code layout on the node network.

Data qubits and plaquette checks live on a (2d-1) x (2d-1) grid: data sites
where the coordinate sum is even, Z checks at (odd row, even column), X checks
at (even row, odd column).  That yields d^2 + (d-1)^2 data qubits, weight-4
checks in the bulk and weight-3 checks on the boundary, one logical qubit.

Each check names its data neighbours in the fixed geometric order north,
west, east, south; a neighbour's position in that order is its *role*, the
slot it occupies in the four-node check protocol.  Boundary checks simply
omit the missing role.  Checks of one type that share a data qubit are
scheduled in different subcycles: subcycles 1-2 cover the Z checks
(checkerboard split), 3-4 the X checks, so within a subcycle no data qubit
is touched twice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .paulis import PauliString, bit_parity

# geometric neighbour order of a plaquette: the role index of each offset
NEIGHBOR_OFFSETS = ((-1, 0), (0, -1), (0, 1), (1, 0))  # N, W, E, S


@dataclass(frozen=True)
class Plaquette:
    """One stabilizer check: type, grid position, data neighbours, schedule."""

    index: int
    ptype: str                 # "X" or "Z"
    position: tuple[int, int]  # (row, col) on the grid
    data: tuple[int, ...]      # data-qubit indices, geometric order
    roles: tuple[int, ...]     # protocol slot (0..3) of each entry in data
    subcycle: int              # 1..4

    @property
    def weight(self) -> int:
        return len(self.data)


class CodeLattice:
    """Distance-d planar layout with schedule and logical operators."""

    def __init__(self, distance: int):
        if distance % 2 == 0 or not 3 <= distance <= 15:
            raise ValueError(f"distance must be odd and in [3, 15], got {distance}")
        self.distance = distance
        g = self.grid_size = 2 * distance - 1

        positions = [(r, c) for r in range(g) for c in range(g) if (r + c) % 2 == 0]
        self.data_positions: tuple[tuple[int, int], ...] = tuple(positions)
        self.data_index: dict[tuple[int, int], int] = {p: i for i, p in enumerate(positions)}
        self.n_data = len(positions)

        plaquettes: list[Plaquette] = []
        for ptype in ("Z", "X"):
            for r in range(g):
                for c in range(g):
                    if ptype == "Z" and not (r % 2 == 1 and c % 2 == 0):
                        continue
                    if ptype == "X" and not (r % 2 == 0 and c % 2 == 1):
                        continue
                    data, roles = [], []
                    for role, (dr, dc) in enumerate(NEIGHBOR_OFFSETS):
                        pos = (r + dr, c + dc)
                        if pos in self.data_index:
                            data.append(self.data_index[pos])
                            roles.append(role)
                    if ptype == "Z":
                        subcycle = 1 + ((r - 1) // 2 + c // 2) % 2
                    else:
                        subcycle = 3 + (r // 2 + (c - 1) // 2) % 2
                    plaquettes.append(Plaquette(len(plaquettes), ptype, (r, c),
                                                tuple(data), tuple(roles), subcycle))
        self.plaquettes: tuple[Plaquette, ...] = tuple(plaquettes)
        self.n_plaquettes = len(plaquettes)

        # logical Z: Z along the top data row; logical X: X down the left column
        zx = zz = xx = xz = 0
        for c in range(0, g, 2):
            zz |= 1 << self.data_index[(0, c)]
        for r in range(0, g, 2):
            xx |= 1 << self.data_index[(r, 0)]
        self.logical_z = PauliString(self.n_data, zx, zz)
        self.logical_x = PauliString(self.n_data, xx, xz)

        self.subcycle_groups: tuple[tuple[int, ...], ...] = tuple(
            tuple(p.index for p in plaquettes if p.subcycle == s) for s in (1, 2, 3, 4))
        self._validate()

    def _validate(self) -> None:
        for group in self.subcycle_groups:
            touched: set[int] = set()
            for pidx in group:
                for q in self.plaquettes[pidx].data:
                    if q in touched:
                        raise AssertionError("schedule touches a data qubit twice in one subcycle")
                    touched.add(q)
        for logical in (self.logical_z, self.logical_x):
            for p in self.plaquettes:
                if not logical.commutes(self.plaquette_operator(p.index)):
                    raise AssertionError("logical operator fails to commute with a check")
        if self.logical_z.commutes(self.logical_x):
            raise AssertionError("logical operators must anticommute")

    def of_type(self, ptype: str) -> tuple[Plaquette, ...]:
        return tuple(p for p in self.plaquettes if p.ptype == ptype)

    def plaquette_operator(self, index: int) -> PauliString:
        p = self.plaquettes[index]
        x = z = 0
        for q in p.data:
            if p.ptype == "X":
                x |= 1 << q
            else:
                z |= 1 << q
        return PauliString(self.n_data, x, z)

    def to_json(self) -> str:
        return json.dumps({
            "distance": self.distance,
            "grid_size": self.grid_size,
            "data_positions": [list(p) for p in self.data_positions],
            "plaquettes": [
                {"index": p.index, "type": p.ptype, "position": list(p.position),
                 "data": list(p.data), "roles": list(p.roles), "subcycle": p.subcycle}
                for p in self.plaquettes
            ],
            "logical_z": self.logical_z.to_label(),
            "logical_x": self.logical_x.to_label(),
        }, sort_keys=True)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"CodeLattice(distance={self.distance})"


@lru_cache(maxsize=None)
def build_lattice(distance: int) -> CodeLattice:
    """Construct (and memoize) the distance-d layout."""
    return CodeLattice(distance)


@dataclass
class PauliFrame:
    """Accumulated Pauli record over the data qubits; composes by XOR."""

    x_mask: np.ndarray  # uint8[n_data], bit per qubit with an X component
    z_mask: np.ndarray  # uint8[n_data], bit per qubit with a Z component

    @classmethod
    def empty(cls, n_data: int) -> "PauliFrame":
        return cls(np.zeros(n_data, dtype=np.uint8), np.zeros(n_data, dtype=np.uint8))

    def __xor__(self, other: "PauliFrame") -> "PauliFrame":
        return PauliFrame(self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask)

    def is_empty(self) -> bool:
        return not (self.x_mask.any() or self.z_mask.any())

    def to_pauli(self) -> PauliString:
        x = int.from_bytes(np.packbits(self.x_mask, bitorder="little").tobytes(), "little")
        z = int.from_bytes(np.packbits(self.z_mask, bitorder="little").tobytes(), "little")
        return PauliString(len(self.x_mask), x, z)


def check_syndrome(lattice: CodeLattice, frame: PauliFrame) -> np.ndarray:
    """Syndrome bit of every plaquette for a given frame (no flips)."""
    out = np.zeros(lattice.n_plaquettes, dtype=np.uint8)
    for p in lattice.plaquettes:
        mask = frame.x_mask if p.ptype == "Z" else frame.z_mask
        out[p.index] = int(mask[list(p.data)].sum()) & 1
    return out


def logical_failure(lattice: CodeLattice, frame: PauliFrame) -> tuple[int, int]:
    """(Z-logical, X-logical) failure bits of a corrected frame.

    The frame must be back in the codespace; a nonzero residual syndrome
    means the correction step is broken and raises.
    """
    syndrome = check_syndrome(lattice, frame)
    if syndrome.any():
        bad = int(np.flatnonzero(syndrome)[0])
        raise ValueError(f"corrected frame anticommutes with check {bad}; decoder bug")
    frame_pauli = frame.to_pauli()
    fail_z = 0 if frame_pauli.commutes(lattice.logical_z) else 1
    fail_x = 0 if frame_pauli.commutes(lattice.logical_x) else 1
    return fail_z, fail_x
