"""Pauli-frame Monte Carlo of repeated check rounds on the planar lattice.

Each scheduled plaquette consumes one uniform draw per round and samples a
``(data residue, syndrome flip)`` pair from its round error distribution.
The plaquette first reports the syndrome implied by the current frame XOR
the flip, then its residue is folded into the frame, so residues laid down
in earlier subcycles of the same round are visible to later subcycles.
After the noisy rounds one noiseless round is appended.

Boundary plaquettes (weight 3) reuse the four-node distribution with the
residue on the absent role marginalized away; the reduced protocol for
small checks is not separately modelled (see README).

Determinism: a shot's uniform block is laid out as ``U[round, plaquette]``
in global plaquette order and is generated from a counter-based stream
keyed by ``(seed, shot index)``, so results do not depend on batching or
worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .check_round import RoundErrorDistribution
from .lattice import CodeLattice, PauliFrame
from .rng import shot_uniforms


@dataclass
class SyndromeRecord:
    """Per-shot outcomes, one row per round (last row noiseless)."""

    outcomes: np.ndarray  # uint8[rounds + 1, n_plaquettes]
    rounds: int           # number of noisy rounds


class _Kind:
    """Compiled categorical table for one (check type, role set) variant."""

    __slots__ = ("ptype", "roles", "cdf", "x_bits", "z_bits", "flip",
                 "weights", "flip_mass", "marg_x", "marg_z")

    def __init__(self, ptype: str, roles: tuple[int, ...], dist: RoundErrorDistribution):
        self.ptype = ptype
        self.roles = roles
        merged: dict[tuple[int, int, int], float] = {}
        for (pauli, f), w in dist.canonicalized().entries.items():
            sub = pauli.restricted(roles)
            key = (sub.x, sub.z, f)
            merged[key] = merged.get(key, 0.0) + max(w, 0.0)
        keys = sorted(merged)
        weights = np.array([merged[k] for k in keys], dtype=np.float64)
        weights /= weights.sum()
        self.weights = weights
        self.cdf = np.cumsum(weights)
        self.x_bits = np.array([k[0] for k in keys], dtype=np.uint8)
        self.z_bits = np.array([k[1] for k in keys], dtype=np.uint8)
        self.flip = np.array([k[2] for k in keys], dtype=np.uint8)
        self.flip_mass = float(weights[self.flip == 1].sum())
        # per-slot probability of an anticommuting component (decoder weights)
        self.marg_x = [float(weights[(self.x_bits >> s) & 1 == 1].sum())
                       for s in range(len(roles))]
        self.marg_z = [float(weights[(self.z_bits >> s) & 1 == 1].sum())
                       for s in range(len(roles))]


class CompiledSampler:
    """Lattice + distribution pair compiled into vectorized sampling arrays."""

    def __init__(self, lattice: CodeLattice, dist_z: RoundErrorDistribution,
                 dist_x: RoundErrorDistribution):
        if dist_z.stabilizer_type != "Z" or dist_x.stabilizer_type != "X":
            raise ValueError("distributions must be given as (Z-type, X-type)")
        dist_z.validate()
        dist_x.validate()
        self.lattice = lattice
        P = lattice.n_plaquettes
        self.kinds: list[_Kind] = []
        kind_ids: dict[tuple[str, tuple[int, ...]], int] = {}
        self.table_of = np.zeros(P, dtype=np.int32)
        for p in lattice.plaquettes:
            key = (p.ptype, p.roles)
            if key not in kind_ids:
                dist = dist_z if p.ptype == "Z" else dist_x
                kind_ids[key] = len(self.kinds)
                self.kinds.append(_Kind(p.ptype, p.roles, dist))
            self.table_of[p.index] = kind_ids[key]

        # per-subcycle gather/scatter arrays; data index n_data is a dummy
        # column absorbing padded slots so scatter never collides with a
        # real qubit
        self._groups = []
        for group in lattice.subcycle_groups:
            g = len(group)
            plq = np.array(group, dtype=np.int64)
            nbr = np.full((g, 4), lattice.n_data, dtype=np.int64)
            mask = np.zeros((g, 4), dtype=np.uint8)
            for i, pidx in enumerate(group):
                data = lattice.plaquettes[pidx].data
                nbr[i, :len(data)] = data
                mask[i, :len(data)] = 1
            ptype = lattice.plaquettes[group[0]].ptype
            self._groups.append((plq, nbr, mask, ptype))

    def sample(self, rounds: int, uniforms: np.ndarray):
        """Run the schedule on a batch of per-shot uniform blocks.

        ``uniforms`` has shape (shots, rounds, n_plaquettes).  Returns
        (records, frame_x, frame_z) with shapes (shots, rounds + 1, P),
        (shots, n_data), (shots, n_data).
        """
        lat = self.lattice
        B = uniforms.shape[0]
        if uniforms.shape[1:] != (rounds, lat.n_plaquettes):
            raise ValueError("uniform block shape does not match (rounds, plaquettes)")
        choice = np.empty(uniforms.shape, dtype=np.int32)
        for kid, kind in enumerate(self.kinds):
            cols = np.flatnonzero(self.table_of == kid)
            idx = np.searchsorted(kind.cdf, uniforms[:, :, cols], side="right")
            choice[:, :, cols] = np.minimum(idx, len(kind.cdf) - 1)

        records = np.zeros((B, rounds + 1, lat.n_plaquettes), dtype=np.uint8)
        fx = np.zeros((B, lat.n_data + 1), dtype=np.uint8)
        fz = np.zeros((B, lat.n_data + 1), dtype=np.uint8)
        for t in range(rounds):
            for plq, nbr, mask, ptype in self._groups:
                sense = fx if ptype == "Z" else fz
                syn = (sense[:, nbr] & mask).sum(axis=2).astype(np.uint8) & 1
                ks = choice[:, t, plq]
                kid0 = self.table_of[plq[0]]
                same_kind = np.all(self.table_of[plq] == kid0)
                if same_kind:
                    kind = self.kinds[kid0]
                    flip, xb, zb = kind.flip[ks], kind.x_bits[ks], kind.z_bits[ks]
                else:  # mixed bulk/boundary inside one subcycle
                    flip = np.empty_like(syn)
                    xb = np.empty_like(syn)
                    zb = np.empty_like(syn)
                    for kid in np.unique(self.table_of[plq]):
                        sel = self.table_of[plq] == kid
                        kind = self.kinds[kid]
                        flip[:, sel] = kind.flip[ks[:, sel]]
                        xb[:, sel] = kind.x_bits[ks[:, sel]]
                        zb[:, sel] = kind.z_bits[ks[:, sel]]
                records[:, t, plq] = syn ^ flip
                for s in range(4):
                    fx[:, nbr[:, s]] ^= (xb >> s) & 1
                    fz[:, nbr[:, s]] ^= (zb >> s) & 1
        for plq, nbr, mask, ptype in self._groups:  # appended noiseless round
            sense = fx if ptype == "Z" else fz
            records[:, rounds, plq] = (sense[:, nbr] & mask).sum(axis=2).astype(np.uint8) & 1
        return records, fx[:, :-1], fz[:, :-1]


def sample_shot(lattice: CodeLattice, dist_z: RoundErrorDistribution,
                dist_x: RoundErrorDistribution, rounds: int,
                rng: np.random.Generator) -> tuple[SyndromeRecord, PauliFrame]:
    """One shot of d-round syndrome extraction plus the final frame."""
    sampler = CompiledSampler(lattice, dist_z, dist_x)
    uniforms = rng.random((1, rounds, lattice.n_plaquettes))
    records, fx, fz = sampler.sample(rounds, uniforms)
    return SyndromeRecord(records[0], rounds), PauliFrame(fx[0], fz[0])


def sample_batch(lattice: CodeLattice, dist_z: RoundErrorDistribution,
                 dist_x: RoundErrorDistribution, rounds: int, seed: int,
                 shots: range, sampler: CompiledSampler | None = None):
    """Batch of shots with per-shot streams keyed by (seed, shot index)."""
    if sampler is None:
        sampler = CompiledSampler(lattice, dist_z, dist_x)
    P = lattice.n_plaquettes
    uniforms = shot_uniforms(seed, shots, rounds * P).reshape(len(shots), rounds, P)
    return sampler.sample(rounds, uniforms)
