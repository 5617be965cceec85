"""Logical error rate estimation and threshold location.

A point estimate runs ``shots`` independent Monte Carlo shots of ``d`` noisy
rounds plus one noiseless round on the distance-``d`` lattice, decodes both
check types, and counts a failure when either logical operator is flipped
(failures of either operator count; rates for a single-operator convention
are roughly half as large).  Shots are keyed by ``(seed, shot index)`` so
results are independent of batching and worker count.

Threshold fits follow the crossing method: for each pair of consecutive
distances, find where the rate-vs-parameter curves intersect on a log-rate
linear interpolation, then average the pairwise crossings.  Fitted values
are decoder-dependent; the default union-find backend trades a few percent
of threshold for orders-of-magnitude faster decoding (see README).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import NoiseModel
from .check_round import RoundErrorDistribution
from .decoder import (
    DetectionGraph,
    SpaceTimeGraph,
    fast_mwpm_decode,
    mwpm_decode,
    unionfind_decode,
)
from .lattice import build_lattice
from .rng import shot_uniforms
from .sampler import CompiledSampler


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


@dataclass
class RatePoint:
    """One (distance, parameter value) logical error rate estimate."""

    d: int
    parameter: float
    rate: float
    ci_low: float
    ci_high: float
    shots: int
    seed: int


class _Experiment:
    """Compiled state for one (distance, noise) Monte Carlo point."""

    def __init__(self, d: int, dist_z: RoundErrorDistribution,
                 dist_x: RoundErrorDistribution, rounds: int,
                 graph_model: str = "correlated"):
        self.lattice = lat = build_lattice(d)
        self.rounds = rounds
        self.sampler = CompiledSampler(lat, dist_z, dist_x)
        self.graph_z = SpaceTimeGraph(lat, "Z", rounds, dist_z, dist_x, graph_model)
        self.graph_x = SpaceTimeGraph(lat, "X", rounds, dist_z, dist_x, graph_model)
        # incidence matrices for vectorized codespace checks: row per
        # plaquette, column per data qubit
        inc_z = np.zeros((len(lat.of_type("Z")), lat.n_data), dtype=np.uint8)
        inc_x = np.zeros((len(lat.of_type("X")), lat.n_data), dtype=np.uint8)
        for i, p in enumerate(lat.of_type("Z")):
            inc_z[i, list(p.data)] = 1
        for i, p in enumerate(lat.of_type("X")):
            inc_x[i, list(p.data)] = 1
        self.inc_z, self.inc_x = inc_z, inc_x
        self.supp_lz = np.array(lat.logical_z.support(), dtype=np.int64)
        self.supp_lx = np.array(lat.logical_x.support(), dtype=np.int64)

    def run_batch(self, seed: int, shots: range, decoder: str) -> int:
        """Number of failing shots in one deterministic batch."""
        lat = self.lattice
        uniforms = shot_uniforms(seed, shots, self.rounds * lat.n_plaquettes)
        uniforms = uniforms.reshape(len(shots), self.rounds, lat.n_plaquettes)
        records, fx, fz = self.sampler.sample(self.rounds, uniforms)
        corr_x = np.zeros_like(fx)  # from Z-type defects
        corr_z = np.zeros_like(fz)  # from X-type defects
        for i in range(len(shots)):
            dg_z = DetectionGraph(self.graph_z, self.graph_z.defect_nodes(records[i]))
            dg_x = DetectionGraph(self.graph_x, self.graph_x.defect_nodes(records[i]))
            if decoder == "unionfind":
                corr_x[i] = unionfind_decode(dg_z)
                corr_z[i] = unionfind_decode(dg_x)
            elif decoder == "mwpm":
                corr_x[i] = fast_mwpm_decode(dg_z).correction
                corr_z[i] = fast_mwpm_decode(dg_x).correction
            elif decoder == "mwpm-reference":
                corr_x[i] = mwpm_decode(dg_z).correction
                corr_z[i] = mwpm_decode(dg_x).correction
            else:
                raise ValueError(f"unknown decoder {decoder!r}")
        res_x = fx ^ corr_x
        res_z = fz ^ corr_z
        if ((res_x @ self.inc_z.T) % 2).any() or ((res_z @ self.inc_x.T) % 2).any():
            raise RuntimeError("a correction left the codespace; decoder bug")
        fail_z = res_x[:, self.supp_lz].sum(axis=1) % 2
        fail_x = res_z[:, self.supp_lx].sum(axis=1) % 2
        return int(np.count_nonzero(fail_z | fail_x))


def estimate_logical_rate(d: int, noise: NoiseModel, shots: int, seed: int,
                          rounds: int | None = None, decoder: str = "unionfind",
                          batch: int = 2048, threads: int = 1,
                          parameter: float | None = None,
                          graph_model: str = "correlated") -> RatePoint:
    """Monte Carlo logical error rate with a Wilson 95% interval."""
    from .cache import cached_round_distribution, load_failures, store_failures

    rounds = d if rounds is None else rounds
    failures = load_failures(d, noise, rounds, shots, seed, decoder, graph_model)
    if failures is None:
        dist_z = cached_round_distribution("Z", noise)
        dist_x = cached_round_distribution("X", noise)
        exp = _Experiment(d, dist_z, dist_x, rounds, graph_model)
        batches = [range(lo, min(lo + batch, shots)) for lo in range(0, shots, batch)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                counts = list(pool.map(lambda b: exp.run_batch(seed, b, decoder),
                                       batches))
        else:
            counts = [exp.run_batch(seed, b, decoder) for b in batches]
        failures = sum(counts)  # integer sum: aggregation order cannot matter
        store_failures(d, noise, rounds, shots, seed, decoder, graph_model, failures)
    lo, hi = wilson_interval(failures, shots)
    value = parameter if parameter is not None else noise.p_swap
    return RatePoint(d, value, failures / shots, lo, hi, shots, seed)


def noise_for_sweep(parameter: str, value: float, ratio_1q_swap: float = 0.0,
                    p_swap: float = 0.0, p_1q: float = 0.0,
                    p_sh: float = 0.0) -> NoiseModel:
    """Map a swept parameter value onto a full noise model.

    For a ``p_swap`` sweep, ``p_1q`` follows the fixed ratio and ``p_sh``
    stays at its fixed value.  For a ``p_sh`` sweep, ``p_swap`` and the
    ratio-derived ``p_1q`` (or an explicit ``p_1q``) stay fixed.
    """
    if parameter == "p_swap":
        return NoiseModel(p_1q=ratio_1q_swap * value, p_swap=value, p_sh=p_sh)
    if parameter == "p_sh":
        one_q = ratio_1q_swap * p_swap if ratio_1q_swap else p_1q
        return NoiseModel(p_1q=one_q, p_swap=p_swap, p_sh=value)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


@dataclass
class ThresholdSweep:
    """A grid of rate estimates over (distance, parameter value)."""

    parameter: str
    points: list[RatePoint] = field(default_factory=list)

    def run(self, values, distances, shots: int, seed: int, decoder: str = "unionfind",
            threads: int = 1, progress=None, graph_model: str = "correlated",
            **fixed) -> "ThresholdSweep":
        for value in values:
            noise = noise_for_sweep(self.parameter, value, **fixed)
            for d in distances:
                pt = estimate_logical_rate(d, noise, shots, seed, decoder=decoder,
                                           threads=threads, parameter=value,
                                           graph_model=graph_model)
                self.points.append(pt)
                if progress is not None:
                    progress(pt)
        return self


@dataclass
class ThresholdFit:
    value: float            # averaged pairwise crossing, NaN when none found
    uncertainty: float
    crossings: list[tuple[int, int, float]]
    found: bool


def _crossings(xs, ra, rb, floor):
    """Zero crossings of log(ra) - log(rb) by linear interpolation."""
    la = np.log(np.maximum(ra, floor))
    lb = np.log(np.maximum(rb, floor))
    diff = la - lb
    out = []
    for i in range(len(xs) - 1):
        d0, d1 = diff[i], diff[i + 1]
        if d0 == 0.0:
            out.append(xs[i])
        elif d0 * d1 < 0:
            out.append(xs[i] + (xs[i + 1] - xs[i]) * d0 / (d0 - d1))
    return out


def locate_threshold(sweep: ThresholdSweep) -> ThresholdFit:
    """Average crossing point of successive-distance rate curves."""
    by_d: dict[int, dict[float, RatePoint]] = {}
    for pt in sweep.points:
        by_d.setdefault(pt.d, {})[pt.parameter] = pt
    distances = sorted(by_d)
    if len(distances) < 2:
        raise ValueError("need at least two distances to locate a threshold")
    crossings: list[tuple[int, int, float]] = []
    spreads: list[float] = []
    for da, db in zip(distances, distances[1:]):
        xs = sorted(set(by_d[da]) & set(by_d[db]))
        if len(xs) < 2:
            continue
        pa = [by_d[da][x] for x in xs]
        pb = [by_d[db][x] for x in xs]
        floor = 0.5 / max(pt.shots for pt in pa + pb)
        mids = _crossings(np.array(xs), np.array([p.rate for p in pa]),
                          np.array([p.rate for p in pb]), floor)
        if not mids:
            continue
        mid = mids[0]
        crossings.append((da, db, float(mid)))
        # CI propagation: re-cross with the rates pushed to interval edges
        shifted = []
        for sa, sb in ((1, -1), (-1, 1)):
            ra = np.array([p.ci_high if sa > 0 else p.ci_low for p in pa])
            rb = np.array([p.ci_high if sb > 0 else p.ci_low for p in pb])
            alt = _crossings(np.array(xs), ra, rb, floor)
            if alt:
                shifted.append(alt[0])
        if shifted:
            spreads.append(max(abs(s - mid) for s in shifted))
    if not crossings:
        return ThresholdFit(float("nan"), float("nan"), [], False)
    vals = [c[2] for c in crossings]
    center = float(np.mean(vals))
    spread = (max(vals) - min(vals)) / 2 if len(vals) > 1 else 0.0
    prop = float(np.mean(spreads)) if spreads else 0.0
    return ThresholdFit(center, max(spread, prop), crossings, True)


def sweep_to_csv_rows(sweep: ThresholdSweep) -> list[str]:
    """CSV lines (with header) in deterministic formatting."""
    rows = ["d,parameter,rate,ci_low,ci_high,shots,seed"]
    for pt in sweep.points:
        rows.append(f"{pt.d},{pt.parameter:.10g},{pt.rate:.10g},"
                    f"{pt.ci_low:.10g},{pt.ci_high:.10g},{pt.shots},{pt.seed}")
    return rows
