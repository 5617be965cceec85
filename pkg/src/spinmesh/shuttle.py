"""Single-electron shuttling through a linear dot array, in one dimension.

The device is modeled as a chain of gate-defined dots: each gate
contributes a Gaussian potential well whose depth is linear in its
voltage (plus nearest-neighbor cross-capacitance), standing in for a
full electrostatic solve.  The well width and lever arm are calibrated
by eigensolver bisection so that a single biased dot shows the target
orbital gap and two equally biased neighbors show the target tunnel
splitting.

Transport is simulated by integrating the time-dependent effective-mass
Schrödinger equation under a designed piecewise-linear voltage sequence.
The integrator is Crank-Nicolson on a uniform grid: unconditionally
stable and unitary per step up to roundoff, so norm conservation is a
meaningful internal check rather than an imposed constraint.

The same trajectory carries the electron's average vertical field, which
modulates its g-factor quadratically and detunes its resonance frequency
against a static partner spin; the accumulated two-spin phase gives the
singlet dephasing error and the time-averaged frequency used to cancel
it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

try:  # pragma: no cover - exercised implicitly by which path runs
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap(args[0]) if args and callable(args[0]) else wrap


#: hbar in eV*s and hbar^2/(2 m_e) in eV*nm^2
HBAR_EV_S = 6.582119569e-16
_HBAR2_OVER_2ME = 0.03809982
#: transverse effective mass in silicon, in units of the electron mass
DEFAULT_EFFECTIVE_MASS = 0.19


@dataclass(frozen=True)
class DotArraySpec:
    """Geometry and electrostatic model of the linear dot chain."""

    dot_count: int = 3
    gate_width_nm: float = 40.0
    pitch_nm: float = 60.0
    oxide_thickness_nm: float = 17.0
    well_sigma_nm: float = 14.0          # Gaussian width; calibrated default
    lever_arm_mev_per_v: float = 36.0    # well depth per gate volt; calibrated
    cross_capacitance: float = 0.08      # nearest-neighbor voltage pickup
    operating_voltage: float = 0.3       # volts on a gate holding an electron
    effective_mass: float = DEFAULT_EFFECTIVE_MASS
    grid_spacing_nm: float = 0.25
    margin_nm: float = 40.0              # hard walls this far beyond outer dots

    def __post_init__(self):
        if self.dot_count < 1:
            raise ValueError("dot_count must be at least 1")
        if self.grid_spacing_nm > 1.0:
            raise ValueError("grid spacing above 1 nm is too coarse")
        if self.margin_nm < 20.0:
            raise ValueError("boundary margin below 20 nm distorts the wells")

    @property
    def dot_positions(self) -> np.ndarray:
        return np.arange(self.dot_count) * self.pitch_nm

    def grid(self) -> np.ndarray:
        lo = -self.margin_nm
        hi = (self.dot_count - 1) * self.pitch_nm + self.margin_nm
        n = int(round((hi - lo) / self.grid_spacing_nm)) + 1
        return lo + self.grid_spacing_nm * np.arange(n)

    @property
    def kinetic_scale(self) -> float:
        """hbar^2 / (2 m*) in eV nm^2."""
        return _HBAR2_OVER_2ME / self.effective_mass


@dataclass(frozen=True)
class StarkModel:
    """Quadratic g-factor response of the moving spin to vertical field."""

    eta_nm2_per_v2: float = 2.2          # Delta g / g = eta * E_z^2
    b0_tesla: float = 1.43
    nu0_hz: float = 40.0e9
    base_field_v_per_nm: float = 0.010   # vertical field with all gates idle
    field_per_volt: float = 4.0e-4       # per-gate weight; calibrated
    field_sigma_nm: float = 14.0         # lateral spread of each gate's field

    def vertical_field(self, spec: DotArraySpec, x: np.ndarray,
                       voltages: np.ndarray) -> np.ndarray:
        """E_z(x) in V/nm for one gate-voltage configuration."""
        ez = np.full_like(x, self.base_field_v_per_nm)
        for j, xj in enumerate(spec.dot_positions):
            ez += (self.field_per_volt * voltages[j]
                   * np.exp(-((x - xj) ** 2) / (2.0 * self.field_sigma_nm ** 2)))
        return ez

    def frequency(self, ez_expect: np.ndarray | float) -> np.ndarray | float:
        """Resonance frequency at a given average vertical field.

        Normalized so the field at calibration (all gates idle) gives nu0
        exactly.
        """
        e0 = self.base_field_v_per_nm
        shift = self.eta_nm2_per_v2 * (np.asarray(ez_expect) ** 2 - e0 ** 2)
        return self.nu0_hz * (1.0 + shift / (1.0 + self.eta_nm2_per_v2 * e0 ** 2))


@dataclass
class VoltageSequence:
    """Piecewise-linear gate voltages: breakpoints (times, per-gate values)."""

    times: np.ndarray        # float64[k], strictly increasing, starts at 0
    voltages: np.ndarray     # float64[k, gates]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.voltages = np.asarray(self.voltages, dtype=np.float64)
        if self.times.ndim != 1 or np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if self.voltages.shape[0] != len(self.times):
            raise ValueError("one voltage row per breakpoint required")

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        out = np.empty(self.voltages.shape[1])
        for j in range(self.voltages.shape[1]):
            out[j] = np.interp(t, self.times, self.voltages[:, j])
        return out

    def rescaled(self, duration: float) -> "VoltageSequence":
        """Same sweep shape, stretched to a new total duration."""
        scale = duration / self.duration
        return VoltageSequence(self.times * scale, self.voltages.copy())


def effective_voltages(spec: DotArraySpec, voltages: np.ndarray) -> np.ndarray:
    """Gate voltages after nearest-neighbor cross-capacitance pickup."""
    v = np.asarray(voltages, dtype=np.float64)
    eff = v.copy()
    if spec.cross_capacitance:
        eff[:-1] += spec.cross_capacitance * v[1:]
        eff[1:] += spec.cross_capacitance * v[:-1]
    return eff


def build_potential(spec: DotArraySpec, voltages) -> np.ndarray:
    """Potential V(x) in eV on the spec grid for one voltage configuration."""
    v = np.asarray(voltages, dtype=np.float64)
    if v.shape != (spec.dot_count,):
        raise ValueError(f"expected {spec.dot_count} gate voltages")
    x = spec.grid()
    eff = effective_voltages(spec, v)
    depth = spec.lever_arm_mev_per_v * 1e-3  # eV per volt
    pot = np.zeros_like(x)
    for j, xj in enumerate(spec.dot_positions):
        pot -= (depth * eff[j]
                * np.exp(-((x - xj) ** 2) / (2.0 * spec.well_sigma_nm ** 2)))
    return pot


def ground_spectrum(spec: DotArraySpec, potential: np.ndarray, m: int = 2):
    """Lowest ``m`` eigenpairs of the effective-mass Hamiltonian.

    Returns (energies [m] in eV, wavefunctions [m, n] normalized so that
    sum |psi|^2 dx = 1).
    """
    if m > 8:
        raise ValueError("m must be at most 8")
    x = spec.grid()
    dx = spec.grid_spacing_nm
    k = spec.kinetic_scale / dx ** 2
    diag = potential + 2.0 * k
    off = np.full(len(x) - 1, -k)
    # full-spectrum MRRR driver: the subset drivers route through inverse
    # iteration, whose vectors mix visibly for near-degenerate doublets
    vals, vecs = eigh_tridiagonal(diag, off, lapack_driver="stemr")
    vals = vals[:m]
    vecs = vecs[:, :m].T / np.sqrt(dx)
    # fix a global sign so results are deterministic
    for i in range(m):
        j = np.argmax(np.abs(vecs[i]))
        if vecs[i][j] < 0:
            vecs[i] = -vecs[i]
    return vals, vecs


def _dot_probability(spec: DotArraySpec, psi: np.ndarray, dot: int) -> float:
    """Probability mass in the region nearest to the given dot.

    Grid points landing exactly on a region boundary count half toward
    each side, so a symmetric state splits exactly 50/50.
    """
    x = spec.grid()
    pos = spec.dot_positions
    eps = 1e-9 * spec.grid_spacing_nm
    lo = -np.inf if dot == 0 else 0.5 * (pos[dot - 1] + pos[dot])
    hi = np.inf if dot == spec.dot_count - 1 else 0.5 * (pos[dot] + pos[dot + 1])
    w = ((x > lo + eps) & (x < hi - eps)).astype(np.float64)
    w[np.abs(x - lo) <= eps] = 0.5
    w[np.abs(x - hi) <= eps] = 0.5
    return float(np.sum(w * np.abs(psi) ** 2) * spec.grid_spacing_nm)


def orbital_gap(spec: DotArraySpec, voltages) -> float:
    """Energy gap (eV) between the two lowest states at fixed voltages."""
    vals, _ = ground_spectrum(spec, build_potential(spec, voltages), m=2)
    return float(vals[1] - vals[0])


def tunnel_splitting(spec: DotArraySpec) -> float:
    """2*eps_t (eV): gap of two adjacent dots biased equally, others idle."""
    if spec.dot_count < 2:
        raise ValueError("need at least two dots")
    v = np.zeros(spec.dot_count)
    v[0] = v[1] = spec.operating_voltage
    return orbital_gap(spec, v)


def single_dot_gap(spec: DotArraySpec) -> float:
    """Orbital excitation energy (eV) of one biased dot, others idle."""
    v = np.zeros(spec.dot_count)
    v[0] = spec.operating_voltage
    return orbital_gap(spec, v)


def calibrate_array(target_splitting_ev: float = 50e-6,
                    target_gap_ev: float = 3e-3,
                    base: DotArraySpec | None = None) -> DotArraySpec:
    """Find (sigma, lever arm) hitting the tunnel splitting and orbital gap.

    Nested bisection: for each trial width the lever arm is first solved
    so a single dot shows the target orbital gap, then the width is
    adjusted until two equally biased neighbors show the target
    splitting.  Wider wells lower the interdot barrier and increase the
    splitting monotonically, which makes bisection safe.
    """
    base = base or DotArraySpec()

    def with_params(sigma, lever):
        return DotArraySpec(
            dot_count=max(base.dot_count, 2), gate_width_nm=base.gate_width_nm,
            pitch_nm=base.pitch_nm, oxide_thickness_nm=base.oxide_thickness_nm,
            well_sigma_nm=sigma, lever_arm_mev_per_v=lever,
            cross_capacitance=base.cross_capacitance,
            operating_voltage=base.operating_voltage,
            effective_mass=base.effective_mass,
            grid_spacing_nm=base.grid_spacing_nm, margin_nm=base.margin_nm)

    def lever_for_gap(sigma):
        lo, hi = 1.0, 400.0  # meV/V
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if single_dot_gap(with_params(sigma, mid)) < target_gap_ev:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    lo, hi = 8.0, 24.0  # nm well width
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        spec = with_params(mid, lever_for_gap(mid))
        if tunnel_splitting(spec) < target_splitting_ev:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    spec = with_params(sigma, lever_for_gap(sigma))
    if base.dot_count != spec.dot_count:
        spec = DotArraySpec(
            dot_count=base.dot_count, gate_width_nm=spec.gate_width_nm,
            pitch_nm=spec.pitch_nm, oxide_thickness_nm=spec.oxide_thickness_nm,
            well_sigma_nm=spec.well_sigma_nm,
            lever_arm_mev_per_v=spec.lever_arm_mev_per_v,
            cross_capacitance=spec.cross_capacitance,
            operating_voltage=spec.operating_voltage,
            effective_mass=spec.effective_mass,
            grid_spacing_nm=spec.grid_spacing_nm, margin_nm=spec.margin_nm)
    return spec


@lru_cache(maxsize=4)
def calibrated_spec(dot_count: int = 3) -> DotArraySpec:
    """Calibrated chain with the standard splitting and gap targets."""
    return calibrate_array(base=DotArraySpec(dot_count=dot_count))


# ---------------------------------------------------------------------------
# Voltage sequence design
# ---------------------------------------------------------------------------

_OCCUPATION_THRESHOLD = 1e-3  # "fast until 0.1% has tunnelled" design rule


def _ground_probability(spec, voltages, dot):
    _, vecs = ground_spectrum(spec, build_potential(spec, voltages), m=1)
    return _dot_probability(spec, vecs[0], dot)


def _bisect_voltage(f, lo, hi, iters=50):
    """Voltage where monotone ``f`` crosses zero, by bisection."""
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (f(mid) > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_resonance(spec: DotArraySpec, sender: int, receiver: int,
                   receiver_range: tuple[float, float] | None = None) -> float:
    """Receiver-gate voltage where the ground state splits evenly.

    With cross-capacitance the balance point is not at equal gate
    voltages, so it is located by bisecting on the probability imbalance.
    """
    v_op = spec.operating_voltage
    lo, hi = receiver_range or (0.0, 2.0 * v_op)

    def imbalance(v):
        volts = np.zeros(spec.dot_count)
        volts[sender] = v_op
        volts[receiver] = v
        return _ground_probability(spec, volts, receiver) - 0.5

    if imbalance(lo) > 0 or imbalance(hi) < 0:
        raise ValueError("resonance not bracketed by the voltage range")
    return _bisect_voltage(imbalance, lo, hi)


def _difficulty(spec, volt_rows, segment_gap_floor=1e-9):
    """Adiabaticity demand of each leg of a voltage path.

    For consecutive configurations the integrand |<e|d g>| / gap is
    estimated from finite differences of the two lowest eigenvectors;
    sweep time should be allocated proportionally.
    """
    states = []
    for row in volt_rows:
        vals, vecs = ground_spectrum(spec, build_potential(spec, row), m=2)
        states.append((vals, vecs))
    dx = spec.grid_spacing_nm
    out = np.empty(len(volt_rows) - 1)
    for i in range(len(volt_rows) - 1):
        (va, wa), (vb, wb) = states[i], states[i + 1]
        dpsi = wb[0] - wa[0] * np.sign(np.sum(wa[0] * wb[0]) * dx)
        coupling = abs(np.sum(wa[1] * dpsi) * dx)
        gap = max(0.5 * abs((va[1] - va[0]) + (vb[1] - vb[0])),
                  segment_gap_floor)
        out[i] = max(coupling / gap, 1e-12)
    return out


def design_sequence(spec: DotArraySpec, path: list[int],
                    duration_s: float, substeps: int = 10) -> VoltageSequence:
    """Voltage schedule moving the electron along adjacent dots in ``path``.

    Each transfer raises the receiving gate quickly until a 0.1% ground
    probability has leaked into it, crawls through the resonant
    tunnelling region, keeps crawling while the sending gate starts to
    release, and drops the sending gate quickly once it holds only 0.1%.
    Segment durations equalize the adiabaticity integrand, which is what
    makes the sweep slow exactly where the gap closes to the tunnel
    splitting.
    """
    for a, b in zip(path, path[1:]):
        if abs(a - b) != 1:
            raise ValueError("path must step between adjacent dots")
    v_op = spec.operating_voltage
    rows = [np.zeros(spec.dot_count)]
    rows[0][path[0]] = v_op
    difficulty_rows: list[np.ndarray] = [rows[0]]

    def leg(start_row, gate, v_from, v_to, n):
        out = []
        for s in range(1, n + 1):
            row = start_row.copy()
            row[gate] = v_from + (v_to - v_from) * s / n
            out.append(row)
        return out

    for sender, receiver in zip(path, path[1:]):
        base_row = rows[-1]

        def recv_leak(v):
            row = base_row.copy()
            row[receiver] = v
            return _ground_probability(spec, row, receiver) - _OCCUPATION_THRESHOLD

        v_arrive = _bisect_voltage(recv_leak, 0.0, v_op)
        # receiving gate: fast approach, then crawl up to full bias
        rows.extend(leg(base_row, receiver, 0.0, v_arrive, 1))
        rows.extend(leg(rows[-1], receiver, v_arrive, v_op, substeps))
        # sending gate: crawl through release, then fast to idle
        both_row = rows[-1]

        def send_hold(v):
            row = both_row.copy()
            row[sender] = v
            return _OCCUPATION_THRESHOLD - _ground_probability(spec, row, sender)

        v_release = _bisect_voltage(send_hold, 0.0, v_op)
        rows.extend(leg(both_row, sender, v_op, v_release, substeps))
        rows.extend(leg(rows[-1], sender, v_release, 0.0, 1))

    volt_rows = np.array(rows)
    weights = _difficulty(spec, volt_rows)
    times = np.concatenate([[0.0], np.cumsum(weights)])
    times *= duration_s / times[-1]
    # collapse any numerically coincident breakpoints
    keep = np.concatenate([[True], np.diff(times) > duration_s * 1e-12])
    return VoltageSequence(times[keep], volt_rows[keep])


# ---------------------------------------------------------------------------
# Time propagation
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, fastmath=True)
def _cn_segment(psi, kin, shapes, v_from, v_to, dt, k0, n_steps, n_total,
                hbar):
    """Crank-Nicolson steps ``k0 .. k0+n_steps`` of one linear voltage leg.

    The leg interpolates gate voltages from ``v_from`` to ``v_to`` over
    ``n_total`` equal steps; the Hamiltonian is sampled at each step's
    midpoint, which is second-order accurate because the potential is
    exactly linear in time within the leg.
    """
    n = psi.shape[0]
    diag = np.empty(n)
    a = np.empty(n, dtype=np.complex128)
    rhs = np.empty(n, dtype=np.complex128)
    cp = np.empty(n, dtype=np.complex128)
    for k in range(k0, k0 + n_steps):
        frac = (k + 0.5) / n_total
        for i in range(n):
            acc = kin[0]
            for j in range(shapes.shape[0]):
                vj = v_from[j] + frac * (v_to[j] - v_from[j])
                acc += vj * shapes[j, i]
            diag[i] = acc
        # (1 + i dt H / 2 hbar) psi_new = (1 - i dt H / 2 hbar) psi
        lam = 0.5 * dt / hbar
        off = 1j * lam * kin[1]
        for i in range(n):
            a[i] = 1.0 + 1j * lam * diag[i]
            acc2 = (1.0 - 1j * lam * diag[i]) * psi[i]
            if i > 0:
                acc2 -= off * psi[i - 1]
            if i < n - 1:
                acc2 -= off * psi[i + 1]
            rhs[i] = acc2
        # Thomas solve with constant off-diagonal `off`
        cp[0] = off / a[0]
        rhs[0] = rhs[0] / a[0]
        for i in range(1, n):
            m = a[i] - off * cp[i - 1]
            cp[i] = off / m
            rhs[i] = (rhs[i] - off * rhs[i - 1]) / m
        psi[n - 1] = rhs[n - 1]
        for i in range(n - 2, -1, -1):
            psi[i] = rhs[i] - cp[i] * psi[i + 1]


@dataclass
class ShuttleTrajectory:
    """Snapshots of one propagated shuttle run."""

    spec: DotArraySpec
    sequence: VoltageSequence
    grid: np.ndarray
    times: np.ndarray            # snapshot times (s)
    psi: np.ndarray              # complex128[n_snap, n]
    fidelity: np.ndarray         # |<ground(t)|psi(t)>|^2
    norm: np.ndarray             # integral |psi|^2 dx
    spectrum: np.ndarray         # float64[n_snap, m] lowest eigenvalues (eV)
    ground: np.ndarray           # float64[n_snap, n] instantaneous ground state
    ez_expect: np.ndarray | None = None  # V/nm, filled when a StarkModel is given

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])


def propagate(spec: DotArraySpec, sequence: VoltageSequence,
              dt: float = 1e-15, snapshots: int = 400, m_levels: int = 4,
              stark: StarkModel | None = None) -> ShuttleTrajectory:
    """Integrate one shuttle run and record fidelity/spectrum snapshots."""
    x = spec.grid()
    dx = spec.grid_spacing_nm
    n = len(x)
    depth = spec.lever_arm_mev_per_v * 1e-3

    # per-gate unit-voltage potential profiles, cross-capacitance folded in
    raw = np.stack([np.exp(-((x - xj) ** 2) / (2.0 * spec.well_sigma_nm ** 2))
                    for xj in spec.dot_positions])
    mix = np.eye(spec.dot_count)
    if spec.cross_capacitance:
        idx = np.arange(spec.dot_count - 1)
        mix[idx + 1, idx] = spec.cross_capacitance
        mix[idx, idx + 1] = spec.cross_capacitance
    shapes = -depth * (mix @ raw)

    # V(x, t) is linear in t within each segment, so its extrema over the
    # whole sweep occur at breakpoint rows
    e_max = float(max(np.max(np.abs(sequence.voltages @ shapes)), 1e-3) + 0.005)
    if dt * e_max / HBAR_EV_S >= 0.1:
        raise ValueError("time step too coarse for the potential energy scale")

    k = spec.kinetic_scale / dx ** 2
    kin = np.array([2.0 * k, -k])

    v_init = build_potential(spec, sequence.voltages[0])
    _, vecs = ground_spectrum(spec, v_init, m=1)
    psi = vecs[0].astype(np.complex128)

    # steps never straddle a voltage breakpoint: each linear leg gets an
    # integer step count at a per-leg step size as close to dt as possible
    durations = np.diff(sequence.times)
    leg_steps = np.maximum(1, np.round(durations / dt).astype(np.int64))
    total_steps = int(leg_steps.sum())
    snap_every = max(1, total_steps // max(snapshots, 1))

    times = [0.0]
    psis = [psi.copy()]
    t = 0.0
    for leg in range(len(durations)):
        n_total = int(leg_steps[leg])
        dt_leg = durations[leg] / n_total
        v_from = sequence.voltages[leg]
        v_to = sequence.voltages[leg + 1]
        k0 = 0
        while k0 < n_total:
            chunk = min(snap_every, n_total - k0)
            _cn_segment(psi, kin, shapes, v_from, v_to, dt_leg, k0, chunk,
                        n_total, HBAR_EV_S)
            k0 += chunk
            t = sequence.times[leg] + k0 * dt_leg
            times.append(t)
            psis.append(psi.copy())

    times_arr = np.array(times)
    psi_arr = np.array(psis)
    n_snap = len(times_arr)
    fidelity = np.empty(n_snap)
    norm = np.empty(n_snap)
    spectrum = np.empty((n_snap, m_levels))
    ground = np.empty((n_snap, n))
    ez = np.empty(n_snap) if stark is not None else None
    for i, ti in enumerate(times_arr):
        volts = sequence.at(min(ti, sequence.duration))
        vals, vecs = ground_spectrum(spec, build_potential(spec, volts),
                                     m=m_levels)
        spectrum[i] = vals
        ground[i] = vecs[0]
        overlap = np.sum(np.conj(vecs[0]) * psi_arr[i]) * dx
        fidelity[i] = abs(overlap) ** 2
        norm[i] = float(np.sum(np.abs(psi_arr[i]) ** 2) * dx)
        if ez is not None:
            field = stark.vertical_field(spec, x, volts)
            ez[i] = float(np.sum(field * np.abs(psi_arr[i]) ** 2) * dx)

    drift = np.max(np.abs(norm - 1.0))
    if drift > 1e-8:
        raise RuntimeError(f"norm drifted by {drift:.2e}; reduce the time step")
    return ShuttleTrajectory(spec, sequence, x, times_arr, psi_arr, fidelity,
                             norm, spectrum, ground, ez)


def fidelity_threshold(spec: DotArraySpec, path: list[int],
                       t_low_s: float, t_high_s: float,
                       target: float = 0.99, dt: float = 1e-15,
                       iters: int = 5, snapshots: int = 120):
    """Smallest duration in [t_low, t_high] whose final fidelity passes.

    Returns (threshold_s, checked) where checked maps durations to final
    fidelities.  Raises ValueError when the bracket does not straddle the
    target.
    """
    base = design_sequence(spec, path, t_high_s)
    checked: dict[float, float] = {}

    def final_f(duration):
        traj = propagate(spec, base.rescaled(duration), dt=dt,
                         snapshots=snapshots, m_levels=2)
        checked[duration] = traj.final_fidelity
        return traj.final_fidelity

    f_lo, f_hi = final_f(t_low_s), final_f(t_high_s)
    if f_lo >= target or f_hi < target:
        raise ValueError(
            f"bracket [{t_low_s}, {t_high_s}] does not straddle F={target}: "
            f"endpoints {f_lo:.4f}, {f_hi:.4f}")
    lo, hi = t_low_s, t_high_s
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if final_f(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi, checked


# ---------------------------------------------------------------------------
# Stark dephasing of the shuttled spin against a static partner
# ---------------------------------------------------------------------------

def stark_phase_error(traj: ShuttleTrajectory, stark: StarkModel,
                      nu_static_hz: float):
    """Singlet error from the frequency detuning accumulated in transit.

    Returns (error(t) array over trajectory snapshots, nu_avg).  The
    two-spin S/T0 phase angle is 2 pi * integral of (nu(t) - nu_static);
    the singlet error is sin^2 of half that angle times two — i.e.
    sin^2(pi * integral of the detuning).
    """
    if traj.ez_expect is None:
        raise ValueError("trajectory lacks vertical-field data; "
                         "propagate with a StarkModel")
    nu = np.asarray(stark.frequency(traj.ez_expect), dtype=np.float64)
    t = traj.times
    phase = np.concatenate([[0.0], np.cumsum(
        0.5 * (nu[1:] + nu[:-1] - 2.0 * nu_static_hz) * np.diff(t))])
    error = np.sin(np.pi * phase) ** 2
    nu_avg = float(np.trapezoid(nu, t) / (t[-1] - t[0]))
    return error, nu_avg


def calibrate_stark_scale(spec: DotArraySpec, stark: StarkModel,
                          sequence: VoltageSequence,
                          span_hz: float = 0.2e6) -> StarkModel:
    """Fix ``field_per_volt`` so the sweep modulates the frequency by ``span_hz``.

    The modulation is evaluated quasi-statically: the ground state at each
    voltage breakpoint weighs the gate field profiles, and the per-volt
    scale is bisected until the max-min frequency span over the sweep hits
    the target.  The span grows monotonically with the scale, which makes
    bisection safe.
    """
    x = spec.grid()
    dx = spec.grid_spacing_nm
    weights = []
    for row in sequence.voltages:
        _, vecs = ground_spectrum(spec, build_potential(spec, row), m=1)
        prob = np.abs(vecs[0]) ** 2
        unit = np.zeros_like(x)
        for j, xj in enumerate(spec.dot_positions):
            unit += row[j] * np.exp(-((x - xj) ** 2)
                                     / (2.0 * stark.field_sigma_nm ** 2))
        weights.append(float(np.sum(unit * prob) * dx))
    weights = np.array(weights)

    def span(scale):
        model = StarkModel(stark.eta_nm2_per_v2, stark.b0_tesla, stark.nu0_hz,
                           stark.base_field_v_per_nm, scale,
                           stark.field_sigma_nm)
        nu = np.asarray(model.frequency(stark.base_field_v_per_nm
                                        + scale * weights))
        return float(np.max(nu) - np.min(nu))

    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if span(mid) < span_hz:
            lo = mid
        else:
            hi = mid
    scale = 0.5 * (lo + hi)
    return StarkModel(stark.eta_nm2_per_v2, stark.b0_tesla, stark.nu0_hz,
                      stark.base_field_v_per_nm, scale, stark.field_sigma_nm)


def spin_orbit_error_estimate(travel_um: float, so_length_um: float,
                              kappa: float = 1.578) -> float:
    """Singlet infidelity from spin rotation over the travelled distance."""
    if travel_um < 0 or so_length_um <= 0:
        raise ValueError("lengths must be positive")
    return float(np.sin(kappa * travel_um / so_length_um) ** 2)


def adiabaticity_metric(traj: ShuttleTrajectory, m: int | None = None
                        ) -> np.ndarray:
    """Sum over excited levels of |<psi_m | d/dt psi_g>| / (E_m - E_g).

    Ground-state time derivatives use centered differences with the gauge
    fixed by aligning consecutive snapshots; terms with degenerate levels
    are skipped.
    """
    m = m or traj.spectrum.shape[1]
    dx = traj.spec.grid_spacing_nm
    n_snap = len(traj.times)
    # gauge-align the ground-state snapshots
    g = traj.ground.copy()
    for i in range(1, n_snap):
        if np.sum(g[i - 1] * g[i]) * dx < 0:
            g[i] = -g[i]
    out = np.zeros(n_snap)
    for i in range(1, n_snap - 1):
        dt = traj.times[i + 1] - traj.times[i - 1]
        dpsi = (g[i + 1] - g[i - 1]) / dt
        volts = traj.sequence.at(min(traj.times[i], traj.sequence.duration))
        _, vecs = ground_spectrum(traj.spec,
                                  build_potential(traj.spec, volts), m=m)
        for lvl in range(1, m):
            gap = traj.spectrum[i, lvl] - traj.spectrum[i, 0]
            if abs(gap) < 1e-12:
                continue
            coupling = abs(np.sum(vecs[lvl] * dpsi) * dx)
            out[i] += coupling / (abs(gap) / HBAR_EV_S)
    return out
