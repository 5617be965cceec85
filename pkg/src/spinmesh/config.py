"""Experiment configuration: typed settings with physical defaults.

Every physical constant an experiment driver consumes — Stark
coefficient, magnetic field, tunnel-splitting target, operation-time
budget, serial operation counts — lives here rather than in driver code,
so a config file can override any of them.  Loading is strict: unknown
keys anywhere in the tree are rejected by name, and value errors say
which key was bad.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

EXPERIMENTS = ("ghz-verify", "round-distribution", "threshold", "shuttle",
               "stark", "timing")

#: bumped when the layout of emitted artifacts changes
ARTIFACT_VERSION = 1


class ConfigError(ValueError):
    """A configuration file or value is invalid; maps to exit code 2."""


@dataclass
class GhzSettings:
    """Branch draws exercising all four measurement outcomes."""

    tolerance: float = 1e-12

    def validate(self, path: str) -> None:
        if not 0 < self.tolerance < 1e-3:
            raise ConfigError(f"{path}.tolerance must be in (0, 1e-3)")


@dataclass
class RoundDistributionSettings:
    """Noise point at which the per-round error distribution is extracted."""

    stabilizer_type: str = "Z"
    p_1q: float = 2e-4
    p_swap: float = 2e-3
    p_sh: float = 7.9e-3

    def validate(self, path: str) -> None:
        if self.stabilizer_type not in ("Z", "X"):
            raise ConfigError(f"{path}.stabilizer_type must be 'Z' or 'X'")
        for name in ("p_1q", "p_swap", "p_sh"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.1:
                raise ConfigError(f"{path}.{name} must be in [0, 0.1]")


@dataclass
class ThresholdSettings:
    """Sweep grid and noise composition for logical-rate estimation."""

    parameter: str = "p_swap"
    values: list[float] = field(
        default_factory=lambda: [0.0024, 0.0030, 0.0036, 0.0042])
    distances: list[int] = field(default_factory=lambda: [3, 5, 7, 9])
    shots: int = 100_000
    decoder: str = "mwpm"
    graph_model: str = "correlated"
    ratio_1q_swap: float = 0.1
    p_swap: float = 0.0
    p_1q: float = 0.0
    p_sh: float = 0.0

    def validate(self, path: str) -> None:
        if self.parameter not in ("p_swap", "p_sh"):
            raise ConfigError(f"{path}.parameter must be 'p_swap' or 'p_sh'")
        if self.decoder not in ("unionfind", "mwpm", "mwpm-reference"):
            raise ConfigError(f"{path}.decoder must be one of "
                              "'unionfind', 'mwpm', 'mwpm-reference'")
        if self.graph_model not in ("correlated", "independent"):
            raise ConfigError(f"{path}.graph_model must be "
                              "'correlated' or 'independent'")
        if not self.values:
            raise ConfigError(f"{path}.values must be non-empty")
        for v in self.values:
            if not 0.0 <= v <= 0.1:
                raise ConfigError(f"{path}.values entries must be in [0, 0.1]")
        for d in self.distances:
            if d < 3 or d % 2 == 0:
                raise ConfigError(f"{path}.distances must be odd and >= 3")
        if self.shots < 1:
            raise ConfigError(f"{path}.shots must be positive")
        for name in ("ratio_1q_swap", "p_swap", "p_1q", "p_sh"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{path}.{name} must be non-negative")

    def fixed_kwargs(self) -> dict:
        if self.parameter == "p_swap":
            return {"ratio_1q_swap": self.ratio_1q_swap, "p_sh": self.p_sh}
        return {"ratio_1q_swap": self.ratio_1q_swap, "p_swap": self.p_swap,
                "p_1q": self.p_1q}


@dataclass
class ShuttleSettings:
    """Dot-array geometry, calibration targets, and sweep timing."""

    dot_count: int = 3
    gate_width_nm: float = 40.0
    pitch_nm: float = 60.0
    oxide_thickness_nm: float = 17.0
    target_eps_t_uev: float = 25.0
    target_gap_mev: float = 3.0
    operating_voltage_v: float = 0.3
    cross_capacitance: float = 0.08
    effective_mass: float = 0.19
    grid_spacing_nm: float = 0.25
    margin_nm: float = 40.0
    duration_ns: float = 4.1
    dt_fs: float = 1.0
    snapshots: int = 200
    path: list[int] = field(default_factory=lambda: [0, 1, 2])

    def validate(self, path: str) -> None:
        if self.dot_count < 2:
            raise ConfigError(f"{path}.dot_count must be at least 2")
        if self.grid_spacing_nm <= 0 or self.grid_spacing_nm > 0.5:
            raise ConfigError(f"{path}.grid_spacing_nm must be in (0, 0.5]")
        if self.duration_ns <= 0:
            raise ConfigError(f"{path}.duration_ns must be positive")
        if self.dt_fs <= 0:
            raise ConfigError(f"{path}.dt_fs must be positive")
        if len(self.path) < 2:
            raise ConfigError(f"{path}.path needs at least two dots")
        for p in self.path:
            if not 0 <= p < self.dot_count:
                raise ConfigError(f"{path}.path indices must be dot indices")


@dataclass
class StarkSettings:
    """g-factor response of the shuttled spin and its drive frequency."""

    eta_nm2_per_v2: float = 2.2
    b0_tesla: float = 1.43
    nu0_ghz: float = 40.0
    base_field_v_per_nm: float = 0.010
    field_per_volt: float | None = None  # None: calibrate for a 0.2 MHz span
    field_sigma_nm: float = 14.0

    def validate(self, path: str) -> None:
        if self.eta_nm2_per_v2 < 0:
            raise ConfigError(f"{path}.eta_nm2_per_v2 must be non-negative")
        if self.nu0_ghz <= 0:
            raise ConfigError(f"{path}.nu0_ghz must be positive")
        if self.base_field_v_per_nm <= 0:
            raise ConfigError(f"{path}.base_field_v_per_nm must be positive")


@dataclass
class TimingSettings:
    """Serial operation budget and drive frequencies for cycle times."""

    t_load_ns: float = 20.0
    t_shuttle_internode_ns: float = 60.0
    t_sqrt_swap_ns: float = 1.0
    t_empty_ns: float = 10.0
    t_readout_ns: float = 10.0
    pi_rotations_per_subcycle: float = 16.5
    subcycles: int = 4
    serial_op_counts: dict = field(default_factory=lambda: {
        "load": 1, "shuttle_internode": 3, "sqrt_swap": 5,
        "empty": 1, "readout": 1})
    f_rabi_mhz: list[float] = field(default_factory=lambda: [100.0, 10.0, 1.0])
    shor_cycles: float = 5.0e11
    shuttle_distance_um: float = 1.5
    shuttle_pitch_nm: float = 50.0
    shuttle_hop_ns: float = 2.0

    def validate(self, path: str) -> None:
        for name in ("t_load_ns", "t_shuttle_internode_ns", "t_sqrt_swap_ns",
                     "t_empty_ns", "t_readout_ns"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{path}.{name} must be non-negative")
        if self.subcycles < 1:
            raise ConfigError(f"{path}.subcycles must be positive")
        if not self.f_rabi_mhz or min(self.f_rabi_mhz) <= 0:
            raise ConfigError(f"{path}.f_rabi_mhz must be positive values")
        known = {"load", "shuttle_internode", "sqrt_swap", "empty", "readout"}
        for op in self.serial_op_counts:
            if op not in known:
                raise ConfigError(
                    f"{path}.serial_op_counts has unknown operation {op!r}")


@dataclass
class ExperimentConfig:
    """Root configuration for one CLI run."""

    experiment: str = "timing"
    seed: int = 0
    threads: int = 1
    out: str = "spinmesh-out"
    ghz: GhzSettings = field(default_factory=GhzSettings)
    round_distribution: RoundDistributionSettings = field(
        default_factory=RoundDistributionSettings)
    threshold: ThresholdSettings = field(default_factory=ThresholdSettings)
    shuttle: ShuttleSettings = field(default_factory=ShuttleSettings)
    stark: StarkSettings = field(default_factory=StarkSettings)
    timing: TimingSettings = field(default_factory=TimingSettings)

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"experiment must be one of {', '.join(EXPERIMENTS)}; "
                f"got {self.experiment!r}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if not self.out:
            raise ConfigError("out must be a non-empty path")
        self.ghz.validate("ghz")
        self.round_distribution.validate("round_distribution")
        self.threshold.validate("threshold")
        self.shuttle.validate("shuttle")
        self.stark.validate("stark")
        self.timing.validate("timing")
        return self

    def resolved(self) -> dict:
        """Fully-resolved plain-dict view for the run manifest."""
        return dataclasses.asdict(self)


_INT_OK = (int,)
_FLOAT_OK = (int, float)


def _coerce(value, hint: str, path: str):
    if hint in ("int",):
        if isinstance(value, bool) or not isinstance(value, _INT_OK):
            raise ConfigError(f"{path} must be an integer")
        return value
    if hint in ("float", "float | None"):
        if value is None and "None" in hint:
            return None
        if isinstance(value, bool) or not isinstance(value, _FLOAT_OK):
            raise ConfigError(f"{path} must be a number")
        return float(value)
    if hint == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string")
        return value
    if hint.startswith("list[float]"):
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list of numbers")
        return [_coerce(v, "float", f"{path}[{i}]") for i, v in enumerate(value)]
    if hint.startswith("list[int]"):
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list of integers")
        return [_coerce(v, "int", f"{path}[{i}]") for i, v in enumerate(value)]
    if hint == "dict":
        if not isinstance(value, dict):
            raise ConfigError(f"{path} must be a mapping")
        return dict(value)
    raise ConfigError(f"{path} has unsupported type")  # pragma: no cover


def _fill_dataclass(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown config key {where!r}")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(f.type) or (
                isinstance(f.type, type) and dataclasses.is_dataclass(f.type)):
            kwargs[name] = _fill_dataclass(f.type, value, sub)
        elif isinstance(f.type, str) and f.type in _SETTINGS_TYPES:
            kwargs[name] = _fill_dataclass(_SETTINGS_TYPES[f.type], value, sub)
        else:
            hint = f.type if isinstance(f.type, str) else f.type.__name__
            kwargs[name] = _coerce(value, hint, sub)
    return cls(**kwargs)


_SETTINGS_TYPES = {
    "GhzSettings": GhzSettings,
    "RoundDistributionSettings": RoundDistributionSettings,
    "ThresholdSettings": ThresholdSettings,
    "ShuttleSettings": ShuttleSettings,
    "StarkSettings": StarkSettings,
    "TimingSettings": TimingSettings,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config from a plain dictionary."""
    return _fill_dataclass(ExperimentConfig, data, "").validate()


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a JSON config file; unknown keys and bad values are rejected."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
