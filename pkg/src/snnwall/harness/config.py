"""Scenario configuration: nested dataclasses loaded from YAML.

The file layout mirrors the dataclass tree field for field. Unknown keys are
an error so that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .. import lqr, matcher, snn
from ..controller import ControllerConfig
from ..vehicle import DisturbanceConfig


class ConfigError(ValueError):
    pass


@dataclass
class PlantConfig:
    wheel_distance: float = 0.3
    dt: float = 0.05
    substeps: int = 10
    start: list = field(default_factory=lambda: [float(np.pi / 2), 1.2, float(np.pi / 2)])


@dataclass
class NoiseConfig:
    actuator_gain_omega: float = 1.0
    sensor_sigma_p: float = 0.0
    sensor_sigma_theta: float = 0.0
    seed: int = 0
    actuator_bias_omega: float = 0.0


@dataclass
class ReferenceConfig:
    kind: str = "line"            # line | sinusoid | room
    line_y: float = 1.0
    x_start: float = -5.0
    x_end: float = 45.0
    samples_per_meter: float = 100.0
    wall_offset: float = 0.18
    wall_on_right: bool = True


@dataclass
class ControlConfig:
    Q: list = field(default_factory=lambda: [1.0, 1.0, 0.5])
    R: list = field(default_factory=lambda: [0.1, 0.1])
    v_r: float = 1.0
    alpha: float = 0.06
    omega_max: float = 1.0
    window: int = 50


@dataclass
class LifConfig:
    tau_d: float = 0.02
    r_m: float = 1.0
    v_th: float = 1.0
    v_reset: float = 0.0
    tau_ref: float = 0.002
    tau_p: float = 0.1


@dataclass
class SnnConfig:
    enabled: bool = True
    n_neurons: int = 100
    gamma_v: float = 1e-6
    gamma_w: float = 1e-6
    per_substep: bool = False
    neuron_dt: float = 0.001
    position_scale: float = 1.0
    seed_v: int = 1
    seed_w: int = 2
    lif: LifConfig = field(default_factory=LifConfig)


@dataclass
class CylinderConfig:
    center: list
    radius: float


@dataclass
class LidarConfig:
    rays: int = 360
    max_range: float = 3.5
    span_deg: float = 360.0
    range_sigma: float = 0.0


@dataclass
class RoomConfig:
    side: float = 4.0
    cylinders: list = field(default_factory=list)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    robot_radius: float = 0.05


@dataclass
class WallFollowConfig:
    explore: str = "straight"     # straight | spiral
    explore_trigger: float = 1.0
    capture_distance: float = 0.05
    lookahead: float = 0.4
    lost_after: int = 20
    seek_radius: float = 0.5
    spiral_radius0: float = 0.5
    spiral_growth: float = 0.1
    fit_spacing: float = 0.15
    fit_radius: float = 1.2
    arc_min_deg: float = -135.0
    arc_max_deg: float = 90.0
    degree: int = 3
    samples: int = 500


@dataclass
class MetricsConfig:
    position_threshold: float = 0.05
    heading_threshold: float = 0.05


@dataclass
class ScenarioConfig:
    scenario: str = "a"
    duration: float = 20.0
    plant: PlantConfig = field(default_factory=PlantConfig)
    disturbance: NoiseConfig = field(default_factory=NoiseConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    snn: SnnConfig = field(default_factory=SnnConfig)
    room: RoomConfig = field(default_factory=RoomConfig)
    wall_follow: WallFollowConfig = field(default_factory=WallFollowConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    room_file: str | None = None
    out_dir: str = "out"

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        if self.scenario not in ("a", "b", "c"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.wall_follow.explore not in ("straight", "spiral"):
            raise ConfigError(f"unknown exploration {self.wall_follow.explore!r}")

    # -- conversions -----------------------------------------------------

    def disturbance_config(self) -> DisturbanceConfig:
        d = self.disturbance
        return DisturbanceConfig(d.actuator_gain_omega, d.sensor_sigma_p,
                                 d.sensor_sigma_theta, d.seed,
                                 d.actuator_bias_omega)

    def controller_config(self, snn_enabled: bool | None = None) -> ControllerConfig:
        c, s = self.control, self.snn
        enabled = s.enabled if snn_enabled is None else snn_enabled
        return ControllerConfig(
            dt=self.plant.dt,
            weights=lqr.LqrWeights(_matrix(c.Q), _matrix(c.R)),
            feedforward=matcher.FeedforwardConfig(c.v_r, c.alpha, c.window),
            omega_max=c.omega_max,
            snn_enabled=enabled,
            n_neurons=s.n_neurons,
            lif=snn.LifParams(**dataclasses.asdict(s.lif)),
            rule_v=snn.PesRule(s.gamma_v, True, s.per_substep),
            rule_w=snn.PesRule(s.gamma_w, True, s.per_substep),
            neuron_dt=s.neuron_dt,
            position_scale=s.position_scale,
            seed_v=s.seed_v,
            seed_w=s.seed_w,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return np.diag(arr) if arr.ndim == 1 else arr


def _build(cls, data, path: str):
    if not dataclasses.is_dataclass(cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        hint = hints[key]
        where = f"{path}.{key}" if path else key
        if dataclasses.is_dataclass(hint):
            kwargs[key] = _build(hint, value, where)
        elif key == "cylinders":
            kwargs[key] = [_build(CylinderConfig, c, f"{where}[{i}]")
                           for i, c in enumerate(value or [])]
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def _overlay(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _overlay(out[key], value)
        else:
            out[key] = value
    return out


def from_dict(data: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Build a config; with ``base`` the mapping only overrides what it names."""
    data = data or {}
    if base is not None:
        data = _overlay(base.to_dict(), data)
    return _build(ScenarioConfig, data, "")


def load_config(path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a YAML config. A relative ``room_file`` is resolved against the
    config's directory and must exist."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    cfg = from_dict(data, base)
    if cfg.room_file is not None:
        room_path = (path.parent / cfg.room_file).resolve()
        if not room_path.exists():
            raise ConfigError(f"room file {room_path} does not exist")
        cfg.room_file = str(room_path)
    return cfg


def dump_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
