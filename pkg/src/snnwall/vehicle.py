"""Differential-drive plant, actuation limits, faults and the noisy pose sensor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_DT = 0.05
DEFAULT_SUBSTEPS = 10
DEFAULT_WHEEL_DISTANCE = 0.3


def wrap_angle(theta):
    """Wrap an angle (or array of angles) into (-pi, pi].

    Values already in range are returned untouched, bit for bit.
    """
    if np.ndim(theta) == 0:
        if -math.pi < theta <= math.pi:
            return theta
        return math.pi - (math.pi - theta) % (2.0 * math.pi)
    theta = np.asarray(theta, dtype=float)
    inside = (theta > -math.pi) & (theta <= math.pi)
    return np.where(inside, theta, math.pi - np.remainder(math.pi - theta, 2.0 * math.pi))


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.theta)):
            raise ValueError(f"non-finite pose {self!r}")
        object.__setattr__(self, "theta", float(wrap_angle(float(self.theta))))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class Twist:
    v: float
    omega: float

    def __add__(self, other: "Twist") -> "Twist":
        return Twist(self.v + other.v, self.omega + other.omega)


ZERO_TWIST = Twist(0.0, 0.0)


@dataclass(frozen=True)
class WheelSpeeds:
    v_right: float
    v_left: float
    wheel_distance: float

    def __post_init__(self):
        if not self.wheel_distance > 0:
            raise ValueError("wheel distance must be positive")

    def to_twist(self) -> Twist:
        # omega = (v_L - v_R) / L, as the plant model is written
        return Twist((self.v_right + self.v_left) / 2.0,
                     (self.v_left - self.v_right) / self.wheel_distance)


@dataclass(frozen=True)
class DisturbanceConfig:
    """Actuator fault and sensor noise applied around the controller.

    ``actuator_gain_omega`` scales the angular velocity the wheels actually
    deliver; 0.5 is a 50 % loss of turning authority. ``actuator_bias_omega``
    adds a constant yaw drift (rad/s), as unequal wheel radii would.
    """

    actuator_gain_omega: float = 1.0
    sensor_sigma_p: float = 0.0
    sensor_sigma_theta: float = 0.0
    rng_seed: int = 0
    actuator_bias_omega: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.actuator_gain_omega <= 1.0:
            raise ValueError("actuator gain must lie in [0, 1]")
        if self.sensor_sigma_p < 0 or self.sensor_sigma_theta < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if not math.isfinite(self.actuator_bias_omega):
            raise ValueError("actuator bias must be finite")


def twist_to_wheels(t: Twist, wheel_distance: float) -> WheelSpeeds:
    if not wheel_distance > 0:
        raise ValueError("wheel distance must be positive")
    half = t.omega * wheel_distance / 2.0
    return WheelSpeeds(t.v - half, t.v + half, wheel_distance)


def saturate(t: Twist, omega_max: float) -> Twist:
    """Clamp |omega| to ``omega_max``, shrinking v by the same factor.

    Scaling both components keeps the commanded turning radius.
    """
    if abs(t.omega) <= omega_max:
        return t
    scale = omega_max / abs(t.omega)
    return Twist(t.v * scale, math.copysign(omega_max, t.omega))


def apply_disturbance(t: Twist, cfg: DisturbanceConfig) -> Twist:
    omega = t.omega * cfg.actuator_gain_omega
    if cfg.actuator_bias_omega:
        omega += cfg.actuator_bias_omega
    return Twist(t.v, omega)


def step(p: Pose, t: Twist, dt: float, substeps: int = DEFAULT_SUBSTEPS) -> Pose:
    """Advance the unicycle kinematics by ``dt`` with forward-Euler substeps."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    h = dt / substeps
    x, y, theta = p.x, p.y, p.theta
    for _ in range(substeps):
        x += h * t.v * math.cos(theta)
        y += h * t.v * math.sin(theta)
        theta += h * t.omega
    return Pose(x, y, theta)


def sense(p: Pose, cfg: DisturbanceConfig, rng: np.random.Generator) -> Pose:
    """Noisy pose measurement; draws three normals per call, always."""
    noise = rng.standard_normal(3)
    return Pose(p.x + cfg.sensor_sigma_p * noise[0],
                p.y + cfg.sensor_sigma_p * noise[1],
                p.theta + cfg.sensor_sigma_theta * noise[2])
