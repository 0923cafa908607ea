"""Closed-loop runs for the three case studies.

Every comparison runs the adaptive controller ("snn") and the benchmark
("lqr": same pipeline with the spiking compensator switched off) from the
same initial pose with the same noise seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .. import spline
from ..controller import ControllerState, ControlBreakdown, control_step
from ..spline import Trajectory
from ..vehicle import (Pose, Twist, ZERO_TWIST, apply_disturbance, saturate,
                       sense, step)
from .config import (CylinderConfig, LidarConfig, ScenarioConfig)
from .metrics import (Metrics, RunLog, compute_metrics, distance_to_reference,
                      reference_errors)
from .room import Cylinder, LidarSpec, RoomSpec, load_room, default_room, ray_ranges

log = logging.getLogger(__name__)

CONTROLLERS = ("snn", "lqr")

# Tuning shared by all three presets. A light position weight leaves the
# benchmark with a visible steady-state error under the actuator fault, which
# is the regime where the adaptive channel has something to learn.
PRESET_Q = [0.1, 0.1, 8.0]
PRESET_R = [0.1, 0.1]
PRESET_GAMMA_V = 3e-9
PRESET_GAMMA_W = 6e-9


@dataclass
class RunResult:
    controller: str
    log: RunLog
    metrics: Metrics
    state: ControllerState
    reference: object = None
    extra: dict = field(default_factory=dict)


# -- scenario presets -------------------------------------------------------

def default_config(scenario: str) -> ScenarioConfig:
    """Preset for case ``a``, ``b`` or ``c``."""
    cfg = ScenarioConfig(scenario=scenario)
    cfg.control.Q = list(PRESET_Q)
    cfg.control.R = list(PRESET_R)
    cfg.snn.gamma_v = PRESET_GAMMA_V
    cfg.snn.gamma_w = PRESET_GAMMA_W
    if scenario == "a":
        cfg.duration = 20.0
        cfg.reference.kind = "line"
        cfg.disturbance.actuator_gain_omega = 0.5
    elif scenario == "b":
        cfg.duration = 35.0
        cfg.reference.kind = "sinusoid"
        cfg.disturbance.sensor_sigma_p = 0.05
        cfg.disturbance.sensor_sigma_theta = 0.1
    elif scenario == "c":
        cfg.reference.kind = "room"
        room = default_room()
        cfg.room.side = room.side
        cfg.room.cylinders = [CylinderConfig(list(c.center), c.radius)
                              for c in room.cylinders]
        cfg.room.lidar = LidarConfig(room.lidar.rays, room.lidar.max_range,
                                     math.degrees(room.lidar.span))
        cfg.plant.start = [room.side / 2, room.side / 2, 0.0]
        # room scale: slower travel and a stiffer position weight than the
        # open-field presets, so concave corners stay collision-free
        cfg.duration = 60.0
        cfg.control.v_r = 0.2
        cfg.control.Q = [5.0, 5.0, 2.0]
        cfg.room.lidar.range_sigma = 0.01
        # the kinematic plant has no unmodelled dynamics of its own; the
        # turning-authority loss of case A stands in for that mismatch
        cfg.disturbance.actuator_gain_omega = 0.5
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return cfg


def with_seed(cfg: ScenarioConfig, seed: int) -> ScenarioConfig:
    """Same scenario with noise and network seeds derived from ``seed``."""
    return replace(
        cfg,
        disturbance=replace(cfg.disturbance, seed=seed),
        snn=replace(cfg.snn, seed_v=2 * seed + 1, seed_w=2 * seed + 2),
    )


def room_spec(cfg: ScenarioConfig) -> RoomSpec:
    """Room geometry and LiDAR: from ``room_file`` when set, else inline."""
    if cfg.room_file is not None:
        return load_room(cfg.room_file)
    r = cfg.room
    return RoomSpec(
        side=r.side,
        cylinders=tuple(Cylinder(tuple(c.center), c.radius) for c in r.cylinders),
        lidar=LidarSpec(r.lidar.rays, r.lidar.max_range, math.radians(r.lidar.span_deg)),
    )


def build_reference(cfg: ScenarioConfig) -> Trajectory:
    ref = cfg.reference
    samples = int(round((ref.x_end - ref.x_start) * ref.samples_per_meter)) + 1
    if ref.kind == "line":
        y0 = ref.line_y
        return Trajectory.from_function(
            lambda t: (t, np.full_like(t, y0)),
            lambda t: (np.ones_like(t), np.zeros_like(t)),
            lambda t: (np.zeros_like(t), np.zeros_like(t)),
            ref.x_start, ref.x_end, samples)
    if ref.kind == "sinusoid":
        return Trajectory.from_function(
            lambda t: (t, np.sin(t)),
            lambda t: (np.ones_like(t), np.cos(t)),
            lambda t: (np.zeros_like(t), -np.sin(t)),
            ref.x_start, ref.x_end, samples)
    raise ValueError(f"reference kind {ref.kind!r} has no analytic trajectory")


# -- shared loop pieces -----------------------------------------------------

def _log_row(run_log: RunLog, t: float, pose: Pose, meas: Pose,
             br: ControlBreakdown | None, u_total: Twist, phase: str) -> None:
    if br is None:
        idx, e_p, e_th = -1, math.nan, math.nan
        u_l = u_f = u_a = ZERO_TWIST
    else:
        idx, e_p, e_th = br.match.index, br.errors.e_p, br.errors.e_theta
        u_l, u_f, u_a = br.u_l, br.u_f, br.u_a
    run_log.append(
        t=t, x=pose.x, y=pose.y, theta=pose.theta,
        x_meas=meas.x, y_meas=meas.y, theta_meas=meas.theta, match_index=idx,
        e_p=e_p, e_theta=e_th, u_l_v=u_l.v, u_l_omega=u_l.omega,
        u_f_v=u_f.v, u_f_omega=u_f.omega, u_a_v=u_a.v, u_a_omega=u_a.omega,
        u_total_v=u_total.v, u_total_omega=u_total.omega,
        cross_track=math.nan, heading_error=math.nan, phase=phase)


def _n_steps(cfg: ScenarioConfig) -> int:
    return int(round(cfg.duration / cfg.plant.dt))


def simulate_tracking(cfg: ScenarioConfig, traj: Trajectory, controller: str,
                      record_spikes: bool = False) -> RunResult:
    """Track a fixed reference trajectory (cases A and B)."""
    dist = cfg.disturbance_config()
    rng = np.random.default_rng(dist.rng_seed)
    state = ControllerState(cfg.controller_config(controller == "snn"), record_spikes)
    pose = Pose(*cfg.plant.start)
    dt = cfg.plant.dt
    run_log = RunLog()
    for k in range(_n_steps(cfg)):
        meas = sense(pose, dist, rng)
        br = control_step(meas, traj, state)
        _log_row(run_log, k * dt, pose, meas, br, br.u_total, "track")
        pose = step(pose, apply_disturbance(br.u_total, dist), dt, cfg.plant.substeps)
    xy = np.column_stack([run_log["x"], run_log["y"]])
    e_p, e_th = reference_errors(traj, xy, run_log["theta"])
    run_log.columns["cross_track"] = [float(v) for v in e_p]
    run_log.columns["heading_error"] = [float(v) for v in e_th]
    m = compute_metrics(run_log, traj, cfg.metrics.position_threshold,
                        cfg.metrics.heading_threshold)
    return RunResult(controller, run_log, m, state, traj)


def run_case_a(cfg: ScenarioConfig, controllers=CONTROLLERS,
               record_spikes: bool = False) -> dict[str, RunResult]:
    """Straight-line tracking with a partial actuator fault."""
    traj = build_reference(cfg)
    return {c: simulate_tracking(cfg, traj, c, record_spikes) for c in controllers}


def run_case_b(cfg: ScenarioConfig, controllers=CONTROLLERS,
               record_spikes: bool = False) -> dict[str, RunResult]:
    """Sinusoid tracking with noisy pose measurements."""
    traj = build_reference(cfg)
    return {c: simulate_tracking(cfg, traj, c, record_spikes) for c in controllers}


# -- case C: wall following -------------------------------------------------

def _thin(points: np.ndarray, spacing: float) -> np.ndarray:
    """Keep points at least ``spacing`` apart along the ordered sequence."""
    kept = [points[0]]
    for p in points[1:]:
        if math.hypot(p[0] - kept[-1][0], p[1] - kept[-1][1]) >= spacing:
            kept.append(p)
    if len(kept) > 1 and np.any(kept[-1] != points[-1]):
        if math.hypot(*(points[-1] - kept[-1])) >= 0.5 * spacing:
            kept.append(points[-1])
    return np.array(kept)


def extend_arc(traj: Trajectory, length: float) -> Trajectory:
    """Continue a trajectory past its end along a circle of its end curvature.

    Around a convex obstacle the visible wall stops just ahead of the robot;
    without a continuation the matched point pins to the last sample and the
    along-track error cancels the forward speed.
    """
    if length <= 0:
        return traj
    ds = float(np.mean(np.hypot(*np.diff(traj.xy, axis=0).T)))
    n = max(int(math.ceil(length / ds)), 1)
    u = ds * np.arange(1, n + 1)
    k = float(traj.curvature[-1])
    th0 = float(traj.heading[-1])
    heading = th0 + k * u
    if abs(k) > 1e-9:
        dx = (np.sin(heading) - math.sin(th0)) / k
        dy = (math.cos(th0) - np.cos(heading)) / k
    else:
        dx, dy = u * math.cos(th0), u * math.sin(th0)
    tail = traj.xy[-1] + np.column_stack([dx, dy])
    step = traj.s[-1] - traj.s[-2]
    return Trajectory(
        np.concatenate([traj.s, traj.s[-1] + step * np.arange(1, n + 1)]),
        np.vstack([traj.xy, tail]),
        np.concatenate([traj.heading, np.arctan2(np.sin(heading), np.cos(heading))]),
        np.concatenate([traj.curvature, np.full(n, k)]),
    )


def visible_wall(cfg: ScenarioConfig, room: RoomSpec, pose: Pose, meas: Pose,
                 rng: np.random.Generator) -> np.ndarray:
    """World-frame scan points in the fitting arc, ordered by bearing.

    The scan is taken from the true pose and projected into the world with
    the measured pose, as an onboard estimate would.
    """
    wf = cfg.wall_follow
    angles, ranges = ray_ranges(room, pose)
    if cfg.room.lidar.range_sigma > 0:
        ranges = ranges + cfg.room.lidar.range_sigma * rng.standard_normal(len(ranges))
    keep = (np.isfinite(ranges) & (ranges <= wf.fit_radius)
            & (angles >= math.radians(wf.arc_min_deg))
            & (angles <= math.radians(wf.arc_max_deg)))
    world = meas.theta + angles[keep]
    return np.column_stack([meas.x + ranges[keep] * np.cos(world),
                            meas.y + ranges[keep] * np.sin(world)])


def wall_trajectory(cfg: ScenarioConfig, pts: np.ndarray) -> Trajectory | None:
    """Fit the scan points and offset the curve; None when no usable fit exists.

    A short visible stretch gets a finer control polygon. When the offset
    folds over (a tight concave corner) the polygon is coarsened, which
    rounds the corner, up to three times.
    """
    wf = cfg.wall_follow
    if len(pts) <= wf.degree:
        return None
    span = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
    spacing = min(wf.fit_spacing, span / (wf.degree + 2))
    for _ in range(4):
        ctrl = _thin(pts, spacing)
        if len(ctrl) <= wf.degree:
            return None
        curve = spline.fit_wall(ctrl, wf.degree)
        try:
            traj = spline.offset_trajectory(curve, cfg.reference.wall_offset,
                                            wf.samples, cfg.reference.wall_on_right)
        except ValueError:
            spacing *= 2.0
            continue
        return extend_arc(traj, wf.lookahead)
    return None


def explore_twist(cfg: ScenarioConfig, t: float) -> Twist:
    """Scripted exploration: straight ahead, or a counter-clockwise outward
    spiral whose turn radius grows linearly in time."""
    wf = cfg.wall_follow
    if wf.explore == "straight":
        return Twist(cfg.control.v_r, 0.0)
    radius = wf.spiral_radius0 + wf.spiral_growth * t
    return Twist(cfg.control.v_r, cfg.control.v_r / radius)


def simulate_wall_following(cfg: ScenarioConfig, room: RoomSpec, controller: str,
                            record_spikes: bool = False) -> RunResult:
    dist = cfg.disturbance_config()
    rng = np.random.default_rng(dist.rng_seed)
    lidar_rng = np.random.default_rng([dist.rng_seed, 1])
    state = ControllerState(cfg.controller_config(controller == "snn"), record_spikes)
    pose = Pose(*cfg.plant.start)
    dt = cfg.plant.dt
    wf = cfg.wall_follow
    run_log = RunLog()
    phase = "explore"
    traj = None
    collided = False
    refits = failed_fits = misses = 0
    min_clearance = math.inf
    for k in range(_n_steps(cfg)):
        clearance = room.clearance(pose.x, pose.y)
        min_clearance = min(min_clearance, clearance)
        if clearance < cfg.room.robot_radius:
            collided = True
            log.warning("%s: collision at t=%.2f", controller, k * dt)
            break
        meas = sense(pose, dist, rng)
        br = None
        if phase == "explore":
            angles, ranges = ray_ranges(room, pose)
            ahead = np.abs(angles) <= math.radians(30.0)
            if np.min(ranges[ahead]) < wf.explore_trigger:
                phase = "follow"
        if phase == "follow":
            pts = visible_wall(cfg, room, pose, meas, lidar_rng)
            misses = misses + 1 if len(pts) <= wf.degree else 0
            fresh = wall_trajectory(cfg, pts)
            if fresh is not None:
                traj = fresh
                state.reset_matching()
                refits += 1
            else:
                # keep tracking the previous fit
                failed_fits += 1
        if phase == "follow" and (traj is None or misses >= wf.lost_after):
            # wall lost: arc toward the wall side until a fit succeeds again
            turn = -1.0 if cfg.reference.wall_on_right else 1.0
            u = saturate(Twist(cfg.control.v_r, turn * cfg.control.v_r / wf.seek_radius),
                         cfg.control.omega_max)
        elif phase == "follow" and traj is not None:
            br = control_step(meas, traj, state)
            u = br.u_total
        else:
            u = saturate(explore_twist(cfg, k * dt), cfg.control.omega_max)
        _log_row(run_log, k * dt, pose, meas, br, u, phase)
        pose = step(pose, apply_disturbance(u, dist), dt, cfg.plant.substeps)

    contour = room.offset_contour(cfg.reference.wall_offset)
    xy = np.column_stack([run_log["x"], run_log["y"]])
    cross = distance_to_reference(contour, xy)
    follow = run_log["phase"] == "follow"
    # the approach from the exploration end point is not wall following yet:
    # the scored segment starts when the robot first reaches the contour
    captured = np.flatnonzero(follow & (cross <= wf.capture_distance))
    if len(captured):
        follow[:captured[0]] = False
    run_log.columns["cross_track"] = [float(v) for v in cross]
    run_log.columns["heading_error"] = [float(v) if f else math.nan
                                        for v, f in zip(run_log["e_theta"], follow)]
    m = compute_metrics(run_log, contour, cfg.metrics.position_threshold,
                        cfg.metrics.heading_threshold, mask=follow,
                        collided=collided)
    return RunResult(controller, run_log, m, state, contour,
                     {"refits": refits, "failed_fits": failed_fits,
                      "min_clearance": min_clearance})


def run_case_c(cfg: ScenarioConfig, room: RoomSpec | None = None,
               controllers=CONTROLLERS,
               record_spikes: bool = False) -> dict[str, RunResult]:
    """Wall following in the synthetic room."""
    room = room or room_spec(cfg)
    return {c: simulate_wall_following(cfg, room, c, record_spikes)
            for c in controllers}


def run_scenario(cfg: ScenarioConfig, controllers=CONTROLLERS,
                 record_spikes: bool = False) -> dict[str, RunResult]:
    if cfg.scenario == "a":
        return run_case_a(cfg, controllers, record_spikes)
    if cfg.scenario == "b":
        return run_case_b(cfg, controllers, record_spikes)
    return run_case_c(cfg, None, controllers, record_spikes)
