"""Composite control law: LQR feedback + curvature feedforward + SNN."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lqr, matcher, snn
from .spline import Trajectory
from .vehicle import Pose, Twist, ZERO_TWIST, saturate, wrap_angle


@dataclass(frozen=True)
class Errors:
    e_p: float
    e_theta: float
    x_tilde: np.ndarray


@dataclass(frozen=True)
class ControlBreakdown:
    u_l: Twist
    u_f: Twist
    u_a: Twist
    u_sum: Twist
    u_total: Twist
    match: matcher.MatchResult
    errors: Errors


def compute_errors(measured: Pose, ref: Pose) -> Errors:
    dx = measured.x - ref.x
    dy = measured.y - ref.y
    dth = wrap_angle(measured.theta - ref.theta)
    return Errors(math.hypot(dx, dy), dth, np.array([dx, dy, dth]))


@dataclass(frozen=True)
class ControllerConfig:
    dt: float = 0.05
    weights: lqr.LqrWeights = field(default_factory=lqr.LqrWeights)
    feedforward: matcher.FeedforwardConfig = field(default_factory=matcher.FeedforwardConfig)
    omega_max: float = 1.0
    snn_enabled: bool = True
    n_neurons: int = snn.DEFAULT_N_NEURONS
    lif: snn.LifParams = field(default_factory=snn.LifParams)
    rule_v: snn.PesRule = field(default_factory=snn.PesRule)
    rule_w: snn.PesRule = field(default_factory=snn.PesRule)
    neuron_dt: float = snn.DEFAULT_NEURON_DT
    position_scale: float = 1.0
    seed_v: int = 1
    seed_w: int = 2
    riccati_tol: float = lqr.DEFAULT_TOL
    riccati_max_iter: int = lqr.DEFAULT_MAX_ITER


class ControllerState:
    """Per-vehicle memory carried between control periods."""

    def __init__(self, cfg: ControllerConfig, record_spikes: bool = False):
        self.cfg = cfg
        self.prev_index: int | None = None
        self._p: np.ndarray | None = None
        self._p_heading = 0.0
        self._p_speed: float | None = None
        self.pop_v = snn.init_population(cfg.n_neurons, cfg.seed_v, cfg.lif)
        self.pop_w = snn.init_population(cfg.n_neurons, cfg.seed_w, cfg.lif)
        if record_spikes:
            self.pop_v.raster = []
            self.pop_w.raster = []

    def reset_matching(self) -> None:
        """Forget the previous match, e.g. after the trajectory is replaced."""
        self.prev_index = None

    def gain(self, model: lqr.LinearModel, heading: float, speed: float) -> lqr.LqrGain:
        # the error dynamics rotate with the reference heading, so the last
        # solution rotated into the new frame is an (almost) exact warm start
        p0 = None
        if self._p is not None and self._p_speed == speed:
            rot = lqr.rotation(heading - self._p_heading)
            p0 = rot @ self._p @ rot.T
        g = lqr.solve_dare(model, self.cfg.weights, self.cfg.riccati_tol,
                           self.cfg.riccati_max_iter, p0)
        self._p, self._p_heading, self._p_speed = g.P_ss, heading, speed
        return g


def control_step(measured: Pose, traj: Trajectory, state: ControllerState) -> ControlBreakdown:
    """One control period: match, LQR, feedforward, SNN, sum, saturate."""
    cfg = state.cfg
    ff = cfg.feedforward
    match = matcher.find_match(traj, (measured.x, measured.y), state.prev_index,
                               ff.search_window)
    state.prev_index = match.index
    err = compute_errors(measured, match.ref_pose)

    ref_twist = Twist(ff.v_r, ff.v_r * match.ref_curvature)
    model = lqr.linearize(match.ref_pose, ref_twist, cfg.dt)
    gain = state.gain(model, match.ref_pose.theta, ff.v_r)
    u_l = lqr.feedback(gain, err.x_tilde)
    u_f = matcher.feedforward(match, ff)

    if cfg.snn_enabled:
        a_v, a_w = snn.encode_errors(err.e_p, err.e_theta, cfg.position_scale)
        u_a = snn.adaptive_control(state.pop_v, state.pop_w, err.e_p, err.e_theta,
                                   a_v, a_w, cfg.dt, (cfg.rule_v, cfg.rule_w),
                                   cfg.neuron_dt)
    else:
        u_a = ZERO_TWIST

    u_sum = Twist(u_l.v + u_f.v + u_a.v, u_l.omega + u_f.omega + u_a.omega)
    return ControlBreakdown(u_l, u_f, u_a, u_sum, saturate(u_sum, cfg.omega_max),
                            match, err)
