"""Discretized LQR about a moving reference point.

The plant is linearized about the matched reference pose, discretized with
a forward-Euler step, and the steady-state gain comes from iterating the
discrete Riccati recursion to a fixed point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .vehicle import Pose, Twist, wrap_angle

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class NonConvergence(RuntimeError):
    """Riccati iteration hit its iteration cap (unstabilizable model?)."""


@dataclass(frozen=True)
class LinearModel:
    A_k: np.ndarray
    B_k: np.ndarray
    dt: float


@dataclass(frozen=True)
class LqrWeights:
    Q: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0, 0.5]))
    R: np.ndarray = field(default_factory=lambda: np.diag([0.1, 0.1]))
    # terminal weight; unused for the infinite-horizon gain
    Q_f: np.ndarray | None = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float, ndmin=2)
        R = np.array(self.R, dtype=float, ndmin=2)
        if not np.allclose(Q, Q.T) or np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise ValueError("Q must be symmetric positive semi-definite")
        if not np.allclose(R, R.T) or np.min(np.linalg.eigvalsh(R)) <= 0:
            raise ValueError("R must be symmetric positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if self.Q_f is not None:
            object.__setattr__(self, "Q_f", np.array(self.Q_f, dtype=float, ndmin=2))


@dataclass(frozen=True)
class LqrGain:
    K_ss: np.ndarray
    P_ss: np.ndarray
    iterations: int
    residual: float


def linearize(ref_pose: Pose, ref_twist: Twist, dt: float) -> LinearModel:
    """Error dynamics about the reference, discretized by one Euler step.

    The angular-velocity column of B carries an extra ``dt`` factor on its
    position rows; it is kept as written for the controller model.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    v, th = ref_twist.v, ref_pose.theta
    if not (math.isfinite(v) and math.isfinite(ref_twist.omega)):
        raise ValueError("non-finite reference twist")
    s, c = math.sin(th), math.cos(th)
    A = np.array([[0.0, 0.0, -v * s],
                  [0.0, 0.0, v * c],
                  [0.0, 0.0, 0.0]])
    B = np.array([[c, -v * s * dt],
                  [s, v * c * dt],
                  [0.0, 1.0]])
    return LinearModel(dt * A + np.eye(3), dt * B, dt)


def riccati_step(P: np.ndarray, A: np.ndarray, B: np.ndarray,
                 Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """One application of the Riccati recursion, symmetrized."""
    BtP = B.T @ P
    gain_term = np.linalg.solve(R + BtP @ B, BtP @ A)
    nxt = Q + A.T @ P @ A - (A.T @ P @ B) @ gain_term
    return 0.5 * (nxt + nxt.T)


def gain_from_p(P: np.ndarray, A: np.ndarray, B: np.ndarray,
                R: np.ndarray) -> np.ndarray:
    BtP = B.T @ P
    return np.linalg.solve(R + BtP @ B, BtP @ A)


def solve_dare(model: LinearModel, w: LqrWeights, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER,
               p0: np.ndarray | None = None) -> LqrGain:
    """Iterate the Riccati recursion until the max-abs change is <= tol.

    Starts from ``p0`` when given (warm start), otherwise from Q.
    """
    A = np.atleast_2d(model.A_k)
    B = np.atleast_2d(model.B_k)
    Q, R = w.Q, w.R
    P = np.array(Q if p0 is None else p0, dtype=float)
    change = math.inf
    for it in range(1, max_iter + 1):
        nxt = riccati_step(P, A, B, Q, R)
        change = float(np.max(np.abs(nxt - P)))
        P = nxt
        if not math.isfinite(change):
            break
        if change <= tol:
            return LqrGain(gain_from_p(P, A, B, R), P, it, change)
    raise NonConvergence(
        f"Riccati iteration did not converge in {max_iter} steps "
        f"(last change {change:.3g})")


def feedback(gain: LqrGain, x_tilde) -> Twist:
    """u_l = -K x_tilde with the heading error wrapped first."""
    x = np.array(x_tilde, dtype=float)
    x[2] = wrap_angle(float(x[2]))
    u = -(gain.K_ss @ x)
    return Twist(float(u[0]), float(u[1]))


def rotation(theta: float) -> np.ndarray:
    """Block rotation acting on (x, y) and leaving theta alone."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
