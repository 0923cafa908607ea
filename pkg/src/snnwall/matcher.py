"""Matching-point finder and curvature feedforward."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spline import Trajectory
from .vehicle import Pose, Twist

DEFAULT_WINDOW = 50


@dataclass(frozen=True)
class MatchResult:
    index: int
    ref_pose: Pose
    ref_curvature: float
    distance: float


@dataclass(frozen=True)
class FeedforwardConfig:
    v_r: float = 1.0
    alpha: float = 0.06
    search_window: int = DEFAULT_WINDOW

    def __post_init__(self):
        if not self.v_r > 0:
            raise ValueError("tracking speed must be positive")
        if self.search_window < 1:
            raise ValueError("search window must be >= 1")


def find_match(traj: Trajectory, pos, prev: int | None = None,
               window: int = DEFAULT_WINDOW) -> MatchResult:
    """Nearest trajectory sample to ``pos``.

    With ``prev`` set only indices ``prev .. prev + window`` are searched,
    so progress along the path never goes backwards. ``np.argmin`` returns
    the first minimum, which breaks ties toward the smaller index.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    lo, hi = 0, len(traj)
    if prev is not None:
        lo = min(max(int(prev), 0), len(traj) - 1)
        hi = min(lo + window + 1, len(traj))
    d = traj.xy[lo:hi] - np.asarray(pos, dtype=float)
    d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]
    j = int(np.argmin(d2))
    i = lo + j
    ref = Pose(float(traj.xy[i, 0]), float(traj.xy[i, 1]), float(traj.heading[i]))
    return MatchResult(i, ref, float(traj.curvature[i]), float(np.sqrt(d2[j])))


def feedforward(match: MatchResult, cfg: FeedforwardConfig) -> Twist:
    """u_f = (v_r, alpha * kappa) with kappa signed by the turn direction."""
    return Twist(cfg.v_r, cfg.alpha * match.ref_curvature)
