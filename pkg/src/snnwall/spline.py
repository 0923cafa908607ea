"""Quasi-uniform B-spline wall fitting and offset reference trajectories.

Sensed wall points are used directly as control points of a clamped
B-spline. The curve is then shifted along its normal to give a trajectory
that keeps a fixed clearance from the wall.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

# speed^2 below this makes the tangent direction meaningless
DEGENERATE_SPEED2 = 1e-12

DEFAULT_DEGREE = 3
DEFAULT_SAMPLES = 500


def make_knots(n_points: int, degree: int) -> np.ndarray:
    """Clamped quasi-uniform knot vector for ``n_points`` control points.

    The first and last ``degree + 1`` knots are 0 and 1, and the interior
    knots are spaced by ``1 / (n - k + 1)`` with ``n = n_points - 1``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if n_points <= degree:
        raise ValueError(
            f"need at least degree+1={degree + 1} points, got {n_points}")
    n = n_points - 1
    span = n - degree + 1
    interior = np.arange(1, n - degree + 1, dtype=float) / span
    return np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])


def _last_span(knots: Sequence[float], i: int) -> bool:
    # closes [t_i, t_{i+1}] when it is the final non-empty span
    return knots[i] < knots[i + 1] and knots[i + 1] == knots[-1]


def basis(i: int, k: int, t: float, knots: Sequence[float]) -> float:
    """Cox-de Boor basis function N_{i,k}(t); 0/0 terms count as zero."""
    if k == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        if t == knots[-1] and _last_span(knots, i):
            return 1.0
        return 0.0
    left = 0.0
    den = knots[i + k] - knots[i]
    if den > 0.0:
        left = (t - knots[i]) / den * basis(i, k - 1, t, knots)
    right = 0.0
    den = knots[i + k + 1] - knots[i + 1]
    if den > 0.0:
        right = (knots[i + k + 1] - t) / den * basis(i + 1, k - 1, t, knots)
    return left + right


def _find_spans(knots: np.ndarray, degree: int, ts: np.ndarray) -> np.ndarray:
    n_ctrl = len(knots) - degree - 1
    spans = np.searchsorted(knots, ts, side="right") - 1
    return np.clip(spans, degree, n_ctrl - 1)


def _nonzero_basis(knots: np.ndarray, degree: int, ts: np.ndarray,
                   spans: np.ndarray) -> np.ndarray:
    """The ``degree + 1`` non-vanishing basis values at each t, shape (m, k+1)."""
    m = len(ts)
    out = np.zeros((m, degree + 1))
    out[:, 0] = 1.0
    left = np.zeros((m, degree + 1))
    right = np.zeros((m, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = ts - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - ts
        saved = np.zeros(m)
        for r in range(j):
            den = right[:, r + 1] + left[:, j - r]
            safe = np.where(den > 0.0, den, 1.0)
            temp = np.where(den > 0.0, out[:, r] / safe, 0.0)
            out[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        out[:, j] = saved
    return out


@dataclass(frozen=True)
class SplineCurve:
    """Clamped B-spline in the plane."""

    degree: int
    control_points: np.ndarray
    knots: np.ndarray

    def __post_init__(self):
        ctrl = np.array(self.control_points, dtype=float)
        knots = np.array(self.knots, dtype=float)
        if ctrl.ndim != 2 or ctrl.shape[1] != 2:
            raise ValueError("control points must have shape (n, 2)")
        if len(knots) != len(ctrl) + self.degree + 1:
            raise ValueError("len(knots) must equal n_points + degree + 1")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        ctrl.setflags(write=False)
        knots.setflags(write=False)
        object.__setattr__(self, "control_points", ctrl)
        object.__setattr__(self, "knots", knots)

    def evaluate(self, ts) -> np.ndarray:
        """Points on the curve for an array of parameters, shape (m, 2)."""
        ts = _check_params(ts)
        spans = _find_spans(self.knots, self.degree, ts)
        values = _nonzero_basis(self.knots, self.degree, ts, spans)
        idx = spans[:, None] - self.degree + np.arange(self.degree + 1)
        return np.einsum("mj,mjd->md", values, self.control_points[idx])

    def derivative(self) -> "SplineCurve":
        """Hodograph: the derivative curve, one degree lower."""
        k = self.degree
        if k < 1:
            raise ValueError("derivative needs degree >= 1")
        p = self.control_points
        t = self.knots
        den = t[k + 1:k + len(p)] - t[1:len(p)]
        diff = p[1:] - p[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(den[:, None] > 0.0, k * diff / den[:, None], 0.0)
        return SplineCurve(k - 1, q, t[1:-1])


def _check_params(ts) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(~np.isfinite(ts)) or np.any(ts < 0.0) or np.any(ts > 1.0):
        raise ValueError("curve parameter must lie in [0, 1]")
    return ts


def evaluate(curve: SplineCurve, t: float) -> np.ndarray:
    """Point P(t) on the curve."""
    return curve.evaluate(t)[0]


def eval_derivatives(curve: SplineCurve, t) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of the curve at t.

    Accepts a scalar or an array of parameters; array input returns arrays
    of shape (m, 2). A degree-1 curve has a zero second derivative.
    """
    if curve.degree < 1:
        raise ValueError("derivatives need degree >= 1")
    scalar = np.ndim(t) == 0
    ts = _check_params(t)
    d1_curve = curve.derivative()
    d1 = d1_curve.evaluate(ts)
    if curve.degree >= 2:
        d2 = d1_curve.derivative().evaluate(ts)
    else:
        d2 = np.zeros_like(d1)
    if scalar:
        return d1[0], d2[0]
    return d1, d2


def signed_curvature(d1, d2):
    """Curvature with sign: positive when the curve turns left."""
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    cross = d1[..., 0] * d2[..., 1] - d2[..., 0] * d1[..., 1]
    speed2 = d1[..., 0] ** 2 + d1[..., 1] ** 2
    ok = speed2 >= DEGENERATE_SPEED2
    safe = np.where(ok, speed2, 1.0)
    kappa = np.where(ok, cross / safe ** 1.5, 0.0)
    return float(kappa) if kappa.ndim == 0 else kappa


def curvature(d1, d2):
    """Unsigned curvature |x'y'' - x''y'| / (x'^2 + y'^2)^(3/2)."""
    return np.abs(signed_curvature(d1, d2))


def fit_wall(points, degree: int = DEFAULT_DEGREE) -> SplineCurve:
    """B-spline whose control points are the ordered wall points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if not np.all(np.isfinite(pts)):
        raise ValueError("wall points must be finite")
    return SplineCurve(degree, pts, make_knots(len(pts), degree))


@dataclass(frozen=True)
class TrajectoryPoint:
    s: float
    position: np.ndarray
    heading: float
    curvature: float


@dataclass(frozen=True)
class Trajectory:
    """Densely sampled reference path.

    Stored column-wise for fast nearest-point search. ``curvature`` is
    signed (positive for left turns).
    """

    s: np.ndarray
    xy: np.ndarray
    heading: np.ndarray
    curvature: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if len(s) < 2:
            raise ValueError("trajectory needs at least 2 points")
        if np.any(np.diff(s) <= 0):
            raise ValueError("trajectory parameters must be strictly increasing")
        xy = np.array(self.xy, dtype=float).reshape(len(s), 2)
        for name, value in (("s", s), ("xy", xy),
                            ("heading", np.array(self.heading, dtype=float)),
                            ("curvature", np.array(self.curvature, dtype=float))):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return len(self.s)

    def __getitem__(self, i: int) -> TrajectoryPoint:
        return TrajectoryPoint(float(self.s[i]), self.xy[i],
                               float(self.heading[i]), float(self.curvature[i]))

    def __iter__(self) -> Iterator[TrajectoryPoint]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_function(cls, fn, dfn, ddfn, t0: float, t1: float,
                      samples: int) -> "Trajectory":
        """Sample an analytic plane curve (x(t), y(t)) and its derivatives."""
        ts = np.linspace(t0, t1, samples)
        xy = np.column_stack(fn(ts))
        d1 = np.column_stack(dfn(ts))
        d2 = np.column_stack(ddfn(ts))
        return cls(ts, xy, np.arctan2(d1[:, 1], d1[:, 0]),
                   signed_curvature(d1, d2))


def offset_trajectory(curve: SplineCurve, d: float,
                      samples: int = DEFAULT_SAMPLES,
                      wall_on_right: bool = True) -> Trajectory:
    """Trajectory at distance ``d`` from the curve, on the robot's side.

    With the wall on the right of the travel direction the path is shifted
    to the left, and vice versa. Raises ValueError when the offset would
    fold over itself (``d * kappa >= 1`` toward the centre of curvature).
    """
    if d < 0:
        raise ValueError("offset distance must be non-negative")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    ts = np.linspace(0.0, 1.0, samples)
    xy = curve.evaluate(ts)
    d1, d2 = eval_derivatives(curve, ts)
    heading = np.arctan2(d1[:, 1], d1[:, 0])
    kappa = signed_curvature(d1, d2)
    shift = d if wall_on_right else -d
    if np.any(shift * kappa >= 1.0):
        raise ValueError("offset distance exceeds the radius of curvature")
    normal = np.column_stack([-np.sin(heading), np.cos(heading)])
    return Trajectory(ts, xy + shift * normal, heading,
                      kappa / (1.0 - shift * kappa))


def read_points_csv(path) -> np.ndarray:
    """Read an ``x,y`` point cloud; a non-numeric first row is a header."""
    rows = []
    with open(Path(path), newline="", encoding="utf-8") as fh:
        for n, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if n == 0:
                    continue
                raise
    return np.array(rows, dtype=float).reshape(-1, 2)
