"""Run logs and tracking metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
import shapely
from scipy.spatial import cKDTree

from ..spline import Trajectory
from ..vehicle import wrap_angle

LOG_COLUMNS = (
    "t", "x", "y", "theta", "x_meas", "y_meas", "theta_meas", "match_index",
    "e_p", "e_theta", "u_l_v", "u_l_omega", "u_f_v", "u_f_omega",
    "u_a_v", "u_a_omega", "u_total_v", "u_total_omega",
    "cross_track", "heading_error", "phase",
)


class RunLog:
    """Column store for per-period records."""

    def __init__(self):
        self.columns: dict[str, list] = {name: [] for name in LOG_COLUMNS}

    def append(self, **row) -> None:
        if row.keys() != self.columns.keys():
            missing = set(self.columns) ^ set(row)
            raise KeyError(f"log row mismatch: {sorted(missing)}")
        for key, value in row.items():
            self.columns[key].append(value)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(LOG_COLUMNS)
            for row in zip(*(self.columns[c] for c in LOG_COLUMNS)):
                out.writerow([_fmt(v) for v in row])


def _fmt(value) -> str:
    # repr of a float is the shortest round-tripping form and ignores locale
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def read_log_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for name in LOG_COLUMNS:
        values = [r[name] for r in rows]
        try:
            out[name] = np.array([float(v) for v in values])
        except ValueError:
            out[name] = np.array(values)
    return out


@dataclass(frozen=True)
class Metrics:
    mae: float
    convergence_time: float
    converged: bool
    path_length: float
    final_e_p: float
    final_e_theta: float
    steps: int
    collided: bool = False

    def as_row(self) -> dict:
        return asdict(self)


def reference_errors(traj: Trajectory, xy: np.ndarray, theta: np.ndarray):
    """Distance to the trajectory polyline and heading error to the nearest sample."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    _, idx = cKDTree(traj.xy).query(xy)
    return distance_to_reference(traj, xy), wrap_angle(np.asarray(theta) - traj.heading[idx])


def distance_to_reference(reference, xy: np.ndarray) -> np.ndarray:
    """Distance to a Trajectory (as the polyline through its samples) or to
    a shapely geometry."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    if isinstance(reference, Trajectory):
        reference = shapely.LineString(reference.xy)
    return shapely.distance(reference, shapely.points(xy))


def convergence_time(t: np.ndarray, e_p: np.ndarray, e_theta: np.ndarray,
                     pos_tol: float, heading_tol: float) -> tuple[float, bool]:
    """Earliest time after which both errors stay under their thresholds.

    Returns ``(inf, False)`` when the final sample violates a threshold.
    """
    ok = (np.abs(e_p) < pos_tol) & (np.abs(e_theta) < heading_tol)
    if len(ok) == 0 or not ok[-1]:
        return math.inf, False
    bad = np.flatnonzero(~ok)
    first = 0 if len(bad) == 0 else bad[-1] + 1
    return float(t[first]), True


def compute_metrics(log, reference, pos_tol: float = 0.05,
                    heading_tol: float = 0.05, mask=None,
                    collided: bool = False) -> Metrics:
    """Summarise a run against its reference path.

    ``mae`` is the mean distance from the true position to the reference
    (a Trajectory or a shapely geometry) over the rows selected by ``mask``.
    Convergence uses the logged true-pose errors.
    """
    t = np.asarray(log["t"], dtype=float)
    if len(t) == 0:
        raise ValueError("empty log")
    xy = np.column_stack([log["x"], log["y"]]).astype(float)
    sel = np.ones(len(t), bool) if mask is None else np.asarray(mask, bool)
    dist = distance_to_reference(reference, xy[sel]) if sel.any() else np.array([math.nan])
    e_p = np.asarray(log["cross_track"], dtype=float)
    e_th = np.asarray(log["heading_error"], dtype=float)
    t_conv, conv = convergence_time(t, e_p, e_th, pos_tol, heading_tol)
    steps = np.diff(xy, axis=0)
    return Metrics(
        mae=float(np.mean(dist)),
        convergence_time=t_conv,
        converged=conv,
        path_length=float(np.sum(np.hypot(steps[:, 0], steps[:, 1]))),
        final_e_p=float(e_p[-1]),
        final_e_theta=float(e_th[-1]),
        steps=len(t),
        collided=collided,
    )


def write_metrics_csv(path, rows: dict[str, Metrics]) -> None:
    """One row per controller: ``controller,<metric fields>``."""
    fields = list(Metrics.__dataclass_fields__)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["controller", *fields])
        for name, m in rows.items():
            d = m.as_row()
            out.writerow([name, *(_fmt(d[f]) for f in fields)])
