"""Writing run outputs and rendering summary figures.

Figures are static PNGs drawn from the same arrays that go into the CSV
logs, so a report can be regenerated from an output directory alone.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from .. import snn
from .config import ScenarioConfig, dump_config, load_config
from .metrics import read_log_csv, write_metrics_csv
from .room import RoomSpec, save_room

COLORS = {"snn": "tab:blue", "lqr": "tab:orange"}


def log_path(out_dir, scenario: str, controller: str) -> Path:
    return Path(out_dir) / f"case_{scenario}_{controller}_log.csv"


def write_outputs(results: dict, cfg: ScenarioConfig, out_dir, room: RoomSpec | None = None,
                  dump_spikes: bool = False) -> list[Path]:
    """Logs, metrics, resolved config and (case c) the room file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, res in results.items():
        path = log_path(out, cfg.scenario, name)
        res.log.write_csv(path)
        written.append(path)
        if dump_spikes and name == "snn":
            for label, pop in (("v", res.state.pop_v), ("w", res.state.pop_w)):
                spikes = out / f"case_{cfg.scenario}_{name}_spikes_{label}.csv"
                snn.write_raster(spikes, pop.raster or [])
                written.append(spikes)
    metrics = out / f"case_{cfg.scenario}_metrics.csv"
    write_metrics_csv(metrics, {n: r.metrics for n, r in results.items()})
    written.append(metrics)
    config = out / f"case_{cfg.scenario}_config.yaml"
    dump_config(cfg, config)
    written.append(config)
    if room is not None:
        room_file = out / f"case_{cfg.scenario}_room.yaml"
        save_room(room, room_file)
        written.append(room_file)
    return written


def _reference_xy(cfg: ScenarioConfig, room: RoomSpec | None):
    from .scenarios import build_reference
    if cfg.reference.kind == "room":
        ring = room.offset_contour(cfg.reference.wall_offset)
        return np.asarray(ring.coords)
    return build_reference(cfg).xy


def _paths_figure(cfg, logs, room, ref_xy) -> Figure:
    fig = Figure(figsize=(6.0, 6.0) if room is not None else (8.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    if room is not None:
        s = room.side
        ax.plot([0, s, s, 0, 0], [0, 0, s, s, 0], color="k", lw=1.0)
        for c in room.cylinders:
            ax.add_patch(Circle(c.center, c.radius, fill=False, color="k", lw=1.0))
        ax.set_xlim(-0.1, s + 0.1)
        ax.set_ylim(-0.1, s + 0.1)
    ax.plot(ref_xy[:, 0], ref_xy[:, 1], "k--", lw=0.8, label="reference")
    for name, log in logs.items():
        ax.plot(log["x"], log["y"], color=COLORS.get(name), lw=1.2, label=name.upper())
    ax.plot(*cfg.plant.start[:2], "o", color="tab:red", ms=4)
    if room is None:
        # the reference runs well past the robot; frame the driven part
        x = np.concatenate([log["x"] for log in logs.values()])
        keep = (ref_xy[:, 0] >= x.min() - 0.5) & (ref_xy[:, 0] <= x.max() + 0.5)
        ax.lines[0].set_data(ref_xy[keep, 0], ref_xy[keep, 1])
        ax.relim()
        ax.autoscale_view()
    ax.set_aspect("equal", adjustable="box" if room is not None else "datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def _errors_figure(logs, pos_tol, heading_tol) -> Figure:
    fig = Figure(figsize=(8.0, 5.0))
    ax_p, ax_t = fig.add_subplot(2, 1, 1), fig.add_subplot(2, 1, 2)
    for name, log in logs.items():
        ax_p.plot(log["t"], log["cross_track"], color=COLORS.get(name), lw=1.0, label=name.upper())
        ax_t.plot(log["t"], log["heading_error"], color=COLORS.get(name), lw=1.0)
    ax_p.axhline(pos_tol, color="grey", ls=":", lw=0.8)
    for sign in (-1, 1):
        ax_t.axhline(sign * heading_tol, color="grey", ls=":", lw=0.8)
    ax_p.set_ylabel("cross-track [m]")
    ax_t.set_ylabel("heading error [rad]")
    ax_t.set_xlabel("t [s]")
    ax_p.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    return fig


def _adaptive_figure(log) -> Figure:
    fig = Figure(figsize=(8.0, 4.0))
    ax_w, ax_v = fig.add_subplot(2, 1, 1), fig.add_subplot(2, 1, 2)
    ax_w.plot(log["t"], log["u_a_omega"], color=COLORS["snn"], lw=1.0)
    ax_v.plot(log["t"], log["u_a_v"], color=COLORS["snn"], lw=1.0)
    ax_w.set_ylabel("u_a omega [rad/s]")
    ax_v.set_ylabel("u_a v [m/s]")
    ax_v.set_xlabel("t [s]")
    fig.tight_layout()
    return fig


def render_figures(cfg: ScenarioConfig, logs: dict, out_dir,
                   room: RoomSpec | None = None) -> list[Path]:
    """PNG figures next to the CSVs: paths, errors and (if present) u_a."""
    out = Path(out_dir)
    prefix = f"case_{cfg.scenario}"
    ref_xy = _reference_xy(cfg, room)
    figures = {
        f"{prefix}_paths.png": _paths_figure(cfg, logs, room, ref_xy),
        f"{prefix}_errors.png": _errors_figure(logs, cfg.metrics.position_threshold,
                                               cfg.metrics.heading_threshold),
    }
    if "snn" in logs:
        figures[f"{prefix}_adaptive.png"] = _adaptive_figure(logs["snn"])
    written = []
    for name, fig in figures.items():
        fig.savefig(out / name, dpi=120)
        written.append(out / name)
    return written


def report_from_dir(out_dir, scenario: str) -> list[Path]:
    """Re-render the figures of a finished run from its CSV and YAML files."""
    from .room import load_room
    out = Path(out_dir)
    cfg = load_config(out / f"case_{scenario}_config.yaml")
    logs = {}
    for name in ("snn", "lqr"):
        path = log_path(out, scenario, name)
        if path.exists():
            logs[name] = read_log_csv(path)
    if not logs:
        raise FileNotFoundError(f"no case {scenario} logs in {out}")
    room_file = out / f"case_{scenario}_room.yaml"
    room = load_room(room_file) if room_file.exists() else None
    return render_figures(cfg, logs, out, room)


def format_metrics(results: dict) -> str:
    """Plain-text summary table for the terminal."""
    lines = [f"{'controller':<10} {'mae[m]':>9} {'t_conv[s]':>10} {'path[m]':>8} "
             f"{'e_p end':>8} {'e_th end':>9} {'collided':>8}"]
    for name, r in results.items():
        m = r.metrics
        conv = f"{m.convergence_time:.2f}" if math.isfinite(m.convergence_time) else "never"
        lines.append(f"{name:<10} {m.mae:>9.4f} {conv:>10} {m.path_length:>8.2f} "
                     f"{m.final_e_p:>8.4f} {m.final_e_theta:>9.4f} {str(m.collided):>8}")
    return "\n".join(lines)
