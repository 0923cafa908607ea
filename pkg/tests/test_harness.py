import math

import numpy as np
import pytest
import shapely
import yaml

from snnwall import cli
from snnwall.harness import scenarios as sc
from snnwall.harness.config import (ConfigError, dump_config,
                                    from_dict, load_config)
from snnwall.harness.metrics import (LOG_COLUMNS, RunLog, compute_metrics,
                                     convergence_time, read_log_csv)
from snnwall.harness.room import (Cylinder, LidarSpec, RoomSpec, default_room,
                                  load_room, ray_ranges, raycast_lidar, save_room)
from snnwall.spline import Trajectory
from snnwall.vehicle import Pose, Twist

from oracles import ray_march


# -- configuration ----------------------------------------------------------

def test_unknown_keys_rejected_at_any_depth():
    with pytest.raises(ConfigError, match="unknown keys"):
        from_dict({"durration": 3.0})
    with pytest.raises(ConfigError, match="snn.lif"):
        from_dict({"snn": {"lif": {"tau": 0.1}}})
    with pytest.raises(ConfigError):
        from_dict({"scenario": "d"})
    with pytest.raises(ConfigError):
        from_dict({"duration": 0.0})
    with pytest.raises(ConfigError):
        from_dict({"wall_follow": {"explore": "zigzag"}})


def test_overlay_only_touches_named_fields():
    base = sc.default_config("b")
    cfg = from_dict({"snn": {"gamma_v": 0.0}, "duration": 5.0}, base)
    assert cfg.snn.gamma_v == 0.0 and cfg.duration == 5.0
    assert cfg.snn.gamma_w == base.snn.gamma_w
    assert cfg.disturbance.sensor_sigma_p == 0.05
    assert cfg.control.Q == base.control.Q


def test_config_round_trip(tmp_path):
    cfg = sc.default_config("c")
    path = tmp_path / "c.yaml"
    dump_config(cfg, path)
    assert load_config(path) == cfg


def test_room_file_resolved_relative_to_config(tmp_path):
    (tmp_path / "rooms").mkdir()
    save_room(default_room(), tmp_path / "rooms" / "r.yaml")
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text("scenario: c\nroom_file: rooms/r.yaml\n", encoding="utf-8")
    cfg = load_config(cfg_path)
    assert load_room(cfg.room_file) == default_room()
    assert sc.room_spec(cfg) == default_room()
    cfg_path.write_text("scenario: c\nroom_file: rooms/missing.yaml\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(cfg_path)


def test_presets():
    a, b, c = (sc.default_config(s) for s in "abc")
    assert a.plant.start == pytest.approx([math.pi / 2, 1.2, math.pi / 2])
    assert a.disturbance.actuator_gain_omega == 0.5 and a.duration == 20.0
    assert (b.disturbance.sensor_sigma_p, b.disturbance.sensor_sigma_theta) == (0.05, 0.1)
    assert b.duration == 35.0
    assert c.reference.wall_offset == 0.18 and c.plant.start[:2] == [2.0, 2.0]
    for cfg in (a, b, c):
        assert (cfg.control.alpha, cfg.control.omega_max) == (0.06, 1.0)
    with pytest.raises(ValueError):
        sc.default_config("z")


# -- room and LiDAR ---------------------------------------------------------

def test_packaged_room_has_one_tangent_cylinder_per_wall():
    room = default_room()
    assert room.side == 4.0
    assert sorted(c.radius for c in room.cylinders) == [0.2, 0.3, 0.4, 0.5]
    for c in room.cylinders:
        x, y = c.center
        gaps = [x - c.radius, y - c.radius, 4 - x - c.radius, 4 - y - c.radius]
        assert min(abs(g) for g in gaps) <= 1e-12
        assert min(abs(x - 2.0), abs(y - 2.0)) <= 1e-12


def test_room_validation_and_round_trip(tmp_path):
    with pytest.raises(ValueError):
        RoomSpec(cylinders=(Cylinder((0.1, 2.0), 0.3),))
    with pytest.raises(ValueError):
        Cylinder((1, 1), 0.0)
    save_room(default_room(), tmp_path / "room.yaml")
    assert load_room(tmp_path / "room.yaml") == default_room()
    data = yaml.safe_load((tmp_path / "room.yaml").read_text())
    data["version"] = 99
    (tmp_path / "room.yaml").write_text(yaml.safe_dump(data))
    with pytest.raises(ValueError):
        load_room(tmp_path / "room.yaml")


def test_empty_room_ray_along_x():
    room = RoomSpec(lidar=LidarSpec(rays=4))
    angles, ranges = ray_ranges(room, Pose(2.0, 2.0, 0.0))
    i = int(np.argmin(np.abs(angles)))
    assert ranges[i] == pytest.approx(2.0, abs=1e-15)
    pts = raycast_lidar(room, Pose(2.0, 2.0, 0.0))
    assert any(np.allclose(p, (4.0, 2.0), atol=1e-12) for p in pts)


def test_ray_toward_cylinder_centre():
    room = RoomSpec(cylinders=(Cylinder((3.5, 2.0), 0.3),), lidar=LidarSpec(rays=8))
    angles, ranges = ray_ranges(room, Pose(1.0, 2.0, 0.0))
    i = int(np.argmin(np.abs(angles)))
    assert ranges[i] == pytest.approx(2.5 - 0.3, abs=1e-12)


def test_outside_pose_rejected_and_max_range_drops_returns():
    room = default_room()
    with pytest.raises(ValueError):
        ray_ranges(room, Pose(4.5, 1.0, 0.0))
    short = RoomSpec(lidar=LidarSpec(rays=36, max_range=1.0))
    assert len(raycast_lidar(short, Pose(2.0, 2.0, 0.0))) == 0


def test_raycast_matches_ray_marcher():
    room = default_room()
    pose = Pose(2.0, 2.0, 0.3)
    angles, ranges = ray_ranges(room, pose)
    assert len(angles) == 360
    for a, r in zip(angles, ranges):
        assert abs(r - ray_march(room, pose, a)) <= 0.01


def test_offset_contour_straight_part():
    ring = default_room().offset_contour(0.18)
    pts = np.asarray(ring.coords)
    bottom = pts[(np.abs(pts[:, 1] - 0.18) < 1e-9)]
    assert len(bottom) >= 2
    assert ring.is_closed
    # every contour point sits 0.18 m from the nearest obstacle
    room = default_room()
    clear = [room.clearance(x, y) for x, y in pts[::17]]
    np.testing.assert_allclose(clear, 0.18, atol=2e-4)


# -- metrics ----------------------------------------------------------------

def _line_traj():
    x = np.linspace(0.0, 10.0, 1001)
    return Trajectory(x, np.column_stack([x, np.zeros_like(x)]), np.zeros_like(x), np.zeros_like(x))


def _log(x, y, e_p=None, e_th=None):
    n = len(x)
    return {"t": 0.05 * np.arange(n), "x": np.asarray(x), "y": np.asarray(y),
            "cross_track": np.zeros(n) if e_p is None else np.asarray(e_p),
            "heading_error": np.zeros(n) if e_th is None else np.asarray(e_th)}


def test_mae_examples():
    x = np.linspace(1.0, 9.0, 50)
    assert compute_metrics(_log(x, np.zeros(50)), _line_traj()).mae == 0.0
    assert compute_metrics(_log(x, np.full(50, 0.1)), _line_traj()).mae == pytest.approx(0.1, abs=1e-12)
    y = np.random.default_rng(0).uniform(-0.3, 0.3, 50)
    m = compute_metrics(_log(x, y), shapely.LineString([(0, 0), (10, 0)]))
    assert m.mae == pytest.approx(np.mean(np.abs(y)), abs=1e-12)
    assert m.path_length == pytest.approx(np.sum(np.hypot(np.diff(x), np.diff(y))), abs=1e-12)


def test_convergence_time():
    t = np.arange(6.0)
    assert convergence_time(t, [1, 1, 0, 0, 0, 0], [0] * 6, 0.5, 0.5) == (2.0, True)
    assert convergence_time(t, [0, 0, 1, 0, 0, 0], [0] * 6, 0.5, 0.5) == (3.0, True)
    assert convergence_time(t, [0] * 6, [0, 0, 0, 0, 0, 1], 0.5, 0.5) == (math.inf, False)
    assert convergence_time(t, [0] * 6, [0] * 6, 0.5, 0.5) == (0.0, True)


def test_mae_invariant_to_reference_refinement():
    # the reference sampling of an analytic path is dense enough that halving it
    # changes the metric by far less than 1 %
    cfg = sc.default_config("b")
    coarse = sc.build_reference(cfg)
    cfg.reference.samples_per_meter *= 2
    fine = sc.build_reference(cfg)
    x = np.linspace(0.0, 30.0, 600)
    y = np.sin(x) + 0.05 * np.cos(3 * x)
    a = compute_metrics(_log(x, y), coarse).mae
    b = compute_metrics(_log(x, y), fine).mae
    assert abs(a - b) <= 0.01 * b


def test_mae_invariant_to_log_subsampling():
    cfg = sc.default_config("a")
    cfg.duration = 10.0
    res = sc.run_case_a(cfg, ("lqr",))["lqr"]
    full = {k: res.log[k] for k in ("t", "x", "y", "cross_track", "heading_error")}
    half = {k: v[::2] for k, v in full.items()}
    a = compute_metrics(full, res.reference).mae
    b = compute_metrics(half, res.reference).mae
    assert abs(a - b) <= 0.01 * a


def test_log_csv_full_precision(tmp_path):
    log = RunLog()
    row = {c: 0.0 for c in LOG_COLUMNS}
    row.update(t=0.1, x=1 / 3, y=math.pi, match_index=7, phase="track")
    log.append(**row)
    with pytest.raises(KeyError):
        log.append(t=0.0)
    log.write_csv(tmp_path / "log.csv")
    back = read_log_csv(tmp_path / "log.csv")
    assert back["x"][0] == 1 / 3 and back["y"][0] == math.pi
    assert back["phase"][0] == "track"


# -- closed loop -------------------------------------------------------------

def _short(scenario, duration):
    cfg = sc.default_config(scenario)
    cfg.duration = duration
    return cfg


def test_reruns_are_byte_identical(tmp_path):
    cfg = _short("b", 4.0)
    for run in ("one", "two"):
        sc.run_scenario(cfg)["snn"].log.write_csv(tmp_path / f"{run}.csv")
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "two.csv").read_bytes()


def test_zero_learning_rate_matches_benchmark(tmp_path):
    cfg = _short("b", 4.0)
    cfg.snn.gamma_v = cfg.snn.gamma_w = 0.0
    res = sc.run_scenario(cfg)
    res["snn"].log.write_csv(tmp_path / "snn.csv")
    res["lqr"].log.write_csv(tmp_path / "lqr.csv")
    assert (tmp_path / "snn.csv").read_bytes() == (tmp_path / "lqr.csv").read_bytes()


def test_paired_runs_share_start_and_noise():
    res = sc.run_scenario(_short("b", 1.0))
    for col in ("x", "y", "theta", "x_meas", "y_meas", "theta_meas"):
        assert res["snn"].log[col][0] == res["lqr"].log[col][0]


def test_fault_free_line_both_converge():
    cfg = sc.default_config("a")
    cfg.disturbance.actuator_gain_omega = 1.0
    res = sc.run_scenario(cfg)
    snn_m, lqr_m = res["snn"].metrics, res["lqr"].metrics
    assert snn_m.converged and lqr_m.converged
    assert snn_m.convergence_time <= lqr_m.convergence_time + 2.0


def test_noise_free_sinusoid_final_error():
    cfg = sc.default_config("b")
    cfg.disturbance.sensor_sigma_p = cfg.disturbance.sensor_sigma_theta = 0.0
    res = sc.run_scenario(cfg, ("snn",))
    assert res["snn"].metrics.final_e_p <= 0.05


def test_extend_arc_continues_the_end_circle():
    r = 0.8
    t = np.linspace(0, 1.0, 101)
    traj = Trajectory(t * r, np.column_stack([r * np.sin(t), r - r * np.cos(t)]),
                      t, np.full_like(t, 1 / r))
    ext = sc.extend_arc(traj, 0.4)
    assert len(ext) > len(traj) and np.all(np.diff(ext.s) > 0)
    tail = ext.xy[len(traj):]
    np.testing.assert_allclose(np.hypot(tail[:, 0], tail[:, 1] - r), r, atol=1e-9)
    arc = np.sum(np.hypot(*np.diff(ext.xy[len(traj) - 1:], axis=0).T))
    assert arc == pytest.approx(0.4, abs=0.01)
    assert sc.extend_arc(traj, 0.0) is traj


def test_wall_fit_from_scan_points():
    cfg = sc.default_config("c")
    assert sc.wall_trajectory(cfg, np.zeros((3, 2))) is None
    x = np.linspace(0.5, 1.5, 40)
    pts = np.column_stack([x, np.zeros_like(x)])
    traj = sc.wall_trajectory(cfg, pts)
    # wall on the right while driving +x: the path runs 0.18 m to the left
    np.testing.assert_allclose(traj.xy[:500, 1], 0.18, atol=1e-12)


def test_exploration_primitives():
    cfg = sc.default_config("c")
    assert sc.explore_twist(cfg, 3.0) == Twist(cfg.control.v_r, 0.0)
    cfg.wall_follow.explore = "spiral"
    u0, u1 = sc.explore_twist(cfg, 0.0), sc.explore_twist(cfg, 10.0)
    assert u0.omega > u1.omega > 0


def test_wall_following_straight_segments():
    cfg = sc.default_config("c")
    room = sc.room_spec(cfg)
    res = sc.run_case_c(cfg, room, ("snn",))["snn"]
    log, d, side = res.log, cfg.reference.wall_offset, room.side
    assert not res.metrics.collided
    x, y = log["x"], log["y"]
    scored = ~np.isnan(log["heading_error"])
    to_wall = np.min([x, y, side - x, side - y], axis=0)
    second_wall = np.sort([x, y, side - x, side - y], axis=0)[1]
    to_cyl = np.min([np.hypot(x - c.center[0], y - c.center[1]) - c.radius
                     for c in room.cylinders], axis=0)
    seg = scored & (second_wall > d + 0.25) & (to_cyl > d + 0.25)
    assert seg.sum() >= 100
    assert np.mean(np.abs(to_wall[seg] - d)) < 0.05


# -- command line -------------------------------------------------------------

def test_cli_run_and_report(tmp_path, capsys):
    cfg_path = tmp_path / "short.yaml"
    cfg_path.write_text("scenario: a\nduration: 2.0\n", encoding="utf-8")
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", "a", "--config", str(cfg_path),
                     "--out", str(out), "--seed", "3", "--dump-spikes"]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"case_a_snn_log.csv", "case_a_lqr_log.csv", "case_a_metrics.csv",
            "case_a_config.yaml", "case_a_snn_spikes_v.csv", "case_a_snn_spikes_w.csv",
            "case_a_paths.png", "case_a_errors.png", "case_a_adaptive.png"} <= names
    saved = load_config(out / "case_a_config.yaml")
    assert saved.duration == 2.0 and saved.disturbance.seed == 3
    assert saved.disturbance.actuator_gain_omega == 0.5
    assert "snn" in capsys.readouterr().out
    (out / "case_a_paths.png").unlink()
    assert cli.main(["report", "--scenario", "a", "--out", str(out)]) == 0
    assert (out / "case_a_paths.png").exists()


def test_cli_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("scenario: a\nsnn: {gama_v: 1.0}\n", encoding="utf-8")
    assert cli.main(["run", "--scenario", "a", "--config", str(bad),
                     "--out", str(tmp_path)]) == 2
    other = tmp_path / "other.yaml"
    other.write_text("scenario: b\n", encoding="utf-8")
    assert cli.main(["run", "--scenario", "a", "--config", str(other),
                     "--out", str(tmp_path)]) == 2
    assert cli.main(["report", "--scenario", "c", "--out", str(tmp_path / "none")]) == 2
    assert "error" in capsys.readouterr().err
