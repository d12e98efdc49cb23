import math

import numpy as np
import pytest

from nodalview import metrics as M
from nodalview.geometry import Rect3, ScenePoint
from nodalview.ocular import make_rig
from nodalview.rendering import GAZE_CONTINGENT, POLICIES, PRESHIFTED, STATIC
from nodalview.scenario import load_preset

WALL = Rect3.facing((0, 0, 1500), 3000, 2400)
HORIZON = ScenePoint.at_infinity(0, 0, 1)
GROUND = (0, -1800, 2000)


@pytest.fixture
def rig():
    return make_rig()


def test_record_helpers():
    rec = M.DistortionRecord("m3", "static", {"a": -0.5, "b": 2.0, "c": [1.0, -3.0]}, ("a", "c"))
    assert rec.max_error() == 3.0
    merged = M.merge_records("m3", {"left": rec, "right": rec})
    assert set(merged.values) == {"left.a", "left.b", "left.c", "right.a", "right.b", "right.c"}
    assert merged.policy == "static"


def test_m1_oracle_far_target(rig):
    # target 3000 mm straight ahead of the cyclopean point, wall at 1500 mm
    r = M.m1_fixated_direction((0, 0, 3000), rig, WALL, STATIC).values
    assert r["planned_rotation_deg"] == pytest.approx(math.degrees(math.atan(32 / 3000)), abs=1e-9)
    assert r["rotation_deficit_deg"] == pytest.approx(0.0012246, abs=2e-6)
    assert r["final_gaze_error_deg"] > 0


def test_m2_vergence_oracles(rig):
    far = M.m2_vergence((0, 0, 3000), rig, WALL, STATIC).values
    near = M.m2_vergence((0, 0, 200), rig, WALL, STATIC).values
    assert far["perceived_distance_mm"] == pytest.approx(3006.02, abs=0.05)
    assert near["perceived_distance_mm"] == pytest.approx(194.78, abs=0.05)
    assert far["true_distance_mm"] == pytest.approx(3000.0)


@pytest.mark.parametrize("D", [200, 500, 1000, 2000, 5000])
def test_m2_sign_law(rig, D):
    win = Rect3.facing((0, 0, D), 1e5, 1e5)
    for d in (100, 150, 200, 350, 500, 1000, 2000, 5000):
        v = M.m2_vergence((0, 0, d), rig, win, STATIC).values
        err = v["perceived_distance_mm"] - v["true_distance_mm"]
        if d == D:
            assert abs(err) < 1e-6
        else:
            assert np.sign(err) == np.sign(d - D)


def test_m3_cave_horizon(rig):
    v = M.m3_peripheral_direction(HORIZON, GROUND, rig, WALL, STATIC).values
    expected_disp = 6 * math.sin(math.atan(1800 / 2000))
    assert v["window_displacement_mm"] == pytest.approx(expected_disp, abs=0.01)
    assert v["direction_error_deg"] == pytest.approx(0.153786, abs=1e-5)
    # the horizon is drawn too high when looking down: positive elevation error
    assert v["elevation_error_deg"] > 0
    pre = M.m3_peripheral_direction(HORIZON, GROUND, rig, WALL, PRESHIFTED)
    assert pre.max_error() < 1e-12


def test_m3_decreases_with_display_distance(rig):
    errs = []
    for D in (300, 1000, 3000, 10000):
        win = Rect3.facing((0, 0, D), 1e5, 1e5)
        errs.append(M.m3_peripheral_direction(HORIZON, GROUND, rig, win, STATIC).values["direction_error_deg"])
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_m4_horizon_divergent(rig):
    rec = M.m4_nonfixated_binocular(HORIZON, GROUND, rig, WALL, STATIC)
    assert rec.flags["divergent"]
    assert abs(rec.values["disparity_error_deg"]) > 0


def test_m5_physical_vs_virtual(rig):
    virt = M.m5_relative_angle((0, 0, 2000), (150, -300, 500), rig, WALL, STATIC)
    phys = M.m5_relative_angle((0, 0, 2000), (150, -300, 500), rig, WALL, STATIC, p2_physical=True)
    assert virt.values["angle_true_deg"] == phys.values["angle_true_deg"]
    assert phys.values["error_deg"] != virt.values["error_deg"]


def test_m6_infinity_display():
    sc = load_preset("infinity_display")
    rec = M.m6_relative_disparity((0, 0, 200), HORIZON, sc.build_rig(), sc.windows(), STATIC)
    assert rec.values["error_deg"] == pytest.approx(0.5525, abs=1e-3)


def test_m7_dichotomy(rig):
    rec = M.m7_preshift_residual((0, -300, 500), HORIZON, rig, WALL, GROUND).values
    assert rec["far_error_deg"] < 1e-12
    assert rec["near_error_deg"] == pytest.approx(0.393, abs=1e-3)


def test_nodal_shift_closed_form():
    assert M.nodal_shift(200, 64) == pytest.approx(6 * math.sin(math.atan(32 / 200)))


def test_m8_paper_approx_closed_forms():
    win = load_preset("infinity_display").windows()
    v = M.m8_gaze_disparity(200, 64, win, "paper_approx").values
    assert v["internodal_reduction_mm"] == 2.0
    assert v["per_eye_angle_error_deg"] == pytest.approx(math.degrees(math.atan(32 / 200) - math.atan(31 / 200)))
    assert v["depth_displacement_mm"] == pytest.approx(200 * 2 * 1 / 64, abs=1e-9)


def test_m8_exact_values():
    win = load_preset("infinity_display").windows()
    v = M.m8_gaze_disparity(200, 64, win, "exact").values
    assert v["internodal_reduction_mm"] == pytest.approx(2 * 6 * math.sin(math.atan(32 / 200)), abs=1e-9)
    assert 0.26 <= v["per_eye_angle_error_deg"] <= 0.27
    # perceived nearer than the target
    assert 5.8 <= v["depth_displacement_mm"] <= 6.0


def test_m8_gaze_contingent_zero():
    win = load_preset("infinity_display").windows()
    for mode in ("exact", "paper_approx"):
        assert M.m8_gaze_disparity(200, 64, win, mode, GAZE_CONTINGENT).max_error() < 1e-9


def test_m8_sweep_matches_closed_form():
    win = Rect3.facing((0, 0, 1e6), 1e8, 1e8)
    for d in (150, 300, 1000, 5000):
        v = M.m8_gaze_disparity(d, 64, win, "exact").values
        assert v["internodal_reduction_mm"] == pytest.approx(2 * 6 * math.sin(math.atan(32 / d)), abs=1e-9)


def test_m9_horizon_deficit(rig):
    v = M.m9_parallax_deficit(HORIZON, (0, -42.0), rig, WALL, STATIC).values
    # an ideal point shows no parallax at all; Static draws motion where none exists
    assert v["expected_shift_deg"] == 0.0
    assert v["deficit_deg"] < 0
    assert M.m9_parallax_deficit(HORIZON, (0, -42.0), rig, WALL, PRESHIFTED).max_error() < 1e-12


def test_m10_m11(rig):
    m10 = M.m10_m11_head_eye_residual(HORIZON, (0, 0, 100), GROUND, rig, WALL, STATIC, "head_then_eye")
    m11 = M.m10_m11_head_eye_residual(HORIZON, (10, 0, 0), GROUND, rig, WALL, STATIC, "vor")
    assert m10.metric_id == "m10" and m11.metric_id == "m11"
    assert m10.values["residual_error_deg"] == pytest.approx(0.164805, abs=1e-5)
    assert m11.values["residual_error_deg"] == pytest.approx(0.153795, abs=1e-5)
    with pytest.raises(ValueError):
        M.m10_m11_head_eye_residual(HORIZON, (0, 0, 1), GROUND, rig, WALL, STATIC, "sideways")


def test_m12_counts(rig):
    rec = M.m12_cue_conflict([HORIZON, (0, -300, 500)], M.DEFAULT_GAZE_SWEEP, rig, WALL, STATIC)
    assert rec.values["n_samples"] == 2 * 2 * len(M.DEFAULT_GAZE_SWEEP)
    assert rec.values["max_deficit_deg"] >= rec.values["rms_deficit_deg"] > 0


def test_trajectory_validation():
    with pytest.raises(M.DegenerateTrajectory):
        M.Trajectory((0.0,), ((0, 0, 1),))
    with pytest.raises(M.DegenerateTrajectory):
        M.Trajectory((0.0, 0.0), ((0, 0, 1), (0, 0, 2)))
    t = M.Trajectory.uniform([(0, 0, 1), (0, 0, 2), (0, 0, 3)], 0.5)
    assert t.intervals == [0.5, 0.5]


def test_m13_m14(rig):
    traj = M.Trajectory.uniform([(x, 0, 500) for x in (-100, -50, 0, 50, 100)], 0.1)
    m13 = M.m13_tracked_angular_motion(traj, rig, WALL, STATIC)
    assert m13.max_error() > 0
    assert M.m13_tracked_angular_motion(traj, rig, WALL, GAZE_CONTINGENT).max_error() < 1e-9
    m14 = M.m14_tracked_3d_motion(traj, rig, WALL, STATIC)
    assert len(m14.values["position_error_mm"]) == 5
    assert M.m14_tracked_3d_motion(traj, rig, WALL, GAZE_CONTINGENT).max_error() < 1e-9


def test_m14_equals_m8_on_axis():
    win = load_preset("infinity_display").windows()
    rig = make_rig()
    depths = (200, 300, 400)
    traj = M.Trajectory.uniform([(0, 0, d) for d in depths], 0.1)
    errs = M.m14_tracked_3d_motion(traj, rig, win, STATIC).values["position_error_mm"]
    for d, e in zip(depths, errs):
        v = M.m8_gaze_disparity(d, 64, win, "exact").values
        assert e == pytest.approx(abs(v["depth_displacement_mm"]), abs=1e-6)


def test_metrics_mirror_symmetric(rig):
    p = np.array([200.0, -300.0, 800.0])
    fix = np.array([-100.0, -500.0, 1500.0])
    for pol in POLICIES:
        a = M.m3_peripheral_direction(p, fix, rig, WALL, pol, "right").values
        b = M.m3_peripheral_direction(p * [-1, 1, 1], fix * [-1, 1, 1], rig, WALL, pol, "left").values
        assert a["direction_error_deg"] == pytest.approx(b["direction_error_deg"], abs=1e-12)
        assert a["azimuth_error_deg"] == pytest.approx(-b["azimuth_error_deg"], abs=1e-12)
