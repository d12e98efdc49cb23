import numpy as np
import pytest

from nodalview.errors import EyeOnWindowPlane, PointBehindEye
from nodalview.geometry import Rect3, ScenePoint, angle_between, random_rotation, vec
from nodalview.ocular import fixate, make_rig
from nodalview.rendering import (
    GAZE_CONTINGENT,
    POLICIES,
    PRESHIFTED,
    STATIC,
    apply_vertical_offset,
    displayed_point,
    off_axis_frustum,
    orientation_invariance_check,
    parse_policy,
    perceived_direction,
    render_point,
    true_direction,
)

WALL = Rect3.facing((0, 0, 1500), 3000, 2400)


def test_render_point_similar_triangles():
    # camera at the static right nodal point (32, 0, 6); target 3000 mm straight ahead of it
    w = render_point((32, 0, 3000), (32, 0, 6), WALL).window_point
    assert np.allclose(w, [32, 0, 1500])
    w = render_point((0, 0, 3000), (32, 0, 6), WALL).window_point
    # x = 32 - 32 * (1500 - 6) / (3000 - 6)
    assert w[0] == pytest.approx(32 - 32 * 1494 / 2994)


def test_render_point_ideal():
    w = render_point(ScenePoint.at_infinity(0, 0, 1), (32, 0, 6), WALL)
    assert np.allclose(w.window_point, [32, 0, 1500])
    assert w.in_bounds


def test_out_of_bounds_points_are_kept():
    r = render_point((5000, 0, 3000), (0, 0, 6), WALL)
    assert not r.in_bounds and abs(r.uv[0]) > 1


def test_point_behind_camera():
    with pytest.raises(PointBehindEye):
        render_point((0, 0, -100), (0, 0, 6), WALL)


def test_gaze_contingent_matches_true_direction():
    rng = np.random.default_rng(7)
    rig = make_rig()
    for _ in range(100):
        fix = rng.uniform([-300, -300, 300], [300, 300, 4000])
        p = rng.uniform([-500, -500, 200], [500, 500, 6000])
        posed = fixate(rig, fix).rig
        for side in ("left", "right"):
            seen = perceived_direction(p, posed, side, WALL, GAZE_CONTINGENT)
            assert angle_between(seen, true_direction(p, posed, side)) < 1e-9


def test_static_uses_reference_nodal():
    posed = fixate(make_rig(), (0, 0, 200)).rig
    w = displayed_point((0, 0, 200), posed, "right", WALL, STATIC).window_point
    expected = render_point((0, 0, 200), (32, 0, 6), WALL).window_point
    assert np.allclose(w, expected)


def test_preshift_is_exact_at_infinity():
    posed = fixate(make_rig(), (200, -300, 800)).rig
    p = ScenePoint.at_infinity(0, 0, 1)
    for side in ("left", "right"):
        seen = perceived_direction(p, posed, side, WALL, PRESHIFTED)
        assert angle_between(seen, [0, 0, 1]) < 1e-12


def test_parse_policy_aliases():
    assert parse_policy("gc") == GAZE_CONTINGENT
    assert parse_policy("Pre-Shifted") == PRESHIFTED
    with pytest.raises(ValueError):
        parse_policy("foveated")


def test_symmetric_frustum():
    fr = off_axis_frustum((0, 0, 0), Rect3.facing((0, 0, 1000), 400, 300))
    assert (fr.left, fr.right, fr.bottom, fr.top, fr.near_mm) == (-200, 200, -150, 150, 1000)


def test_off_axis_frustum_oracle_and_corners():
    win = Rect3.facing((0, 0, 1500), 3000, 2400)
    cam = vec(33.0, -4.0, 5.9)
    fr = off_axis_frustum(cam, win, near_mm=10.0)
    e = 1500 - 5.9
    assert fr.left == pytest.approx((-1500 - 33) * 10 / e)
    assert fr.top == pytest.approx((1200 + 4) * 10 / e)
    for corner, expect in zip(win.corners(), [(-1, -1), (1, -1), (1, 1), (-1, 1)]):
        assert np.allclose(fr.project(corner), expect, atol=1e-12)


def test_frustum_camera_on_window_plane():
    with pytest.raises(EyeOnWindowPlane):
        off_axis_frustum((0, 0, 1500), WALL)


def test_vertical_offset_moves_window():
    w = apply_vertical_offset(WALL, 100.0)
    fr = off_axis_frustum((0, 0, 0), w)
    assert fr.top - 1200 == pytest.approx(100.0)
    assert fr.bottom + 1200 == pytest.approx(100.0)


def test_orientation_invariance_random():
    rng = np.random.default_rng(8)
    for _ in range(20):
        dev = orientation_invariance_check((30, -10, 5), WALL, random_rotation(rng))
        assert dev <= 1e-12


def test_orientation_identity_is_render_point():
    assert orientation_invariance_check((0, 0, 6), WALL, np.eye(3)) <= 1e-12


def test_window_fixed_point_all_policies():
    rng = np.random.default_rng(9)
    rig = make_rig()
    for _ in range(50):
        posed = fixate(rig, rng.uniform([-300, -300, 300], [300, 300, 3000])).rig
        u, v = rng.uniform(-1, 1, 2)
        p = WALL.center + u * 1500 * WALL.right + v * 1200 * WALL.up
        for pol in POLICIES:
            for side in ("left", "right"):
                w = displayed_point(p, posed, side, WALL, pol).window_point
                if pol is PRESHIFTED:
                    continue  # pre-shifting slides even window-plane points; see test_metrics
                assert np.linalg.norm(w - p) < 1e-9


def test_mirror_symmetry_of_rendering():
    rig = make_rig()
    p = np.array([150.0, -200.0, 900.0])
    fix = np.array([-80.0, 40.0, 1200.0])
    a = fixate(rig, fix).rig
    b = fixate(rig.mirrored(), fix * [-1, 1, 1]).rig
    for pol in POLICIES:
        wa = displayed_point(p, a, "right", WALL, pol).window_point
        wb = displayed_point(p * [-1, 1, 1], b, "left", WALL, pol).window_point
        assert np.allclose(wa * [-1, 1, 1], wb, atol=1e-9)
