import math

import numpy as np
import pytest

from nodalview.errors import NegativeVergence, TargetAtEyeCenter, TargetBehindEyes
from nodalview.geometry import Pose, ScenePoint, random_rotation, unit, vec
from nodalview.ocular import (
    EyeState,
    counter_rotate,
    distance_from_vergence,
    fixate,
    gaze_toward,
    make_rig,
    triangulate,
)


def test_default_rig():
    rig = make_rig()
    assert np.allclose(rig.left.center, [-32, 0, 0])
    assert np.allclose(rig.right.nodal_point, [32, 0, 6])


def test_nodal_point_offset():
    e = EyeState(vec(1, 2, 3), unit([1, 1, 0]), 6.0)
    assert np.linalg.norm(e.nodal_point - e.center) == pytest.approx(6.0)


def test_eye_state_validation():
    with pytest.raises(ValueError):
        EyeState(vec(0, 0, 0), vec(0, 0, 2))
    with pytest.raises(ValueError):
        EyeState(vec(0, 0, 0), vec(0, 0, 1), 15.0)
    assert EyeState(vec(0, 0, 0), vec(0, 0, 1), 0.0).nodal_offset_mm == 0.0


def test_fixation_200mm_oracle():
    fx = fixate(make_rig(), (0, 0, 200))
    # vergence = 2 atan(32/200)
    assert fx.vergence_deg == pytest.approx(2 * math.degrees(math.atan(32 / 200)), abs=1e-12)
    assert fx.skew_mm < 1e-12
    nr = fx.rig.right.nodal_point
    assert nr[0] == pytest.approx(32 - 6 * 32 / math.hypot(32, 200), abs=1e-12)
    assert nr[2] == pytest.approx(6 * 200 / math.hypot(32, 200), abs=1e-12)


def test_nodal_point_on_visual_axis():
    rng = np.random.default_rng(4)
    rig = make_rig()
    for _ in range(100):
        t = rng.uniform([-500, -500, 100], [500, 500, 3000])
        fx = fixate(rig, t)
        for e in (fx.rig.left, fx.rig.right):
            to_target = unit(t - e.nodal_point)
            assert np.allclose(to_target, e.gaze, atol=1e-12)


def test_gaze_errors():
    rig = make_rig()
    with pytest.raises(TargetBehindEyes):
        gaze_toward(rig.right, (0, 0, -100))
    with pytest.raises(TargetAtEyeCenter):
        gaze_toward(rig.right, (32, 0, 0.5))
    with pytest.raises(TargetBehindEyes):
        gaze_toward(rig.right, ScenePoint.at_infinity(0, 0, -1))


def test_distance_from_vergence():
    assert distance_from_vergence(0.0) == math.inf
    v = 2 * math.degrees(math.atan(32 / 500))
    assert distance_from_vergence(v) == pytest.approx(500.0)
    with pytest.raises(NegativeVergence):
        distance_from_vergence(-0.1)


def test_triangulate_cases():
    t = triangulate((-32, 0, 0), (32, 0, 500), (32, 0, 0), (-32, 0, 500))
    assert np.allclose(t.point, [0, 0, 500]) and t.skew_mm < 1e-9
    par = triangulate((-32, 0, 0), (0, 0, 1), (32, 0, 0), (0, 0, 1))
    assert par.point is None and par.parallel and not par.divergent
    div = triangulate((-32, 0, 0), (-1, 0, 10), (32, 0, 0), (1, 0, 10))
    assert div.point is None and div.divergent


def test_triangulate_skew_rays():
    t = triangulate((0, 0, 0), (1, 0, 0), (0, 1, 5), (0, 0, 1))
    assert t.skew_mm == pytest.approx(1.0)


def test_fixation_rigid_motion_invariance():
    rng = np.random.default_rng(5)
    target = np.array([40.0, -80.0, 700.0])
    base = fixate(make_rig(), target)
    for _ in range(50):
        pose = Pose(random_rotation(rng), vec(rng.uniform(-1000, 1000, 3)))
        fx = fixate(make_rig(head_pose=pose), pose.apply(target))
        assert fx.vergence_deg == pytest.approx(base.vergence_deg, abs=1e-9)
        assert np.allclose(fx.rig.right.nodal_point, pose.apply(base.rig.right.nodal_point), atol=1e-9)


def test_mirror_symmetry():
    rig = make_rig()
    t = np.array([120.0, 30.0, 400.0])
    fx = fixate(rig, t).rig
    mx = fixate(rig.mirrored(), t * [-1, 1, 1]).rig
    assert np.allclose(mx.left.nodal_point, fx.right.nodal_point * [-1, 1, 1], atol=1e-12)


def test_counter_rotate_keeps_fixation():
    rig = fixate(make_rig(), (0, 0, 1000)).rig
    moved = counter_rotate(rig, (10, 0, 0), (0, 0, 1000))
    for e in (moved.left, moved.right):
        assert np.allclose(unit(np.array([0, 0, 1000.0]) - e.center), e.gaze, atol=1e-12)
