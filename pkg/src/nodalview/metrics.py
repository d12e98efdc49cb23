"""The fourteen gaze-contingent distortion metrics, m1 through m14.

Each metric compares what an eye sees on the display under a rendering
policy with what it would see of the real scene, and returns a
:class:`DistortionRecord`. Angles are in degrees, lengths in millimetres.
Names listed in ``error_fields`` are the quantities that vanish when the
image is geometrically correct; under ``GAZE_CONTINGENT`` they are all zero.

Where a metric needs the eyes to look at something, "fixating" a point means
aiming the visual axis at the true point, except in m1, m2 and m13, which
model the eye landing on the drawn dot instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateTrajectory
from .geometry import (
    ScenePoint,
    angle_between,
    as_scene_point,
    azimuth_deg,
    direction_from_angles,
    elevation_deg,
    unit,
    vec,
)
from .ocular import (
    SIDES,
    BinocularRig,
    counter_rotate,
    distance_from_vergence,
    fixate,
    gaze_toward,
    make_rig,
    perceived_point,
    triangulate,
)
from .rendering import (
    GAZE_CONTINGENT,
    PRESHIFTED,
    STATIC,
    PolicyKind,
    RenderPolicy,
    Window,
    displayed_point,
    eye_window,
    perceived_direction,
    render_point,
    true_direction,
)

METRIC_IDS = tuple(f"m{i}" for i in range(1, 15))
FIXED_POINT_MAX_ITER = 200
FIXED_POINT_TOL_DEG = 1e-13


@dataclass
class DistortionRecord:
    metric_id: str
    policy: str
    values: dict = field(default_factory=dict)
    error_fields: tuple = ()
    flags: dict = field(default_factory=dict)

    def errors(self) -> dict[str, float]:
        """Largest magnitude of each error field (lists are reduced with max |x|)."""
        out = {}
        for name in self.error_fields:
            v = self.values[name]
            if isinstance(v, (list, tuple)):
                out[name] = max((abs(x) for x in v), default=0.0)
            else:
                out[name] = abs(v)
        return out

    def max_error(self) -> float:
        return max(self.errors().values(), default=0.0)

    def prefixed(self, prefix: str) -> "DistortionRecord":
        return DistortionRecord(
            self.metric_id, self.policy,
            {f"{prefix}.{k}": v for k, v in self.values.items()},
            tuple(f"{prefix}.{k}" for k in self.error_fields),
            {f"{prefix}.{k}": v for k, v in self.flags.items()},
        )

    def to_dict(self) -> dict:
        return {
            "metric_id": self.metric_id,
            "policy": self.policy,
            "values": dict(self.values),
            "error_fields": list(self.error_fields),
            "flags": dict(self.flags),
        }


def merge_records(metric_id: str, parts: dict[str, DistortionRecord]) -> DistortionRecord:
    """Fold per-eye (or per-mode) records into one, keys prefixed by part name."""
    merged = DistortionRecord(metric_id, "")
    policies = []
    for prefix, rec in parts.items():
        p = rec.prefixed(prefix)
        merged.values.update(p.values)
        merged.error_fields += p.error_fields
        merged.flags.update(p.flags)
        policies.append(rec.policy)
    merged.policy = policies[0] if len(set(policies)) == 1 else ",".join(policies)
    return merged


@dataclass(frozen=True, eq=False)
class Trajectory:
    times_s: tuple
    points: tuple

    def __post_init__(self):
        pts = tuple(as_scene_point(p) for p in self.points)
        times = tuple(float(t) for t in self.times_s)
        if len(pts) < 2:
            raise DegenerateTrajectory("a trajectory needs at least two samples")
        if len(times) != len(pts):
            raise DegenerateTrajectory("times and points differ in length")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DegenerateTrajectory("sample times must be strictly increasing")
        if any(p.ideal for p in pts):
            raise DegenerateTrajectory("trajectory samples must be finite points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "times_s", times)

    @classmethod
    def uniform(cls, points, dt_s: float = 0.1, t0: float = 0.0) -> "Trajectory":
        return cls(tuple(t0 + i * dt_s for i in range(len(points))), tuple(points))

    @property
    def intervals(self) -> list[float]:
        return [b - a for a, b in zip(self.times_s, self.times_s[1:])]


# -- shared machinery --------------------------------------------------------

def _posed(rig: BinocularRig, fixation) -> BinocularRig:
    return rig if fixation is None else fixate(rig, fixation).rig


def _head_az(rig: BinocularRig, d) -> float:
    return azimuth_deg(d, rig.head_pose.right, rig.head_pose.forward)


def _head_el(rig: BinocularRig, d) -> float:
    return elevation_deg(d, rig.head_pose.up)


def fixate_displayed(p, rig: BinocularRig, side: str, window: Window, policy: RenderPolicy) -> BinocularRig:
    """Turn one eye until its visual axis passes through the drawn copy of ``p``.

    Under PRESHIFTED and GAZE_CONTINGENT the drawing moves with the eye, so
    this is a fixed point; the map contracts by roughly nodal offset over
    viewing distance and converges in a handful of steps.
    """
    eye = rig.eye(side)
    g = gaze_toward(eye, p, rig.forward)
    for _ in range(FIXED_POINT_MAX_ITER):
        current = rig.with_eye(side, eye.with_gaze(g))
        w = displayed_point(p, current, side, window, policy).window_point
        g_new = unit(w - eye.center)
        if angle_between(g, g_new) < FIXED_POINT_TOL_DEG:
            g = g_new
            break
        g = g_new
    return rig.with_eye(side, eye.with_gaze(g))


def _policy_name(policy: RenderPolicy) -> str:
    return policy.kind.value


# -- m1 ----------------------------------------------------------------------

def m1_fixated_direction(target, rig: BinocularRig, window: Window, policy: RenderPolicy,
                         side: str = "right") -> DistortionRecord:
    """Saccade to a displayed target: landing error and shortfall of the final rotation."""
    target = as_scene_point(target)
    eye = rig.eye(side)
    ref_g = rig.reference_gaze(policy.reference_gaze)
    planned = gaze_toward(eye, target, rig.forward)
    landed = rig.with_eye(side, eye.with_gaze(planned))
    dot = displayed_point(target, landed, side, window, policy).window_point
    landing_error = angle_between(planned, dot - landed.eye(side).nodal_point)
    final = fixate_displayed(target, landed, side, window, policy).eye(side).gaze
    planned_rot = angle_between(ref_g, planned)
    final_rot = angle_between(ref_g, final)
    return DistortionRecord(
        "m1", _policy_name(policy),
        {
            "planned_rotation_deg": planned_rot,
            "landing_error_deg": landing_error,
            "final_rotation_deg": final_rot,
            "rotation_deficit_deg": planned_rot - final_rot,
            "final_gaze_error_deg": angle_between(planned, final),
        },
        ("landing_error_deg", "rotation_deficit_deg", "final_gaze_error_deg"),
    )


# -- m2 ----------------------------------------------------------------------

def m2_vergence(target, rig: BinocularRig, window: Window, policy: RenderPolicy) -> DistortionRecord:
    """Vergence when both eyes land on their drawn dots, and the distance it implies.

    Distances come from the symmetric vergence relation, so for off-median
    targets they are vergence-specified distances rather than ranges.
    """
    target = as_scene_point(target)
    correct = fixate(rig, target)
    actual = rig
    for side in SIDES:
        actual = fixate_displayed(target, actual, side, window, policy)
    gl, gr = actual.left.gaze, actual.right.gaze
    tri = triangulate(actual.left.center, gl, actual.right.center, gr)
    v_actual = angle_between(gl, gr)
    true_d = distance_from_vergence(correct.vergence_deg, rig.ipd_mm)
    perceived = math.inf if tri.divergent else distance_from_vergence(v_actual, rig.ipd_mm)
    return DistortionRecord(
        "m2", _policy_name(policy),
        {
            "vergence_correct_deg": correct.vergence_deg,
            "vergence_actual_deg": v_actual,
            "vergence_error_deg": v_actual - correct.vergence_deg,
            "true_distance_mm": true_d,
            "perceived_distance_mm": perceived,
            "distance_error_mm": perceived - true_d,
            "ar_zero_disparity_distance_mm": perceived,
            "skew_mm": tri.skew_mm,
        },
        ("vergence_error_deg", "distance_error_mm"),
        {"divergent": tri.divergent},
    )


# -- m3 ----------------------------------------------------------------------

def m3_peripheral_direction(peripheral, fixation, rig: BinocularRig, window: Window,
                            policy: RenderPolicy, side: str = "right") -> DistortionRecord:
    """Seen vs true direction of a non-fixated point (the tilted horizon)."""
    p = as_scene_point(peripheral)
    posed = _posed(rig, fixation)
    n = posed.eye(side).nodal_point
    shown = displayed_point(p, posed, side, window, policy).window_point
    correct = render_point(p, n, eye_window(window, side)).window_point
    seen = unit(shown - n)
    true = true_direction(p, posed, side)
    return DistortionRecord(
        "m3", _policy_name(policy),
        {
            "direction_error_deg": angle_between(seen, true),
            "azimuth_error_deg": _head_az(posed, seen) - _head_az(posed, true),
            "elevation_error_deg": _head_el(posed, seen) - _head_el(posed, true),
            "window_displacement_mm": float(np.linalg.norm(shown - correct)),
        },
        ("direction_error_deg", "azimuth_error_deg", "elevation_error_deg", "window_displacement_mm"),
    )


# -- m4 ----------------------------------------------------------------------

def _disparity(rig: BinocularRig, dirs: dict) -> float:
    """Absolute horizontal disparity relative to the visual axes."""
    return sum(
        sign * (_head_az(rig, dirs[side]) - _head_az(rig, rig.eye(side).gaze))
        for side, sign in (("left", 1.0), ("right", -1.0))
    )


def m4_nonfixated_binocular(point, fixation, rig: BinocularRig, window: Window,
                            policy: RenderPolicy) -> DistortionRecord:
    p = as_scene_point(point)
    posed = _posed(rig, fixation)
    seen = {s: perceived_direction(p, posed, s, window, policy) for s in SIDES}
    true = {s: true_direction(p, posed, s) for s in SIDES}
    d_true = _disparity(posed, true)
    d_seen = _disparity(posed, seen)
    tri_seen = perceived_point(posed, seen["left"], seen["right"])
    tri_true = perceived_point(posed, true["left"], true["right"])
    return DistortionRecord(
        "m4", _policy_name(policy),
        {
            "disparity_correct_deg": d_true,
            "disparity_actual_deg": d_seen,
            "disparity_error_deg": d_seen - d_true,
        },
        ("disparity_error_deg",),
        {"divergent": tri_seen.divergent, "divergent_true": tri_true.divergent},
    )


# -- m5 ----------------------------------------------------------------------

def m5_relative_angle(p1, p2, rig: BinocularRig, window: Window, policy: RenderPolicy,
                      side: str = "right", fixation=None,
                      p1_physical: bool = False, p2_physical: bool = False) -> DistortionRecord:
    """Angle between two points as seen by one eye.

    A point tagged physical is a real object and is seen along its true
    direction whatever the display does.
    """
    p1 = as_scene_point(p1)
    p2 = as_scene_point(p2)
    posed = _posed(rig, p1 if fixation is None else fixation)

    def seen(p, physical):
        if physical:
            return true_direction(p, posed, side)
        return perceived_direction(p, posed, side, window, policy)

    a_true = angle_between(true_direction(p1, posed, side), true_direction(p2, posed, side))
    a_seen = angle_between(seen(p1, p1_physical), seen(p2, p2_physical))
    return DistortionRecord(
        "m5", _policy_name(policy),
        {"angle_true_deg": a_true, "angle_perceived_deg": a_seen, "error_deg": a_seen - a_true},
        ("error_deg",),
        {"p1_physical": p1_physical, "p2_physical": p2_physical},
    )


# -- m6 ----------------------------------------------------------------------

def m6_relative_disparity(p1, p2, rig: BinocularRig, window: Window, policy: RenderPolicy,
                          fixation=None) -> DistortionRecord:
    """Signed horizontal separation of two points, left eye minus right eye."""
    p1 = as_scene_point(p1)
    p2 = as_scene_point(p2)
    posed = _posed(rig, p1 if fixation is None else fixation)

    def separation(side, direction):
        return _head_az(posed, direction(p1, side)) - _head_az(posed, direction(p2, side))

    def true_dir(p, side):
        return true_direction(p, posed, side)

    def seen_dir(p, side):
        return perceived_direction(p, posed, side, window, policy)

    sep_true = {s: separation(s, true_dir) for s in SIDES}
    sep_seen = {s: separation(s, seen_dir) for s in SIDES}
    rel_true = sep_true["left"] - sep_true["right"]
    rel_seen = sep_seen["left"] - sep_seen["right"]
    return DistortionRecord(
        "m6", _policy_name(policy),
        {
            "relative_disparity_true_deg": rel_true,
            "relative_disparity_perceived_deg": rel_seen,
            "error_deg": rel_seen - rel_true,
            "left_separation_error_deg": sep_seen["left"] - sep_true["left"],
            "right_separation_error_deg": sep_seen["right"] - sep_true["right"],
        },
        ("error_deg", "left_separation_error_deg", "right_separation_error_deg"),
    )


# -- m7 ----------------------------------------------------------------------

def m7_preshift_residual(near, far, rig: BinocularRig, window: Window, fixation=None,
                         side: str = "right", policy: RenderPolicy = PRESHIFTED) -> DistortionRecord:
    """What pre-shifting leaves behind: exact at infinity, wrong up close."""
    posed = _posed(rig, fixation)

    def err(p):
        p = as_scene_point(p)
        return angle_between(perceived_direction(p, posed, side, window, policy),
                             true_direction(p, posed, side))

    return DistortionRecord(
        "m7", _policy_name(policy),
        {"far_error_deg": err(far), "near_error_deg": err(near)},
        ("far_error_deg", "near_error_deg"),
    )


# -- m8 ----------------------------------------------------------------------

def nodal_shift(distance_mm: float, ipd_mm: float, nodal_offset_mm: float = 6.0) -> float:
    """Inward nodal-point shift of each eye when converged at ``distance_mm``."""
    return nodal_offset_mm * math.sin(math.atan((ipd_mm / 2.0) / distance_mm))


def m8_gaze_disparity(fixation_distance_mm: float, ipd_mm: float, window: Window,
                      mode: str = "exact", policy: RenderPolicy = STATIC,
                      nodal_offset_mm: float = 6.0) -> DistortionRecord:
    """Depth error from rendering for the unconverged inter-nodal distance.

    ``paper_approx`` rounds the per-eye shift to whole millimetres, ignores
    the backward nodal shift and treats the display as optical infinity;
    ``exact`` runs the full geometry against ``window``.
    """
    if mode not in ("exact", "paper_approx"):
        raise ValueError(f"unknown m8 mode {mode!r}")
    d = float(fixation_distance_mm)
    half = ipd_mm / 2.0
    s = nodal_shift(d, ipd_mm, nodal_offset_mm)
    if mode == "paper_approx":
        s = float(round(s))
    corrected = policy.kind is PolicyKind.GAZE_CONTINGENT
    s_err = 0.0 if corrected else s
    angle_err = math.degrees(math.atan(half / d) - math.atan((half - s_err) / d))
    values = {"internodal_reduction_mm": 2.0 * s, "per_eye_angle_error_deg": angle_err}
    error_fields = ["per_eye_angle_error_deg", "depth_displacement_mm"]
    flags = {}
    target = vec(0.0, 0.0, d)
    if mode == "paper_approx":
        tri = triangulate((-(half - s_err), 0, 0), target - vec(-half, 0, 0),
                          (half - s_err, 0, 0), target - vec(half, 0, 0))
    else:
        rig = make_rig(ipd_mm, nodal_offset_mm)
        posed = fixate(rig, target).rig
        values["internodal_reduction_mm"] = ipd_mm - float(posed.right.nodal_point[0] - posed.left.nodal_point[0])
        seen = {sd: perceived_direction(target, posed, sd, window, policy) for sd in SIDES}
        tri = perceived_point(posed, seen["left"], seen["right"])
        values["direction_error_deg"] = max(
            angle_between(seen[sd], true_direction(target, posed, sd)) for sd in SIDES)
        error_fields.append("direction_error_deg")
    if tri.point is None:
        perceived = math.inf
    else:
        perceived = float(tri.point[2])
    flags["divergent"] = tri.divergent
    values["perceived_distance_mm"] = perceived
    values["depth_displacement_mm"] = d - perceived
    values["skew_mm"] = tri.skew_mm
    return DistortionRecord("m8", _policy_name(policy), values, tuple(error_fields), flags)


# -- m9 ----------------------------------------------------------------------

def m9_parallax_deficit(point, gaze_rotation_deg, rig: BinocularRig, window: Window,
                        policy: RenderPolicy = STATIC, side: str = "right") -> DistortionRecord:
    """Missing micro-motion parallax when the eye turns to (azimuth, elevation).

    Compares how far the point's true direction moves as the nodal point
    travels with how far its drawn dot appears to move.
    """
    p = as_scene_point(point)
    az, el = gaze_rotation_deg
    start = rig.at_reference(policy.reference_gaze)
    end_gaze = rig.head_pose.apply_dir(direction_from_angles(az, el))
    end = start.with_eye(side, start.eye(side).with_gaze(end_gaze))
    n0 = start.eye(side).nodal_point
    n1 = end.eye(side).nodal_point
    expected = angle_between(p.direction_from(n0), p.direction_from(n1))
    w0 = displayed_point(p, start, side, window, policy).window_point
    w1 = displayed_point(p, end, side, window, policy).window_point
    actual = angle_between(w0 - n0, w1 - n1)
    return DistortionRecord(
        "m9", _policy_name(policy),
        {"expected_shift_deg": expected, "actual_shift_deg": actual, "deficit_deg": expected - actual},
        ("deficit_deg",),
    )


# -- m10 / m11 ---------------------------------------------------------------

def _direction_error(p, rig, side, window, policy) -> float:
    return angle_between(perceived_direction(p, rig, side, window, policy), true_direction(p, rig, side))


def _move_window(window: Window, t) -> Window:
    if hasattr(window, "translated"):
        return window.translated(t)
    return tuple(w.translated(t) for w in window)


def m10_m11_head_eye_residual(point, head_translation, fixation, rig: BinocularRig, window: Window,
                              policy: RenderPolicy = STATIC, mode: str = "head_then_eye",
                              side: str = "right", window_follows_head: bool = False) -> DistortionRecord:
    """Direction error of ``point`` after the head moves.

    ``head_then_eye`` keeps the eye-in-head rotation (m10); ``vor`` re-aims
    the eyes at ``fixation`` as the head moves (m11). The render camera
    follows the head in both.
    """
    if mode not in ("head_then_eye", "vor"):
        raise ValueError(f"unknown mode {mode!r}")
    p = as_scene_point(point)
    posed = fixate(rig, fixation).rig
    before = _direction_error(p, posed, side, window, policy)
    t = np.asarray(head_translation, dtype=np.float64)
    if mode == "head_then_eye":
        moved = posed.moved(t)
    else:
        moved = counter_rotate(posed, t, fixation)
    win = _move_window(window, t) if window_follows_head else window
    after = _direction_error(p, moved, side, win, policy)
    return DistortionRecord(
        "m10" if mode == "head_then_eye" else "m11", _policy_name(policy),
        {"pre_move_error_deg": before, "residual_error_deg": after, "error_drift_deg": after - before},
        ("pre_move_error_deg", "residual_error_deg", "error_drift_deg"),
    )


# -- m12 ---------------------------------------------------------------------

DEFAULT_GAZE_SWEEP = tuple((az, el) for az in (-20.0, 0.0, 20.0) for el in (-30.0, -15.0, 0.0, 15.0))


def m12_cue_conflict(sample_points: Sequence, gaze_sweep: Sequence, rig: BinocularRig, window: Window,
                     policy: RenderPolicy = STATIC) -> DistortionRecord:
    """RMS and max of m9 parallax deficits over points x gaze x eyes.

    A geometric stand-in for eye-movement cue conflict, not a discomfort score.
    """
    deficits = [
        m9_parallax_deficit(p, g, rig, window, policy, side).values["deficit_deg"]
        for side in SIDES for p in sample_points for g in gaze_sweep
    ]
    if not deficits:
        raise ValueError("m12 needs at least one sample point and one gaze")
    arr = np.asarray(deficits)
    return DistortionRecord(
        "m12", _policy_name(policy),
        {"rms_deficit_deg": float(np.sqrt(np.mean(arr ** 2))),
         "max_deficit_deg": float(np.max(np.abs(arr))),
         "n_samples": len(deficits)},
        ("rms_deficit_deg", "max_deficit_deg"),
    )


# -- m13 ---------------------------------------------------------------------

def m13_tracked_angular_motion(traj: Trajectory, rig: BinocularRig, window: Window,
                               policy: RenderPolicy = STATIC, side: str = "right",
                               tracking: bool = True) -> DistortionRecord:
    """Angular speed of a moving object, true vs as conveyed by the display.

    With ``tracking`` the eye pursues the drawn object and the speed is the
    eye's rotation rate; without it the eye rests at the reference gaze and
    the speed is that of the image across the retina.
    """
    if tracking:
        true_dirs = [gaze_toward(rig.eye(side), p, rig.forward) for p in traj.points]
        seen_dirs = [fixate_displayed(p, rig, side, window, policy).eye(side).gaze for p in traj.points]
    else:
        rest = rig.at_reference(policy.reference_gaze)
        true_dirs = [true_direction(p, rest, side) for p in traj.points]
        seen_dirs = [perceived_direction(p, rest, side, window, policy) for p in traj.points]
    dts = traj.intervals
    true_v = [angle_between(a, b) / dt for a, b, dt in zip(true_dirs, true_dirs[1:], dts)]
    seen_v = [angle_between(a, b) / dt for a, b, dt in zip(seen_dirs, seen_dirs[1:], dts)]
    return DistortionRecord(
        "m13", _policy_name(policy),
        {
            "true_angular_velocity_deg_s": true_v,
            "displayed_angular_velocity_deg_s": seen_v,
            "error_deg_s": [s - t for s, t in zip(seen_v, true_v)],
        },
        ("error_deg_s",),
        {"tracking": tracking},
    )


# -- m14 ---------------------------------------------------------------------

def m14_tracked_3d_motion(traj: Trajectory, rig: BinocularRig, window: Window,
                          policy: RenderPolicy = STATIC, tracking: bool = True) -> DistortionRecord:
    """Binocularly triangulated position of a moving object, sample by sample."""
    positions, errors = [], []
    divergent = False
    rest = rig.at_reference(policy.reference_gaze)
    for p in traj.points:
        posed = fixate(rig, p).rig if tracking else rest
        seen = {s: perceived_direction(p, posed, s, window, policy) for s in SIDES}
        tri = perceived_point(posed, seen["left"], seen["right"])
        if tri.point is None:
            divergent = divergent or tri.divergent
            positions.append([math.inf] * 3)
            errors.append(math.inf)
        else:
            positions.append([float(c) for c in tri.point])
            errors.append(float(np.linalg.norm(tri.point - p.coords)))
    arr = np.asarray(errors)
    return DistortionRecord(
        "m14", _policy_name(policy),
        {
            "perceived_position": positions,
            "position_error_mm": errors,
            "max_error_mm": float(np.max(arr)),
            "rms_error_mm": float(np.sqrt(np.mean(arr ** 2))),
        },
        ("position_error_mm", "max_error_mm", "rms_error_mm"),
        {"divergent": divergent, "tracking": tracking},
    )


__all__ = [
    "METRIC_IDS", "DistortionRecord", "Trajectory", "merge_records", "fixate_displayed", "nodal_shift",
    "m1_fixated_direction", "m2_vergence", "m3_peripheral_direction", "m4_nonfixated_binocular",
    "m5_relative_angle", "m6_relative_disparity", "m7_preshift_residual", "m8_gaze_disparity",
    "m9_parallax_deficit", "m10_m11_head_eye_residual", "m12_cue_conflict",
    "m13_tracked_angular_motion", "m14_tracked_3d_motion", "DEFAULT_GAZE_SWEEP",
    "STATIC", "PRESHIFTED", "GAZE_CONTINGENT", "ScenePoint",
]
