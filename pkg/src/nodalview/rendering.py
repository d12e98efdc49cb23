"""Rendering policies and the window-anchored off-axis frustum.

A rendered image is modelled as the set of window points where each scene
point is drawn. The window is the optical (post-lens) display rectangle and
never moves with the eye; only the camera position does. Under

* ``STATIC`` the camera sits at the nodal point of a fixed reference gaze,
* ``PRESHIFTED`` the static image is slid across the window by the in-plane
  part of the nodal point's displacement,
* ``GAZE_CONTINGENT`` the camera sits at the eye's actual nodal point and
  the frustum is rebuilt against the fixed window.

The camera always follows the head; only eye rotation can be left untracked.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EyeOnWindowPlane, ParallelRay, PointBehindEye
from .geometry import (
    PARALLEL_TOL,
    Rect3,
    ScenePoint,
    as_scene_point,
    unit,
    vec,
    window_coords,
)
from .ocular import BinocularRig, SIDES

MIN_RENDER_DISTANCE_MM = 1.0
MIN_EYE_WINDOW_GAP_MM = 1e-6


class PolicyKind(str, enum.Enum):
    STATIC = "static"
    PRESHIFTED = "preshifted"
    GAZE_CONTINGENT = "gaze_contingent"


@dataclass(frozen=True)
class RenderPolicy:
    kind: PolicyKind
    # head-frame gaze the static image was rendered for
    reference_gaze: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __str__(self):
        return self.kind.value


STATIC = RenderPolicy(PolicyKind.STATIC)
PRESHIFTED = RenderPolicy(PolicyKind.PRESHIFTED)
GAZE_CONTINGENT = RenderPolicy(PolicyKind.GAZE_CONTINGENT)
POLICIES = (STATIC, PRESHIFTED, GAZE_CONTINGENT)


def parse_policy(name, reference_gaze=(0.0, 0.0, 1.0)) -> RenderPolicy:
    if isinstance(name, RenderPolicy):
        return name
    key = str(name).strip().lower().replace("-", "_")
    aliases = {"gc": "gaze_contingent", "gazecontingent": "gaze_contingent", "pre_shifted": "preshifted"}
    key = aliases.get(key, key)
    return RenderPolicy(PolicyKind(key), tuple(float(c) for c in reference_gaze))


Window = Rect3 | Sequence[Rect3]


def eye_window(window: Window, side: str) -> Rect3:
    """Shared window, or the ``side`` entry of a (left, right) pair."""
    if isinstance(window, Rect3):
        return window
    left, right = window
    return left if side == "left" else right


@dataclass(frozen=True, eq=False)
class RenderedPoint:
    window_point: np.ndarray
    uv: tuple[float, float]
    in_bounds: bool
    source: ScenePoint


def _finish(w, window: Rect3, source: ScenePoint) -> RenderedPoint:
    wc = window_coords(w, window, tol=max(1e-6, 1e-12 * float(np.linalg.norm(w))))
    return RenderedPoint(vec(w), (wc.u, wc.v), wc.in_bounds, source)


def project_to_window(p, render_nodal, window: Rect3) -> np.ndarray:
    """Window-plane point on the line from ``render_nodal`` through ``p``."""
    p = as_scene_point(p)
    n = np.asarray(render_nodal, dtype=np.float64)
    normal = window.normal
    if p.ideal:
        d = p.coords
    else:
        d = p.coords - n
        if float(np.linalg.norm(d)) < MIN_RENDER_DISTANCE_MM:
            raise PointBehindEye(f"{p} is within {MIN_RENDER_DISTANCE_MM} mm of the camera")
    denom = float(np.dot(d, normal))
    if abs(denom) <= PARALLEL_TOL * float(np.linalg.norm(d)):
        raise ParallelRay(f"{p} lies in a plane parallel to the window through the camera")
    t = float(np.dot(window.center - n, normal)) / denom
    if t <= 0.0:
        raise PointBehindEye(f"{p} does not project forward onto the window (t={t:g})")
    return vec(n + t * d)


def render_point(p, render_nodal, window: Rect3) -> RenderedPoint:
    p = as_scene_point(p)
    return _finish(project_to_window(p, render_nodal, window), window, p)


def in_plane(v, window: Rect3) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return vec(v - np.dot(v, window.normal) * window.normal)


def reference_nodal(rig: BinocularRig, side: str, policy: RenderPolicy,
                    reference_rig: BinocularRig | None = None) -> np.ndarray:
    if reference_rig is not None:
        return reference_rig.eye(side).nodal_point
    return rig.reference_nodal(side, policy.reference_gaze)


def render_nodal(rig: BinocularRig, side: str, policy: RenderPolicy,
                 reference_rig: BinocularRig | None = None) -> np.ndarray:
    """Camera position the policy uses for one eye."""
    if policy.kind is PolicyKind.GAZE_CONTINGENT:
        return rig.eye(side).nodal_point
    return reference_nodal(rig, side, policy, reference_rig)


def displayed_point(p, rig: BinocularRig, side: str, window: Window, policy: RenderPolicy,
                    reference_rig: BinocularRig | None = None) -> RenderedPoint:
    """Where ``p`` is drawn for one eye of ``rig`` under ``policy``."""
    p = as_scene_point(p)
    win = eye_window(window, side)
    if policy.kind is PolicyKind.GAZE_CONTINGENT:
        return render_point(p, rig.eye(side).nodal_point, win)
    ref = reference_nodal(rig, side, policy, reference_rig)
    w = project_to_window(p, ref, win)
    if policy.kind is PolicyKind.PRESHIFTED:
        w = w + in_plane(rig.eye(side).nodal_point - ref, win)
    return _finish(w, win, p)


def display_image(scene, rig: BinocularRig, window: Window, policy: RenderPolicy,
                  reference_rig: BinocularRig | None = None) -> dict[str, list[RenderedPoint]]:
    """Per-eye images of ``scene``, in input order."""
    pts = [as_scene_point(p) for p in scene]
    return {side: [displayed_point(p, rig, side, window, policy, reference_rig) for p in pts]
            for side in SIDES}


def perceived_direction(p, rig: BinocularRig, side: str, window: Window, policy: RenderPolicy) -> np.ndarray:
    """Direction in which the eye sees the drawn copy of ``p``."""
    w = displayed_point(p, rig, side, window, policy).window_point
    return unit(w - rig.eye(side).nodal_point)


def true_direction(p, rig: BinocularRig, side: str) -> np.ndarray:
    return as_scene_point(p).direction_from(rig.eye(side).nodal_point)


@dataclass(frozen=True, eq=False)
class FrustumParams:
    camera_position: np.ndarray
    near_mm: float
    left: float
    right: float
    bottom: float
    top: float
    window: Rect3

    @property
    def forward(self) -> np.ndarray:
        return vec(-self.window.normal)

    def project(self, p) -> tuple[float, float]:
        """Normalised device (x, y) of a scene point through this frustum."""
        p = as_scene_point(p)
        rel = p.coords if p.ideal else p.coords - self.camera_position
        x = float(np.dot(rel, self.window.right))
        y = float(np.dot(rel, self.window.up))
        z = float(np.dot(rel, self.forward))
        xn = x * self.near_mm / z
        yn = y * self.near_mm / z
        ndc_x = (2.0 * xn - (self.right + self.left)) / (self.right - self.left)
        ndc_y = (2.0 * yn - (self.top + self.bottom)) / (self.top - self.bottom)
        return ndc_x, ndc_y

    def to_dict(self) -> dict:
        return {
            "camera_position": [float(c) for c in self.camera_position],
            "near": self.near_mm,
            "left": self.left,
            "right": self.right,
            "bottom": self.bottom,
            "top": self.top,
        }


def off_axis_frustum(render_nodal, window: Rect3, near_mm: float | None = None) -> FrustumParams:
    """Asymmetric frustum whose near-plane rectangle is the window seen from the camera.

    Camera orientation is fixed to the window's axes; moving the camera only
    skews the frustum. ``near_mm`` defaults to the eye-window distance, so the
    returned extents are the window edges relative to the camera's foot point.
    """
    n = vec(render_nodal)
    e = float(np.dot(n - window.center, window.normal))
    if e < MIN_EYE_WINDOW_GAP_MM:
        raise EyeOnWindowPlane(f"camera is {e:g} mm from the window plane")
    near = e if near_mm is None else float(near_mm)
    if not (0 < near <= e * (1 + 1e-12)):
        raise ValueError(f"near plane {near} must be in (0, {e}]")
    rel = window.center - n
    cx = float(np.dot(rel, window.right))
    cy = float(np.dot(rel, window.up))
    s = near / e
    return FrustumParams(
        n, near,
        (cx - window.half_width) * s, (cx + window.half_width) * s,
        (cy - window.half_height) * s, (cy + window.half_height) * s,
        window,
    )


def apply_vertical_offset(window: Rect3, offset_mm: float) -> Rect3:
    """Move the window itself along its up axis.

    A constant frustum asymmetry is only consistent if the display is moved
    by the same amount, so the offset is expressed on the window and the
    frustum is derived from it like any other.
    """
    return window.translated(window.up * offset_mm)


def probe_points(render_nodal, window: Rect3, count: int = 100, seed: int = 0) -> list[ScenePoint]:
    rng = np.random.default_rng(seed)
    n = np.asarray(render_nodal, dtype=np.float64)
    pts = []
    for _ in range(count):
        u, v = rng.uniform(-1.5, 1.5, size=2)
        w = window.center + u * window.half_width * window.right + v * window.half_height * window.up
        s = rng.uniform(0.2, 3.0)
        pts.append(ScenePoint.finite(n + s * (w - n)))
    return pts


def orientation_invariance_check(render_nodal, window: Rect3, orientation, probes=None) -> float:
    """Largest window-plane shift caused by giving the camera ``orientation``.

    The orientation-parameterised camera expresses each probe in its own
    frame, forms the projective image ray there and maps it back to the
    world before meeting the window. The result should differ from
    :func:`render_point` only by rounding.

    The camera-frame leg runs in ``np.longdouble`` and uses the exact
    inverse of ``orientation`` rather than its transpose (a float64
    rotation is orthogonal only to ~1e-16). Otherwise the round trip alone
    costs ~10 ulp, which at room scale is already ~1e-12 mm and would hide
    the quantity being checked. Where long double is plain float64 the
    check still works, with that larger floor.
    """
    ld = np.longdouble
    r = np.asarray(orientation, dtype=ld)
    n = vec(render_nodal)
    if probes is None:
        probes = probe_points(n, window)
    n_ld = n.astype(ld)
    fwd = -window.normal.astype(ld)
    e = np.dot(window.center.astype(ld) - n_ld, fwd)
    r_inv = _inverse3(r)
    worst = 0.0
    for p in probes:
        p = as_scene_point(p)
        coords = p.coords.astype(ld)
        rel = coords if p.ideal else coords - n_ld
        q = r_inv @ rel  # camera-frame homogeneous image ray
        ray = r @ q
        w = n_ld + (e / np.dot(ray, fwd)) * ray
        ref = render_point(p, n, window).window_point.astype(ld)
        worst = max(worst, float(np.linalg.norm(w - ref)))
    return worst


def _inverse3(m: np.ndarray) -> np.ndarray:
    """Adjugate inverse of a 3x3 matrix, in the input's dtype."""
    c0, c1, c2 = m[:, 0], m[:, 1], m[:, 2]
    rows = np.array([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], dtype=m.dtype)
    return rows / np.dot(c0, rows[0])
