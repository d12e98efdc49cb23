"""Rotating-eye model: centres of rotation, nodal points, fixation and vergence.

The eye turns about its centre of rotation C while light passes through the
nodal point N, which sits ``nodal_offset_mm`` in front of C along the gaze.
Rotating the eye therefore translates N; that translation is the root of every
distortion measured in :mod:`nodalview.metrics`.

Eye torsion is not modelled: no function here takes or exposes a roll angle,
so two eyes with the same centre and gaze are indistinguishable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NegativeVergence, TargetAtEyeCenter, TargetBehindEyes
from .geometry import (
    IDENTITY,
    Pose,
    ScenePoint,
    Z_AXIS,
    angle_between,
    as_scene_point,
    is_unit,
    unit,
    vec,
)

DEFAULT_IPD_MM = 64.0
DEFAULT_NODAL_OFFSET_MM = 6.0
MAX_NODAL_OFFSET_MM = 15.0
MIN_TARGET_DISTANCE_MM = 1.0
# |u x v| below this is treated as parallel when triangulating
PARALLEL_SINE = 1e-12

SIDES = ("left", "right")


@dataclass(frozen=True, eq=False)
class EyeState:
    center: np.ndarray
    gaze: np.ndarray
    nodal_offset_mm: float = DEFAULT_NODAL_OFFSET_MM

    def __post_init__(self):
        object.__setattr__(self, "center", vec(self.center))
        g = vec(self.gaze)
        if not is_unit(g, 1e-9):
            raise ValueError(f"gaze must be a unit vector, got norm {np.linalg.norm(g)}")
        object.__setattr__(self, "gaze", unit(g))
        if not (0.0 <= self.nodal_offset_mm < MAX_NODAL_OFFSET_MM):
            raise ValueError(f"nodal offset {self.nodal_offset_mm} mm outside [0, {MAX_NODAL_OFFSET_MM})")

    @property
    def nodal_point(self) -> np.ndarray:
        return nodal_point(self)

    def with_gaze(self, gaze) -> "EyeState":
        return replace(self, gaze=unit(gaze))


def nodal_point(eye: EyeState) -> np.ndarray:
    return vec(eye.center + eye.nodal_offset_mm * eye.gaze)


@dataclass(frozen=True, eq=False)
class BinocularRig:
    left: EyeState
    right: EyeState
    ipd_mm: float = DEFAULT_IPD_MM
    head_pose: Pose = IDENTITY

    def eye(self, side: str) -> EyeState:
        if side not in SIDES:
            raise ValueError(f"unknown eye {side!r}")
        return self.left if side == "left" else self.right

    def with_eye(self, side: str, eye: EyeState) -> "BinocularRig":
        return replace(self, **{side: eye})

    @property
    def nodal_points(self) -> tuple[np.ndarray, np.ndarray]:
        return self.left.nodal_point, self.right.nodal_point

    @property
    def forward(self) -> np.ndarray:
        return self.head_pose.forward

    def reference_gaze(self, head_gaze=Z_AXIS) -> np.ndarray:
        """World-space direction of a gaze given in the head frame."""
        return unit(self.head_pose.apply_dir(head_gaze))

    def reference_nodal(self, side: str, head_gaze=Z_AXIS) -> np.ndarray:
        e = self.eye(side)
        return vec(e.center + e.nodal_offset_mm * self.reference_gaze(head_gaze))

    def at_reference(self, head_gaze=Z_AXIS) -> "BinocularRig":
        g = self.reference_gaze(head_gaze)
        return replace(self, left=self.left.with_gaze(g), right=self.right.with_gaze(g))

    def moved(self, translation) -> "BinocularRig":
        """Translate the head (and both eyes with it); gazes unchanged."""
        t = np.asarray(translation, dtype=np.float64)
        return replace(
            self,
            left=replace(self.left, center=self.left.center + t),
            right=replace(self.right, center=self.right.center + t),
            head_pose=self.head_pose.translated(t),
        )

    def mirrored(self) -> "BinocularRig":
        """Reflect in the x=0 plane; the left eye becomes the right and vice versa."""
        m = np.array([-1.0, 1.0, 1.0])

        def flip(e: EyeState) -> EyeState:
            return replace(e, center=e.center * m, gaze=e.gaze * m)

        if not np.allclose(self.head_pose.rotation, np.eye(3)):
            raise NotImplementedError("mirroring is only defined for an unrotated head")
        return BinocularRig(flip(self.right), flip(self.left), self.ipd_mm,
                            Pose(np.eye(3), self.head_pose.translation * m))


def make_rig(ipd_mm: float = DEFAULT_IPD_MM, nodal_offset_mm: float = DEFAULT_NODAL_OFFSET_MM,
             head_pose: Pose = IDENTITY) -> BinocularRig:
    """Rig at the reference pose: eyes at (+-ipd/2, 0, 0), both looking along +z."""
    if ipd_mm <= 0:
        raise ValueError("ipd must be positive")
    g = head_pose.forward
    left = EyeState(head_pose.apply((-ipd_mm / 2.0, 0.0, 0.0)), g, nodal_offset_mm)
    right = EyeState(head_pose.apply((ipd_mm / 2.0, 0.0, 0.0)), g, nodal_offset_mm)
    return BinocularRig(left, right, ipd_mm, head_pose)


def gaze_toward(eye: EyeState, target, forward=Z_AXIS) -> np.ndarray:
    """Gaze that puts ``target`` on the eye's visual axis.

    The nodal point lies on the line through C along the gaze, so aiming
    the gaze from C straight at the target is already exact.
    """
    target = as_scene_point(target)
    if target.ideal:
        if float(np.dot(target.coords, forward)) <= 0.0:
            raise TargetBehindEyes(f"ideal target {target} points away from the viewer")
        return target.coords
    v = target.coords - eye.center
    dist = float(np.linalg.norm(v))
    if dist < MIN_TARGET_DISTANCE_MM:
        raise TargetAtEyeCenter(f"target {target} is {dist:g} mm from the eye centre")
    if float(np.dot(v, forward)) <= 0.0:
        raise TargetBehindEyes(f"target {target} is behind the eye")
    return unit(v)


@dataclass(frozen=True, eq=False)
class FixationResult:
    rig: BinocularRig
    vergence_deg: float
    skew_mm: float


def fixate(rig: BinocularRig, target) -> FixationResult:
    fwd = rig.forward
    gl = gaze_toward(rig.left, target, fwd)
    gr = gaze_toward(rig.right, target, fwd)
    posed = replace(rig, left=rig.left.with_gaze(gl), right=rig.right.with_gaze(gr))
    tri = triangulate(posed.left.center, gl, posed.right.center, gr)
    return FixationResult(posed, angle_between(gl, gr), tri.skew_mm)


def fixate_eye(rig: BinocularRig, side: str, target) -> BinocularRig:
    e = rig.eye(side)
    return rig.with_eye(side, e.with_gaze(gaze_toward(e, target, rig.forward)))


def distance_from_vergence(vergence_deg: float, ipd_mm: float = DEFAULT_IPD_MM) -> float:
    """Distance implied by a symmetric vergence angle; ``math.inf`` at 0 deg."""
    if vergence_deg < 0:
        raise NegativeVergence(f"vergence {vergence_deg} deg: visual axes diverge")
    if vergence_deg >= 180:
        raise ValueError("vergence must be below 180 deg")
    if vergence_deg == 0:
        return math.inf
    return (ipd_mm / 2.0) / math.tan(math.radians(vergence_deg) / 2.0)


@dataclass(frozen=True, eq=False)
class Triangulation:
    """Closest approach of two forward rays.

    ``point`` is None when the rays are parallel (content at infinity) or
    diverge; ``divergent`` separates the two cases.
    """

    point: np.ndarray | None
    skew_mm: float
    divergent: bool = False
    parallel: bool = False


def triangulate(origin_a, dir_a, origin_b, dir_b) -> Triangulation:
    a = np.asarray(origin_a, dtype=np.float64)
    b = np.asarray(origin_b, dtype=np.float64)
    u = unit(dir_a)
    v = unit(dir_b)
    n = np.cross(u, v)
    nn = float(np.dot(n, n))
    ab = b - a
    if math.sqrt(nn) < PARALLEL_SINE:
        skew = float(np.linalg.norm(ab - np.dot(ab, u) * u))
        return Triangulation(None, skew, divergent=False, parallel=True)
    s = float(np.dot(np.cross(ab, v), n)) / nn
    t = float(np.dot(np.cross(ab, u), n)) / nn
    pa = a + s * u
    pb = b + t * v
    skew = float(np.linalg.norm(pa - pb))
    if s <= 0.0 or t <= 0.0:
        return Triangulation(None, skew, divergent=True)
    return Triangulation(vec((pa + pb) / 2.0), skew)


def perceived_point(rig: BinocularRig, dir_left, dir_right) -> Triangulation:
    """Where two seen directions, anchored at the rig's actual nodal points, meet."""
    nl, nr = rig.nodal_points
    return triangulate(nl, dir_left, nr, dir_right)


def counter_rotate(rig: BinocularRig, head_translation, fixation) -> BinocularRig:
    """Translate the head while both eyes hold ``fixation`` (vestibulo-ocular reflex)."""
    return fixate(rig.moved(head_translation), fixation).rig


def mirror_point(p) -> ScenePoint:
    return as_scene_point(p).mirrored()
