"""Vector, ray and plane primitives.

Conventions used throughout the package: lengths in millimetres, reported
angles in degrees. Head frame has its origin midway between the two eye
centres of rotation, +x to the right, +y up, +z forward toward the display.
Points and directions are plain ``float64`` arrays of shape ``(3,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindOrigin, OffPlane, ParallelRay

UNIT_TOL = 1e-12
PARALLEL_TOL = 1e-9

X_AXIS = np.array([1.0, 0.0, 0.0])
Y_AXIS = np.array([0.0, 1.0, 0.0])
Z_AXIS = np.array([0.0, 0.0, 1.0])


def vec(x, y=None, z=None) -> np.ndarray:
    """Build a read-only float64 3-vector from three numbers or a sequence."""
    if y is None:
        arr = np.array(x, dtype=np.float64).reshape(3)
    else:
        arr = np.array([x, y, z], dtype=np.float64)
    arr.setflags(write=False)
    return arr


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm == 0.0 or not math.isfinite(norm):
        raise ValueError(f"cannot normalise vector {v!r}")
    return vec(v / norm)


def is_unit(v, tol: float = UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


def angle_between(a, b) -> float:
    """Unsigned angle between two directions in degrees.

    Uses ``2*atan2(|a-b|, |a+b|)`` on the normalised inputs, which keeps full
    relative precision for nearly parallel and nearly antiparallel pairs
    (``acos`` of the dot product loses everything below ~1e-8 rad).
    """
    ua = unit(a)
    ub = unit(b)
    return math.degrees(2.0 * math.atan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub)))


def azimuth_deg(d, right=X_AXIS, forward=Z_AXIS) -> float:
    """Signed horizontal angle of ``d``; positive toward ``right``."""
    return math.degrees(math.atan2(float(np.dot(d, right)), float(np.dot(d, forward))))


def elevation_deg(d, up=Y_AXIS) -> float:
    d = unit(d)
    return math.degrees(math.asin(max(-1.0, min(1.0, float(np.dot(d, up))))))


def direction_from_angles(azimuth: float, elevation: float) -> np.ndarray:
    """Unit vector for a gaze rotated ``azimuth`` (right +) and ``elevation`` (up +) degrees."""
    az = math.radians(azimuth)
    el = math.radians(elevation)
    return vec(math.sin(az) * math.cos(el), math.sin(el), math.cos(az) * math.cos(el))


def rotation_matrix(axis, angle_deg: float) -> np.ndarray:
    """Right-handed rotation about ``axis`` (Rodrigues)."""
    k = unit(axis)
    theta = math.radians(angle_deg)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    r = np.eye(3) + math.sin(theta) * kx + (1.0 - math.cos(theta)) * (kx @ kx)
    r.setflags(write=False)
    return r


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``p -> rotation @ p + translation``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: vec(0, 0, 0))

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        rot.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", vec(self.translation))

    def apply(self, p) -> np.ndarray:
        return vec(self.rotation @ np.asarray(p, dtype=np.float64) + self.translation)

    def apply_dir(self, d) -> np.ndarray:
        return vec(self.rotation @ np.asarray(d, dtype=np.float64))

    def translated(self, t) -> "Pose":
        return Pose(self.rotation, self.translation + np.asarray(t, dtype=np.float64))

    def compose(self, other: "Pose") -> "Pose":
        """``self`` applied after ``other``."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    @property
    def right(self) -> np.ndarray:
        return self.apply_dir(X_AXIS)

    @property
    def up(self) -> np.ndarray:
        return self.apply_dir(Y_AXIS)

    @property
    def forward(self) -> np.ndarray:
        return self.apply_dir(Z_AXIS)


IDENTITY = Pose()


@dataclass(frozen=True, eq=False)
class Plane:
    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", vec(self.point))
        object.__setattr__(self, "normal", unit(self.normal))

    def signed_distance(self, p) -> float:
        return float(np.dot(np.asarray(p) - self.point, self.normal))


@dataclass(frozen=True, eq=False)
class Rect3:
    """Finite oriented rectangle; ``normal = up x right`` faces the viewer."""

    center: np.ndarray
    right: np.ndarray
    up: np.ndarray
    half_width: float
    half_height: float

    def __post_init__(self):
        object.__setattr__(self, "center", vec(self.center))
        object.__setattr__(self, "right", unit(self.right))
        object.__setattr__(self, "up", unit(self.up))
        if abs(float(np.dot(self.right, self.up))) > UNIT_TOL:
            raise ValueError("rectangle axes must be orthogonal")
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("rectangle extents must be positive")

    @classmethod
    def facing(cls, center, width: float, height: float, pose: Pose = IDENTITY) -> "Rect3":
        """Axis-aligned window (in ``pose``'s frame) facing back toward -z."""
        return cls(pose.apply(center), pose.right, pose.up, width / 2.0, height / 2.0)

    @property
    def normal(self) -> np.ndarray:
        return vec(np.cross(self.up, self.right))

    @property
    def plane(self) -> Plane:
        return Plane(self.center, self.normal)

    def corners(self) -> list[np.ndarray]:
        """Bottom-left, bottom-right, top-right, top-left."""
        w = self.right * self.half_width
        h = self.up * self.half_height
        c = self.center
        return [vec(c - w - h), vec(c + w - h), vec(c + w + h), vec(c - w + h)]

    def translated(self, t) -> "Rect3":
        return Rect3(self.center + np.asarray(t, dtype=np.float64), self.right, self.up,
                     self.half_width, self.half_height)

    def transformed(self, pose: Pose) -> "Rect3":
        return Rect3(pose.apply(self.center), pose.apply_dir(self.right), pose.apply_dir(self.up),
                     self.half_width, self.half_height)


@dataclass(frozen=True, eq=False)
class ScenePoint:
    """A finite point, or an ideal point (direction at optical infinity)."""

    coords: np.ndarray
    ideal: bool = False

    def __post_init__(self):
        c = unit(self.coords) if self.ideal else vec(self.coords)
        object.__setattr__(self, "coords", c)

    @classmethod
    def finite(cls, x, y=None, z=None) -> "ScenePoint":
        return cls(vec(x, y, z), False)

    @classmethod
    def at_infinity(cls, x, y=None, z=None) -> "ScenePoint":
        return cls(vec(x, y, z), True)

    def direction_from(self, origin) -> np.ndarray:
        if self.ideal:
            return self.coords
        return unit(self.coords - np.asarray(origin))

    def transformed(self, pose: Pose) -> "ScenePoint":
        if self.ideal:
            return ScenePoint(pose.apply_dir(self.coords), True)
        return ScenePoint(pose.apply(self.coords), False)

    def mirrored(self) -> "ScenePoint":
        c = self.coords * np.array([-1.0, 1.0, 1.0])
        return ScenePoint(c, self.ideal)

    def __repr__(self):
        kind = "Ideal" if self.ideal else "Finite"
        return f"{kind}({', '.join(f'{c:g}' for c in self.coords)})"


def as_scene_point(p) -> ScenePoint:
    return p if isinstance(p, ScenePoint) else ScenePoint.finite(p)


def intersect_ray_plane(origin, direction, plane: Plane) -> np.ndarray:
    """Forward intersection of a ray with a plane."""
    origin = np.asarray(origin, dtype=np.float64)
    d = unit(direction)
    denom = float(np.dot(d, plane.normal))
    if abs(denom) <= PARALLEL_TOL:
        raise ParallelRay(f"ray {d} is parallel to plane with normal {plane.normal}")
    t = float(np.dot(plane.point - origin, plane.normal)) / denom
    if t <= 0.0:
        raise BehindOrigin(f"plane lies behind the ray origin (t={t:g})")
    return vec(origin + t * d)


@dataclass(frozen=True)
class WindowCoords:
    u: float
    v: float
    in_bounds: bool


def window_coords(p, window: Rect3, tol: float = 1e-6) -> WindowCoords:
    """Normalised (u, v) of a point on the window plane; [-1, 1] inside."""
    rel = np.asarray(p, dtype=np.float64) - window.center
    off = float(np.dot(rel, window.normal))
    if abs(off) > tol:
        raise OffPlane(f"point is {off:g} mm off the window plane")
    u = float(np.dot(rel, window.right)) / window.half_width
    v = float(np.dot(rel, window.up)) / window.half_height
    return WindowCoords(u, v, abs(u) <= 1.0 and abs(v) <= 1.0)
