"""Paraxial thin-lens magnifier.

Everything downstream works on the *optical* window: the virtual image of the
screen formed by the headset lens. Lens aberrations (pincushion, pupil swim)
are the job of pre-warping and are not modelled here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLens, InvalidTarget, NotAMagnifier
from .geometry import Rect3, vec

DEGENERATE_GAP_MM = 1e-6


@dataclass(frozen=True, eq=False)
class PhysicalDisplay:
    window: Rect3
    name: str = "display"

    def faces(self, eye_point) -> bool:
        return float(np.dot(self.window.normal, np.asarray(eye_point) - self.window.center)) > 0.0


@dataclass(frozen=True)
class ThinLens:
    focal_mm: float

    def __post_init__(self):
        if not self.focal_mm > 0:
            raise NotAMagnifier(f"focal length must be positive, got {self.focal_mm}")


@dataclass(frozen=True, eq=False)
class OpticalDisplay:
    window: Rect3
    magnification: float
    optical_distance_mm: float
    object_distance_mm: float


def image_distance(object_distance_mm: float, focal_mm: float) -> float:
    """|d_i| of the virtual image for an object inside the focal length."""
    gap = focal_mm - object_distance_mm
    if abs(gap) < DEGENERATE_GAP_MM:
        raise DegenerateLens(f"object at the focal plane (f - d_o = {gap:g} mm)")
    if gap < 0:
        raise NotAMagnifier(f"d_o={object_distance_mm} >= f={focal_mm}: real image, not a magnifier")
    return focal_mm * object_distance_mm / gap


def optical_image(display: PhysicalDisplay, lens: ThinLens | None, eye_reference) -> OpticalDisplay:
    """Virtual image of ``display`` seen through ``lens``.

    The lens sits on the display's optical axis (window normal through its
    centre), in the plane through ``eye_reference``. Without a lens the
    display is returned unchanged with unit magnification.
    """
    win = display.window
    forward = -win.normal
    d_o = float(np.dot(win.center - np.asarray(eye_reference, dtype=np.float64), forward))
    if d_o <= 0:
        raise ValueError("display must lie in front of the eye reference")
    if lens is None:
        return OpticalDisplay(win, 1.0, d_o, d_o)
    d_i = image_distance(d_o, lens.focal_mm)
    m = d_i / d_o
    lens_center = win.center - d_o * forward
    image = Rect3(vec(lens_center + d_i * forward), win.right, win.up,
                  win.half_width * m, win.half_height * m)
    return OpticalDisplay(image, m, d_i, d_o)


def focal_for_optical_distance(d_o: float, d_i_target: float) -> float:
    """Focal length that puts the virtual image of a screen at ``d_o`` at ``d_i_target``."""
    if not (d_o > 0 and d_i_target > d_o):
        raise InvalidTarget(f"need d_i_target > d_o > 0, got d_o={d_o}, d_i={d_i_target}")
    return d_o * d_i_target / (d_i_target - d_o)
