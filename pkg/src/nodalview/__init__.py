"""Nodal-point rendering error analysis for stereo displays."""

__version__ = "0.1.0"

from .geometry import Pose, Rect3, ScenePoint  # noqa: E402
from .ocular import BinocularRig, EyeState, make_rig  # noqa: E402
from .rendering import GAZE_CONTINGENT, PRESHIFTED, STATIC, RenderPolicy  # noqa: E402
from .scenario import Scenario, load_preset, load_scenario  # noqa: E402

__all__ = [
    "__version__", "Pose", "Rect3", "ScenePoint", "BinocularRig", "EyeState", "make_rig",
    "STATIC", "PRESHIFTED", "GAZE_CONTINGENT", "RenderPolicy", "Scenario", "load_preset", "load_scenario",
]
