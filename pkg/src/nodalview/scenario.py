"""Scenario files: TOML in, fully resolved :class:`Scenario` out.

A scenario file may start from a shipped preset (``preset = "cave"``) and
override any field. Missing rig values fall back to a 64 mm IPD, a 6 mm
nodal offset and an 1800 mm eye height.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .errors import NodalViewError, ParseError, UnknownParameter, ValidationError
from .geometry import Rect3, ScenePoint, vec
from .metrics import DEFAULT_GAZE_SWEEP, Trajectory
from .ocular import BinocularRig, make_rig
from .optics import PhysicalDisplay, ThinLens, focal_for_optical_distance, optical_image
from .rendering import RenderPolicy, apply_vertical_offset, parse_policy

PRESETS = ("cave", "cardboard2", "infinity_display", "bare_near_eye")
ROLES = ("fixation", "peripheral", "physical", "horizon")


@dataclass(frozen=True)
class RigConfig:
    ipd_mm: float = 64.0
    nodal_offset_mm: float = 6.0
    eye_height_mm: float = 1800.0
    reference_gaze: tuple = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class DisplayConfig:
    width_mm: float
    height_mm: float
    distance_mm: float
    lens_focal_mm: float | None = None
    # alternative to lens_focal_mm: solve the focal length for this image distance
    optical_distance_mm: float | None = None
    vertical_offset_mm: float = 0.0
    layout: str = "shared"  # shared | per_eye
    mount: str = "head"  # head | world


@dataclass(frozen=True)
class PointConfig:
    name: str
    role: str
    position: tuple | None = None
    direction: tuple | None = None
    ground_distance_mm: float | None = None
    lateral_mm: float = 0.0


@dataclass(frozen=True)
class TrajectoryConfig:
    points: tuple
    dt_s: float = 0.1
    times_s: tuple | None = None


@dataclass(frozen=True)
class Scenario:
    display: DisplayConfig
    name: str = "custom"
    policy: str = "static"
    rig: RigConfig = field(default_factory=RigConfig)
    points: tuple = ()
    trajectory: TrajectoryConfig | None = None
    head_translation_mm: tuple = (0.0, 0.0, 100.0)
    gaze_sweep_deg: tuple = DEFAULT_GAZE_SWEEP

    # -- derived objects ------------------------------------------------------

    def build_rig(self) -> BinocularRig:
        return make_rig(self.rig.ipd_mm, self.rig.nodal_offset_mm)

    def render_policy(self, override=None) -> RenderPolicy:
        return parse_policy(override or self.policy, self.rig.reference_gaze)

    @property
    def lens_focal(self) -> float | None:
        d = self.display
        if d.lens_focal_mm is not None:
            return d.lens_focal_mm
        if d.optical_distance_mm is not None:
            return focal_for_optical_distance(d.distance_mm, d.optical_distance_mm)
        return None

    def physical_displays(self) -> dict[str, PhysicalDisplay]:
        d = self.display
        if d.layout == "shared":
            centers = {"shared": (0.0, 0.0, d.distance_mm)}
        else:
            h = self.rig.ipd_mm / 2.0
            centers = {"left": (-h, 0.0, d.distance_mm), "right": (h, 0.0, d.distance_mm)}
        out = {}
        for key, c in centers.items():
            win = apply_vertical_offset(Rect3.facing(c, d.width_mm, d.height_mm), d.vertical_offset_mm)
            out[key] = PhysicalDisplay(win, key)
        return out

    def optical_displays(self):
        f = self.lens_focal
        lens = None if f is None else ThinLens(f)
        out = {}
        for key, disp in self.physical_displays().items():
            ref = (disp.window.center[0], disp.window.center[1], 0.0)
            out[key] = optical_image(disp, lens, ref)
        return out

    def windows(self):
        """Optical window(s): one shared Rect3, or a (left, right) pair."""
        opt = self.optical_displays()
        if "shared" in opt:
            return opt["shared"].window
        return opt["left"].window, opt["right"].window

    def scene_point(self, pc: PointConfig) -> ScenePoint:
        if pc.direction is not None:
            return ScenePoint.at_infinity(pc.direction)
        if pc.ground_distance_mm is not None:
            return ScenePoint.finite(pc.lateral_mm, -self.rig.eye_height_mm, pc.ground_distance_mm)
        return ScenePoint.finite(pc.position)

    def named_points(self, role: str | None = None) -> list[tuple[str, ScenePoint]]:
        return [(pc.name, self.scene_point(pc)) for pc in self.points if role is None or pc.role == role]

    def first(self, *roles: str, finite: bool = False) -> ScenePoint | None:
        for role in roles:
            for _, p in self.named_points(role):
                if not (finite and p.ideal):
                    return p
        return None

    def build_trajectory(self) -> Trajectory:
        t = self.trajectory
        if t is None:
            fix = self.first("fixation", finite=True)
            if fix is None:
                raise ValidationError("no trajectory and no finite fixation point to derive one from")
            pts = [fix.coords + vec(20.0 * i, 0.0, 0.0) for i in range(-2, 3)]
            return Trajectory.uniform(pts, 0.1)
        if t.times_s is not None:
            return Trajectory(t.times_s, t.points)
        return Trajectory.uniform(t.points, t.dt_s)

    # -- serialisation -------------------------------------------------------

    def to_dict(self) -> dict:
        return _strip_none({
            "name": self.name,
            "policy": self.policy,
            "rig": _dc_dict(self.rig),
            "display": _dc_dict(self.display),
            "points": [_dc_dict(p) for p in self.points],
            "trajectory": None if self.trajectory is None else _dc_dict(self.trajectory),
            "motion": {
                "head_translation_mm": list(self.head_translation_mm),
                "gaze_sweep_deg": [list(g) for g in self.gaze_sweep_deg],
            },
        })

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return _build(data)


def _dc_dict(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        out[f.name] = v
    return out


def _strip_none(obj):
    if isinstance(obj, dict):
        return {k: _strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_strip_none(v) for v in obj]
    return obj


def _num(section: str, key: str, value, positive=False, allow_none=False) -> float | None:
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{section}.{key}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ValidationError(f"{section}.{key}: must be finite")
    if positive and v <= 0:
        raise ValidationError(f"{section}.{key}: must be positive, got {v}")
    return v


def _triple(section: str, key: str, value) -> tuple:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ValidationError(f"{section}.{key}: expected three numbers, got {value!r}")
    return tuple(_num(section, key, v) for v in value)


def _known(section: str, data: dict, allowed) -> None:
    extra = set(data) - set(allowed)
    if extra:
        raise ValidationError(f"{section}: unknown field(s) {sorted(extra)}")


def _build(data: dict) -> Scenario:
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a table")
    data = copy.deepcopy(data)
    if "preset" in data:
        base = preset_dict(data.pop("preset"))
        data = _deep_merge(base, data)
    _known("scenario", data, {"name", "policy", "rig", "display", "points", "trajectory", "motion"})

    rig_d = data.get("rig", {})
    _known("rig", rig_d, {f.name for f in fields(RigConfig)})
    rig = RigConfig(
        ipd_mm=_num("rig", "ipd_mm", rig_d.get("ipd_mm", 64.0), positive=True),
        nodal_offset_mm=_num("rig", "nodal_offset_mm", rig_d.get("nodal_offset_mm", 6.0)),
        eye_height_mm=_num("rig", "eye_height_mm", rig_d.get("eye_height_mm", 1800.0), positive=True),
        reference_gaze=_triple("rig", "reference_gaze", rig_d.get("reference_gaze", (0.0, 0.0, 1.0))),
    )
    if not 0 <= rig.nodal_offset_mm < 15:
        raise ValidationError("rig.nodal_offset_mm: must lie in [0, 15)")
    if rig.reference_gaze[2] <= 0:
        raise ValidationError("rig.reference_gaze: must point forward (+z)")

    if "display" not in data:
        raise ValidationError("display: section is required")
    dd = data["display"]
    _known("display", dd, {f.name for f in fields(DisplayConfig)})
    for key in ("width_mm", "height_mm", "distance_mm"):
        if key not in dd:
            raise ValidationError(f"display.{key}: required")
    display = DisplayConfig(
        width_mm=_num("display", "width_mm", dd["width_mm"], positive=True),
        height_mm=_num("display", "height_mm", dd["height_mm"], positive=True),
        distance_mm=_num("display", "distance_mm", dd["distance_mm"], positive=True),
        lens_focal_mm=_num("display", "lens_focal_mm", dd.get("lens_focal_mm"), positive=True, allow_none=True),
        optical_distance_mm=_num("display", "optical_distance_mm", dd.get("optical_distance_mm"),
                                 positive=True, allow_none=True),
        vertical_offset_mm=_num("display", "vertical_offset_mm", dd.get("vertical_offset_mm", 0.0)),
        layout=dd.get("layout", "shared"),
        mount=dd.get("mount", "head"),
    )
    if display.layout not in ("shared", "per_eye"):
        raise ValidationError(f"display.layout: expected 'shared' or 'per_eye', got {display.layout!r}")
    if display.mount not in ("head", "world"):
        raise ValidationError(f"display.mount: expected 'head' or 'world', got {display.mount!r}")
    if display.lens_focal_mm is not None and display.optical_distance_mm is not None:
        raise ValidationError("display: give lens_focal_mm or optical_distance_mm, not both")

    points = []
    seen = set()
    for i, pd in enumerate(data.get("points", [])):
        sec = f"points[{i}]"
        _known(sec, pd, {f.name for f in fields(PointConfig)})
        name = pd.get("name", f"p{i}")
        if name in seen:
            raise ValidationError(f"{sec}.name: duplicate point name {name!r}")
        seen.add(name)
        role = pd.get("role", "peripheral")
        if role not in ROLES:
            raise ValidationError(f"{sec}.role: expected one of {ROLES}, got {role!r}")
        given = [k for k in ("position", "direction", "ground_distance_mm") if k in pd]
        if len(given) != 1:
            raise ValidationError(f"{sec}: give exactly one of position, direction, ground_distance_mm")
        pc = PointConfig(
            name=name, role=role,
            position=_triple(sec, "position", pd["position"]) if "position" in pd else None,
            direction=_triple(sec, "direction", pd["direction"]) if "direction" in pd else None,
            ground_distance_mm=_num(sec, "ground_distance_mm", pd.get("ground_distance_mm"),
                                    positive=True, allow_none=True),
            lateral_mm=_num(sec, "lateral_mm", pd.get("lateral_mm", 0.0)),
        )
        if pc.direction is not None and pc.direction[2] <= 0:
            raise ValidationError(f"{sec}.direction: ideal points must point forward (+z)")
        points.append(pc)

    traj = None
    if "trajectory" in data:
        td = data["trajectory"]
        _known("trajectory", td, {f.name for f in fields(TrajectoryConfig)})
        pts = tuple(_triple("trajectory", "points", p) for p in td.get("points", []))
        times = td.get("times_s")
        traj = TrajectoryConfig(
            points=pts,
            dt_s=_num("trajectory", "dt_s", td.get("dt_s", 0.1), positive=True),
            times_s=None if times is None else tuple(_num("trajectory", "times_s", t) for t in times),
        )

    motion = data.get("motion", {})
    _known("motion", motion, {"head_translation_mm", "gaze_sweep_deg"})
    sweep = motion.get("gaze_sweep_deg", [list(g) for g in DEFAULT_GAZE_SWEEP])
    gaze_sweep = []
    for g in sweep:
        if not isinstance(g, (list, tuple)) or len(g) != 2:
            raise ValidationError(f"motion.gaze_sweep_deg: expected [azimuth, elevation] pairs, got {g!r}")
        gaze_sweep.append((_num("motion", "gaze_sweep_deg", g[0]), _num("motion", "gaze_sweep_deg", g[1])))

    policy = data.get("policy", "static")
    try:
        parse_policy(policy)
    except ValueError as exc:
        raise ValidationError(f"policy: {exc}") from None

    scenario = Scenario(
        display=display,
        name=str(data.get("name", "custom")),
        policy=str(policy),
        rig=rig,
        points=tuple(points),
        trajectory=traj,
        head_translation_mm=_triple("motion", "head_translation_mm",
                                    motion.get("head_translation_mm", (0.0, 0.0, 100.0))),
        gaze_sweep_deg=tuple(gaze_sweep),
    )
    _check_resolvable(scenario)
    return scenario


def _check_resolvable(s: Scenario) -> None:
    try:
        s.windows()
        if s.trajectory is not None:
            s.build_trajectory()
    except NodalViewError as exc:
        raise ValidationError(f"display/trajectory: {type(exc).__name__}: {exc}") from None
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def _deep_merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def preset_dict(name: str) -> dict:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("nodalview").joinpath("presets", f"{name}.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def load_preset(name: str) -> Scenario:
    return _build(preset_dict(name))


def loads_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{source}: {exc}") from None
    return _build(data)


def load_scenario(path_or_preset) -> Scenario:
    """Load a TOML scenario file, or a shipped preset by name."""
    p = Path(path_or_preset)
    if not p.exists() and str(path_or_preset) in PRESETS:
        return load_preset(str(path_or_preset))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path_or_preset}: {exc.strerror}") from None
    return loads_scenario(text, str(p))


# -- parameter paths for sweeps ------------------------------------------------

def get_parameter(scenario: Scenario, path: str) -> float:
    parent, key = _resolve(scenario.to_dict(), path)
    return parent[key]


def with_parameter(scenario: Scenario, path: str, value: float) -> Scenario:
    """Copy of ``scenario`` with the numeric field at ``path`` set to ``value``.

    Paths are dotted: ``display.distance_mm``, ``rig.ipd_mm``,
    ``points.ground.ground_distance_mm``, ``points.target.position.2``.
    Points are addressed by name, list elements by index.
    """
    data = scenario.to_dict()
    parent, key = _resolve(data, path)
    parent[key] = float(value)
    return _build(data)


def _resolve(data: dict, path: str):
    parts = path.split(".")
    node = data
    # optional fields that are legitimately absent (e.g. lens focal) are addressable too
    optional = {"lens_focal_mm", "optical_distance_mm", "ground_distance_mm"}
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(node, dict):
            if part not in node and not (last and part in optional):
                raise UnknownParameter(f"{path}: no field {part!r}")
            if last:
                if part in node and (isinstance(node[part], bool) or not isinstance(node[part], (int, float))):
                    raise UnknownParameter(f"{path}: not a numeric field")
                return node, part
            node = node[part]
        elif isinstance(node, list):
            match = None
            if part.lstrip("-").isdigit():
                idx = int(part)
                if -len(node) <= idx < len(node):
                    match = idx
            else:
                match = next((j for j, x in enumerate(node) if isinstance(x, dict) and x.get("name") == part), None)
            if match is None:
                raise UnknownParameter(f"{path}: no element {part!r}")
            if last:
                if not isinstance(node[match], (int, float)) or isinstance(node[match], bool):
                    raise UnknownParameter(f"{path}: not a numeric field")
                return node, match
            node = node[match]
        else:
            raise UnknownParameter(f"{path}: cannot descend into {part!r}")
    raise UnknownParameter(path)


def scenario_with(scenario: Scenario, **changes) -> Scenario:
    return replace(scenario, **changes)
