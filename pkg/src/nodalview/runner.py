"""Running metrics over scenarios: reports, sweeps and the published-number check."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import metrics as M
from .errors import EmptyRange, MetricError, NodalViewError, ValidationError
from .geometry import azimuth_deg, elevation_deg
from .ocular import SIDES, gaze_toward
from .optics import PhysicalDisplay, ThinLens, focal_for_optical_distance, optical_image
from .rendering import GAZE_CONTINGENT, PRESHIFTED, PolicyKind
from .scenario import Scenario, load_preset, with_parameter

SIG_DIGITS = 12


# -- reports -------------------------------------------------------------------

def canonical_number(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    r = float(f"{x:.{SIG_DIGITS}g}")
    return 0.0 if r == 0 else r


def canonicalize(obj):
    if isinstance(obj, dict):
        return {str(k): canonicalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonicalize(v) for v in obj]
    if isinstance(obj, str):
        return obj
    if isinstance(obj, np.ndarray):
        return [canonicalize(v) for v in obj.tolist()]
    return canonical_number(obj)


@dataclass
class Report:
    scenario: dict
    records: list
    tool_version: str = __version__
    generated_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self, canonical: bool = True) -> dict:
        out = {
            "tool": "nodalview",
            "tool_version": self.tool_version,
            "scenario": self.scenario,
            "records": [r.to_dict() for r in self.records],
        }
        if not canonical:
            out["generated_at"] = self.generated_at
        return out

    def to_json(self, canonical: bool = True) -> str:
        """Sorted keys, 12 significant digits; the canonical form has no timestamp."""
        return json.dumps(canonicalize(self.to_dict(canonical)), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric_id", "policy", "field", "value", "is_error"])
        for rec in self.records:
            errs = set(rec.error_fields)
            for key in sorted(rec.values):
                for name, v in _flatten(key, rec.values[key]):
                    w.writerow([rec.metric_id, rec.policy, name, _fmt(v), int(key in errs)])
            for key in sorted(rec.flags):
                w.writerow([rec.metric_id, rec.policy, key, int(bool(rec.flags[key])), 0])
        return buf.getvalue()

    def record(self, metric_id: str):
        return next(r for r in self.records if r.metric_id == metric_id)


def _flatten(key, v):
    if isinstance(v, (list, tuple)):
        for i, x in enumerate(v):
            yield from _flatten(f"{key}[{i}]", x)
    else:
        yield key, v


def _fmt(v) -> str:
    c = canonical_number(v)
    return c if isinstance(c, str) else repr(c)


# -- run -------------------------------------------------------------------------

def parse_selection(selection) -> list[str]:
    if selection is None:
        return list(M.METRIC_IDS)
    if isinstance(selection, str):
        selection = [s for s in selection.replace(" ", "").split(",") if s]
    out = []
    for s in selection:
        if s == "all":
            out.extend(M.METRIC_IDS)
        elif s in M.METRIC_IDS:
            out.append(s)
        else:
            raise ValidationError(f"unknown metric {s!r}; choose from m1..m14 or all")
    seen = set()
    return [m for m in out if not (m in seen or seen.add(m))]


def _per_eye(metric_id, fn):
    return M.merge_records(metric_id, {side: fn(side) for side in SIDES})


def evaluate_metric(metric_id: str, scenario: Scenario, policy) -> M.DistortionRecord:
    rig = scenario.build_rig()
    win = scenario.windows()
    fix = scenario.first("fixation")
    peripheral = scenario.first("horizon", "peripheral")
    physical = scenario.first("physical")
    near = scenario.first("peripheral", "physical", finite=True)
    horizon = scenario.first("horizon")
    if fix is None:
        raise ValidationError("scenario needs a point with role 'fixation'")
    if peripheral is None and metric_id in ("m3", "m4", "m5", "m6", "m9", "m10", "m11"):
        raise ValidationError(f"{metric_id} needs a horizon or peripheral point")

    if metric_id == "m1":
        return _per_eye("m1", lambda s: M.m1_fixated_direction(fix, rig, win, policy, s))
    if metric_id == "m2":
        return M.m2_vergence(fix, rig, win, policy)
    if metric_id == "m3":
        return _per_eye("m3", lambda s: M.m3_peripheral_direction(peripheral, fix, rig, win, policy, s))
    if metric_id == "m4":
        return M.m4_nonfixated_binocular(peripheral, fix, rig, win, policy)
    if metric_id == "m5":
        parts = {s: M.m5_relative_angle(fix, peripheral, rig, win, policy, s) for s in SIDES}
        if physical is not None:
            for s in SIDES:
                parts[f"physical.{s}"] = M.m5_relative_angle(fix, physical, rig, win, policy, s,
                                                             p2_physical=True)
        return M.merge_records("m5", parts)
    if metric_id == "m6":
        return M.m6_relative_disparity(fix, peripheral, rig, win, policy)
    if metric_id == "m7":
        if near is None or horizon is None:
            raise ValidationError("m7 needs a finite peripheral point and a horizon point")
        # the metric is about pre-shifting; only the corrected pipeline replaces it
        p = GAZE_CONTINGENT if policy.kind is PolicyKind.GAZE_CONTINGENT else PRESHIFTED
        p = type(p)(p.kind, policy.reference_gaze)
        return _per_eye("m7", lambda s: M.m7_preshift_residual(near, horizon, rig, win, fix, s, p))
    if metric_id == "m8":
        if fix.ideal:
            raise ValidationError("m8 needs a finite fixation point")
        d = float(np.linalg.norm(fix.coords))
        parts = {mode: M.m8_gaze_disparity(d, rig.ipd_mm, win, mode, policy, scenario.rig.nodal_offset_mm)
                 for mode in ("exact", "paper_approx")}
        return M.merge_records("m8", parts)
    if metric_id == "m9":
        def one(side):
            g = gaze_toward(rig.eye(side), fix, rig.forward)
            rot = (azimuth_deg(g), elevation_deg(g))
            return M.m9_parallax_deficit(peripheral, rot, rig, win, policy, side)
        return _per_eye("m9", one)
    if metric_id in ("m10", "m11"):
        mode = "head_then_eye" if metric_id == "m10" else "vor"
        follows = scenario.display.mount == "head"
        return _per_eye(metric_id, lambda s: M.m10_m11_head_eye_residual(
            peripheral, scenario.head_translation_mm, fix, rig, win, policy, mode, s, follows))
    if metric_id == "m12":
        physical_names = _physical_names(scenario)
        samples = [p for name, p in scenario.named_points() if name not in physical_names]
        return M.m12_cue_conflict(samples, scenario.gaze_sweep_deg, rig, win, policy)
    if metric_id == "m13":
        traj = scenario.build_trajectory()
        parts = {s: M.m13_tracked_angular_motion(traj, rig, win, policy, s) for s in SIDES}
        for s in SIDES:
            parts[f"fixed_gaze.{s}"] = M.m13_tracked_angular_motion(traj, rig, win, policy, s, tracking=False)
        return M.merge_records("m13", parts)
    if metric_id == "m14":
        traj = scenario.build_trajectory()
        return M.merge_records("m14", {
            "tracking": M.m14_tracked_3d_motion(traj, rig, win, policy),
            "fixed_gaze": M.m14_tracked_3d_motion(traj, rig, win, policy, tracking=False),
        })
    raise ValidationError(f"unknown metric {metric_id!r}")


def _physical_names(scenario: Scenario) -> set:
    return {pc.name for pc in scenario.points if pc.role == "physical"}


def run(scenario: Scenario, selection="all", policy=None) -> Report:
    """Evaluate the selected metrics; one merged record per metric, in m1..m14 order."""
    pol = scenario.render_policy(policy)
    records = []
    for mid in parse_selection(selection):
        try:
            records.append(evaluate_metric(mid, scenario, pol))
        except ValidationError:
            raise
        except NodalViewError as exc:
            raise MetricError(mid, exc) from exc
    resolved = scenario.to_dict()
    resolved["policy"] = pol.kind.value
    resolved["resolved"] = _resolved_extras(scenario)
    return Report(resolved, records)


def _resolved_extras(scenario: Scenario) -> dict:
    opt = scenario.optical_displays()
    out = {"lens_focal_mm": scenario.lens_focal}
    for key, o in opt.items():
        out[f"{key}.optical_distance_mm"] = o.optical_distance_mm
        out[f"{key}.magnification"] = o.magnification
    out["points"] = {name: {"ideal": p.ideal, "coords": [float(c) for c in p.coords]}
                     for name, p in scenario.named_points()}
    return {k: v for k, v in out.items() if v is not None}


# -- sweeps ----------------------------------------------------------------------

def sweep(scenario: Scenario, param: str, start: float, stop: float, steps: int, metric: str,
          policy=None, workers: int = 1) -> tuple[list[str], list[list]]:
    """Evaluate ``metric`` at ``steps`` evenly spaced values of ``param``.

    Rows come back in step order whatever ``workers`` is.
    """
    if steps < 1:
        raise EmptyRange("a sweep needs at least one step")
    (metric,) = parse_selection(metric) if metric != "all" else (None,)
    if metric is None:
        raise ValidationError("sweep takes a single metric")
    values = np.linspace(float(start), float(stop), int(steps))
    # resolve the path (and fail early) before spawning work
    with_parameter(scenario, param, float(values[0]))

    def one(v):
        sc = with_parameter(scenario, param, float(v))
        return run(sc, [metric], policy).records[0]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(one, values))
    else:
        recs = [one(v) for v in values]
    cols = sorted(name for name, _ in _flat_items(recs[0]))
    header = [param] + cols
    rows = []
    for v, rec in zip(values, recs):
        flat = dict(_flat_items(rec))
        rows.append([float(v)] + [flat.get(c, math.nan) for c in cols])
    return header, rows


def _flat_items(rec):
    for key in sorted(rec.values):
        yield from _flatten(key, rec.values[key])


def sweep_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


# -- published numbers -------------------------------------------------------------

@dataclass
class Check:
    name: str
    expected: float
    computed: float
    tolerance: float
    source: str

    @property
    def passed(self) -> bool:
        return math.isfinite(self.computed) and abs(self.computed - self.expected) <= self.tolerance + 1e-12


def verify_paper() -> list[Check]:
    """Recompute each published number and compare it with its tolerance."""
    checks = []
    deg = math.degrees
    inf = load_preset("infinity_display")
    win = inf.windows()
    exact = M.m8_gaze_disparity(200.0, 64.0, win, "exact").values
    approx = M.m8_gaze_disparity(200.0, 64.0, win, "paper_approx").values
    checks += [
        Check("internodal reduction, exact (mm)", 2 * 6 * math.sin(math.atan(32 / 200)),
              exact["internodal_reduction_mm"], 0.005, "closed form 2*6*sin(atan(32/200))"),
        Check("internodal reduction, rounded (mm)", 2.0, float(round(exact["internodal_reduction_mm"])),
              0.0, "published: 2 mm"),
        Check("per-eye angle error, paper_approx (deg)", deg(math.atan(32 / 200) - math.atan(31 / 200)),
              approx["per_eye_angle_error_deg"], 0.002, "atan(32/200) - atan(31/200)"),
        Check("per-eye angle error, paper_approx vs published (deg)", 0.28, approx["per_eye_angle_error_deg"],
              0.03, "published: 0.28 deg"),
        Check("per-eye angle error, exact (deg)", 0.265, exact["per_eye_angle_error_deg"], 0.005,
              "exact geometry band [0.26, 0.27]"),
        Check("per-eye angle error, exact vs published (deg)", 0.28, exact["per_eye_angle_error_deg"], 0.03,
              "published: 0.28 deg"),
        Check("AR depth displacement, paper_approx (mm)", 200 * 2 * 1 / 64, approx["depth_displacement_mm"],
              0.001, "closed form d*2s/ipd; published 6.25 mm"),
        Check("AR depth displacement, exact (mm)", 5.9, exact["depth_displacement_mm"], 0.1,
              "triangulation band [5.8, 6.0]"),
    ]

    cave = load_preset("cave")
    rig = cave.build_rig()
    ground = cave.first("fixation")
    horizon = cave.first("horizon")
    m3 = M.m3_peripheral_direction(horizon, ground, rig, cave.windows(), M.STATIC).values
    checks += [
        Check("CAVE display distance (mm)", 1500.0, cave.optical_displays()["shared"].optical_distance_mm, 0.0,
              "published: 1500 mm"),
        Check("CAVE horizon displacement (mm)", 4.01, m3["window_displacement_mm"], 0.05,
              "6*sin(atan(1800/2000))"),
        Check("CAVE horizon displacement vs published (mm)", 4.0, m3["window_displacement_mm"], 0.5,
              "published: 4 mm"),
        Check("CAVE horizon direction error (deg)", 0.154, m3["direction_error_deg"], 0.005,
              "atan(4.014/1495.5)"),
    ]

    f = focal_for_optical_distance(57.0, 1580.0)
    disp = PhysicalDisplay(load_preset("cardboard2").physical_displays()["right"].window)
    ref = (disp.window.center[0], 0.0, 0.0)
    img = optical_image(disp, ThinLens(f), ref)
    img_2dp = optical_image(disp, ThinLens(59.13), ref)
    checks += [
        Check("Cardboard focal length (mm)", 59.133, f, 0.0005, "f = 57*1580/(1580-57)"),
        Check("Cardboard optical distance (mm)", 1580.0, img.optical_distance_mm, 1.0, "published: 1580 mm"),
        Check("Cardboard optical distance, f=59.13 (mm)", 1580.0, img_2dp.optical_distance_mm, 5.0,
              "published: 1580 mm"),
        Check("Cardboard magnification", 27.7, img.magnification, 0.1, "1580/57"),
    ]
    return checks


def format_checks(checks: list[Check]) -> str:
    lines = [f"{'check':<52} {'expected':>12} {'computed':>12} {'tol':>8}  result"]
    for c in checks:
        lines.append(f"{c.name:<52} {c.expected:>12.6g} {c.computed:>12.6g} {c.tolerance:>8.3g}  "
                     f"{'PASS' if c.passed else 'FAIL'}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)


__all__ = ["Report", "run", "sweep", "sweep_csv", "verify_paper", "format_checks", "Check",
           "evaluate_metric", "parse_selection", "canonicalize"]
