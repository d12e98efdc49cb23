"""Command-line entry point: ``nodalview run|sweep|frustum|verify-paper``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import NodalViewError, ScenarioError
from .geometry import direction_from_angles
from .ocular import SIDES, EyeState
from .rendering import PolicyKind, eye_window, in_plane, off_axis_frustum, parse_policy, reference_nodal, render_nodal
from .runner import canonicalize, format_checks, run, sweep, sweep_csv, verify_paper
from .scenario import load_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation failures, not argparse's default status 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _policy(name, scenario):
    if name is None:
        return None
    try:
        return parse_policy(name, scenario.rig.reference_gaze)
    except ValueError:
        raise ScenarioError(f"unknown policy {name!r}; use static, preshifted or gaze_contingent") from None


def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    report = run(sc, args.metrics, _policy(args.policy, sc))
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    sc = load_scenario(args.scenario)
    header, rows = sweep(sc, args.param, args.start, args.stop, args.steps, args.metric,
                         _policy(args.policy, sc), workers=args.workers)
    _emit(sweep_csv(header, rows), args.out)
    return EXIT_OK


def _parse_gaze(text: str) -> tuple[float, float]:
    try:
        az, el = (float(x) for x in text.split(","))
    except ValueError:
        raise ScenarioError(f"--gaze expects AZ,EL in degrees, got {text!r}") from None
    return az, el


def cmd_frustum(args) -> int:
    sc = load_scenario(args.scenario)
    az, el = _parse_gaze(args.gaze)
    policy = _policy(args.policy or "gaze_contingent", sc)
    rig = sc.build_rig()
    gaze = direction_from_angles(az, el)
    for side in SIDES:
        e = rig.eye(side)
        rig = rig.with_eye(side, EyeState(e.center, gaze, e.nodal_offset_mm))
    windows = sc.windows()
    out = {"gaze_deg": [az, el], "policy": policy.kind.value}
    for side in SIDES:
        win = eye_window(windows, side)
        fr = off_axis_frustum(render_nodal(rig, side, policy), win)
        entry = fr.to_dict()
        if policy.kind is PolicyKind.PRESHIFTED:
            # pre-shifting is a 2D image translation on top of the static frustum
            shift = in_plane(rig.eye(side).nodal_point - reference_nodal(rig, side, policy), win)
            entry["image_shift_mm"] = [float(c) for c in shift]
        out[side] = entry
    _emit(json.dumps(canonicalize(out), sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify_paper()
    print(format_checks(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nodalview", description="Nodal-point rendering error simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="evaluate metrics on a scenario")
    r.add_argument("--scenario", required=True, help="TOML file or preset name")
    r.add_argument("--policy", help="override the scenario's rendering policy")
    r.add_argument("--metrics", default="all", help="comma-separated m1..m14, or all")
    r.add_argument("--out", help="output path (default stdout)")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="evaluate one metric over a parameter range")
    s.add_argument("--scenario", required=True)
    s.add_argument("--param", required=True, help="dotted path, e.g. display.distance_mm")
    s.add_argument("--from", dest="start", type=float, required=True)
    s.add_argument("--to", dest="stop", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--metric", required=True)
    s.add_argument("--policy")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    f = sub.add_parser("frustum", help="per-eye off-axis frustum for a gaze direction")
    f.add_argument("--scenario", required=True)
    f.add_argument("--gaze", required=True, help="AZ,EL in degrees")
    f.add_argument("--policy", help="default gaze_contingent")
    f.add_argument("--out")
    f.set_defaults(func=cmd_frustum)

    v = sub.add_parser("verify-paper", help="recompute the published numbers")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NodalViewError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
