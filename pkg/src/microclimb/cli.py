"""Command-line entry points: terrain generation, runs and comparisons.

Exit codes: 0 success, 1 usage/configuration error, 2 run completed with a
gripper detachment (outputs are still written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import MicroclimbError, SeedMismatch
from .scenario import load_scenario
from .sim import RunResult, export_trace_csv, run_scenario, write_summary
from .svgplot import heightmap_preview, line_chart
from .terrain import export_csv as export_terrain_csv
from .terrain import generate_fractal


def _write_run_outputs(result: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    export_trace_csv(result.trace, out / "trace.csv")
    write_summary(result.summary, out / "summary.txt")
    (out / "manifest.txt").write_text(result.scenario.manifest(), encoding="utf-8")
    tr = result.trace
    line_chart(
        out / "force.svg",
        [("max contact force", tr.t, tr.max_force), ("max pulling force", tr.t, tr.max_pull)],
        title="Maximum gripper contact force",
        xlabel="time (s)",
        ylabel="force (N)",
        hlines=[(result.scenario["contact"]["hold_force"], "holding limit")],
    )
    line_chart(
        out / "gia.svg",
        [("GIA margin", tr.t, tr.gia)],
        title="Gravito-inertial acceleration margin",
        xlabel="time (s)",
        ylabel="margin (m)",
        hlines=[(0.0, "instability")],
    )


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_scenario(
        scenario,
        seed_override=args.seed,
        strategy_override=args.strategy,
        duration_override=args.duration,
    )
    _write_run_outputs(result, Path(args.out))
    s = result.summary
    print(f"strategy: {s['strategy']}")
    print(f"simulated: {s['duration']:.2f} s, completed: {s['completed']}")
    print(f"max pulling force: {s['max_pull_force']:.3f} N")
    print(f"min GIA margin: {s['min_gia_margin']:.4f} m")
    print(f"mean forward velocity: {s['mean_velocity'] * 100:.3f} cm/s")
    if s["detachments"]:
        t0, limb = s["detachments"][0]
        print(f"first detachment: t={t0:.2f} s limb={limb}")
        return 2
    if s["missed_grasps"]:
        t0, limb, dist = s["missed_grasps"][0]
        print(f"first missed grasp: t={t0:.2f} s limb={limb} ({dist * 1000:.1f} mm off)")
    return 0


def cmd_compare(args) -> int:
    scn_a = load_scenario(args.scenario_a)
    scn_b = load_scenario(args.scenario_b)
    if scn_a["terrain"] != scn_b["terrain"]:
        raise SeedMismatch(
            "scenarios use different terrain; comparison would be meaningless"
        )
    out = Path(args.out)
    res_a = run_scenario(scn_a)
    res_b = run_scenario(scn_b)
    _write_run_outputs(res_a, out / "a")
    _write_run_outputs(res_b, out / "b")

    label_a = f"A: {scn_a.strategy}"
    label_b = f"B: {scn_b.strategy}"
    line_chart(
        out / "force_compare.svg",
        [
            (label_a, res_a.trace.t, res_a.trace.max_force),
            (label_b, res_b.trace.t, res_b.trace.max_force),
        ],
        title="Maximum gripper contact force",
        xlabel="time (s)",
        ylabel="force (N)",
        hlines=[(scn_a["contact"]["hold_force"], "holding limit")],
    )
    line_chart(
        out / "gia_compare.svg",
        [(label_a, res_a.trace.t, res_a.trace.gia), (label_b, res_b.trace.t, res_b.trace.gia)],
        title="Gravito-inertial acceleration margin",
        xlabel="time (s)",
        ylabel="margin (m)",
        hlines=[(0.0, "instability")],
    )

    keys = ["max_contact_force", "max_pull_force", "min_gia_margin", "mean_velocity", "duration"]
    lines = [f"{'metric':22s} {'A':>12s} {'B':>12s} {'B - A':>12s}"]
    for key in keys:
        va, vb = res_a.summary[key], res_b.summary[key]
        lines.append(f"{key:22s} {va:12.5f} {vb:12.5f} {vb - va:12.5f}")
    lines.append(
        f"{'detachments':22s} {len(res_a.summary['detachments']):12d} "
        f"{len(res_b.summary['detachments']):12d}"
    )
    lines.append(
        f"{'missed_grasps':22s} {len(res_a.summary['missed_grasps']):12d} "
        f"{len(res_b.summary['missed_grasps']):12d}"
    )
    table = "\n".join(lines) + "\n"
    (out / "delta.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    failed = res_a.summary["detachments"] or res_b.summary["detachments"]
    return 2 if failed else 0


def cmd_terrain(args) -> int:
    tm = generate_fractal(
        args.seed,
        (args.extent_x, args.extent_y),
        args.resolution,
        args.sigma,
        origin=(args.origin_x, args.origin_y),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_terrain_csv(tm, out / "terrain.csv")
    heightmap_preview(
        out / "terrain.svg", tm.heights, title=f"terrain seed={args.seed} sigma={args.sigma}"
    )
    std = float(np.std(tm.heights))
    print(f"terrain written to {out}/terrain.csv ({tm.nx}x{tm.ny} cells)")
    print(f"elevation std: {std:.6f} m (target {args.sigma})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microclimb",
        description="Gait planning, reaction-aware motion and microgravity simulation "
        "for multi-limbed climbing robots",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("--scenario", required=True, help="scenario file path")
    p_run.add_argument("--seed", type=int, default=None, help="terrain seed override")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument(
        "--strategy", choices=["baseline", "proposed"], default=None,
        help="override the scenario strategy flag",
    )
    p_run.add_argument("--duration", type=float, default=None, help="simulated seconds")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run two scenarios and overlay the results")
    p_cmp.add_argument("scenario_a")
    p_cmp.add_argument("scenario_b")
    p_cmp.add_argument("--out", default="compare_out")
    p_cmp.set_defaults(func=cmd_compare)

    p_ter = sub.add_parser("terrain", help="generate a fractal terrain map")
    p_ter.add_argument("--seed", type=int, default=42)
    p_ter.add_argument("--sigma", type=float, default=0.03)
    p_ter.add_argument("--extent-x", type=float, default=2.0)
    p_ter.add_argument("--extent-y", type=float, default=2.0)
    p_ter.add_argument("--resolution", type=float, default=0.04)
    p_ter.add_argument("--origin-x", type=float, default=0.0)
    p_ter.add_argument("--origin-y", type=float, default=0.0)
    p_ter.add_argument("--out", default="terrain_out")
    p_ter.set_defaults(func=cmd_terrain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MicroclimbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
