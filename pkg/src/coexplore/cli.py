"""Command line front end: single runs, suites, and calibration."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench


def _cmd_run(args) -> int:
    if args.length == "calibrate":
        length = bench.calibrate_episode_length(args.scene)
    else:
        length = int(args.length)
    record = bench.run_episode(args.scene, args.planner, args.agents,
                               seed=args.seed, length=length)
    if args.out:
        bench.export_trace(record, args.out)
    summary = bench.record_as_dict(record)
    del summary["coverage_trace"], summary["reward_log"]
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_suite(args) -> int:
    config = bench.parse_config(args.config)
    report = bench.run_suite(config, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bench.emit_report(report, "csv", out / "report.csv")
    bench.emit_report(report, "json", out / "report.json")
    print(f"{len(report['episodes'])} episodes, {len(report['failures'])} failures "
          f"-> {out / 'report.csv'}")
    return 1 if report["failures"] else 0


def _cmd_calibrate(args) -> int:
    print(bench.calibrate_episode_length(args.scene))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coexplore",
        description="Multi-agent exploration episodes, suites, and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one episode and export its trace")
    run.add_argument("--scene", required=True,
                     help="generator seed (integer) or scene file path")
    run.add_argument("--planner", required=True, choices=bench.PLANNER_NAMES)
    run.add_argument("--agents", default="1", metavar="N[:M@S]",
                     help='team schedule, e.g. "2" or "2:3@90"')
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--length", default=str(bench.DEFAULT_LENGTH),
                     help='simulator steps, or "calibrate"')
    run.add_argument("--out", help="JSON-lines trace file")
    run.set_defaults(fn=_cmd_run)

    suite = sub.add_parser("suite", help="run a config of suite cells")
    suite.add_argument("--config", required=True)
    suite.add_argument("--out", required=True, help="report directory")
    suite.add_argument("--jobs", type=int, default=1)
    suite.set_defaults(fn=_cmd_suite)

    cal = sub.add_parser("calibrate", help="episode length for one scene")
    cal.add_argument("--scene", required=True)
    cal.set_defaults(fn=_cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (bench.ConfigError, bench.IoError, bench.CalibrationTimeout, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
