"""``manugrip <synth|calibrate|replay|grasp|simulate> --config FILE [--seed N] [--out DIR]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import pipeline
from .config import load_config
from .fem.scenarios import SCENARIOS
from .streams import SYNTH_SCENARIOS


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="pipeline config (JSON)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--out", default=".", help="output directory (default: current)")

    parser = argparse.ArgumentParser(prog="manugrip", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic glove stream")
    p.add_argument("scenario", choices=SYNTH_SCENARIOS)

    p = sub.add_parser("calibrate", parents=[common], help="flat-hand IMU calibration from a stream")
    p.add_argument("stream")

    p = sub.add_parser("replay", parents=[common], help="joint angles and analysis channels per frame")
    p.add_argument("stream")
    p.add_argument("--calibration", help="calibration.json from `manugrip calibrate`")

    p = sub.add_parser("grasp", parents=[common], help="grasp state machine, contact log and trajectories")
    p.add_argument("stream", nargs="?")
    p.add_argument("--mesh", help="watertight object mesh (OBJ)")
    p.add_argument("--calibration")
    p.add_argument("--aggregate", nargs="+", default=(), metavar="LOG",
                   help="contact logs to pool into a per-phalanx summary")

    p = sub.add_parser("simulate", parents=[common], help="FEM contact/fracture run")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--nodes", help="target tet mesh node file")
    p.add_argument("--elements", help="target tet mesh element file")
    p.add_argument("--tool-mesh", action="append", default=[], help="tool surface (OBJ), one per body id")
    p.add_argument("--trajectories", help="tool pose keyframes (JSON lines)")
    p.add_argument("--steps", type=int, help="number of dt steps (default: config, scenario or horizon)")
    return parser


def run(args) -> pipeline.RunManifest:
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.command == "synth":
        return pipeline.cmd_synth(config, args.scenario, args.out)
    if args.command == "calibrate":
        return pipeline.cmd_calibrate(config, args.stream, args.out)
    if args.command == "replay":
        return pipeline.cmd_replay(config, args.stream, args.out, args.calibration)
    if args.command == "grasp":
        return pipeline.cmd_grasp(config, args.out, args.stream, args.mesh, args.calibration, args.aggregate)
    return pipeline.cmd_simulate(config, args.out, args.scenario, args.nodes, args.elements, args.tool_mesh,
                                 args.trajectories, args.steps)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = run(args)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        msg = " ".join(str(exc).split())
        print(f"manugrip: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    for item in manifest.outputs:
        print(item["path"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
