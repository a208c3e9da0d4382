"""Command-line experiment runner.

Subcommands:

* ``model-check`` -- model bundle identities (curvature, radial flatness,
  holomorphy-criterion equivalence, Gaussian dbar defects).
* ``renorm``      -- one (backend, k, center) rescaling with chart, gauge,
  structure, and connection deviation reports.
* ``sweep``       -- a full k-ladder with limit extraction, rung distances,
  dbar defects, and transversality margins.
* ``zeroset``     -- zero locus, symplectic margin, and curvature estimate
  for the configured sections.
* ``report``      -- merge prior run outputs into one summary table.

Every run writes ``report.json``, per-table CSVs, and ``manifest.json``
into the output directory.  Exit status: 0 all configured thresholds pass,
1 a threshold failed, 2 invalid configuration, 3 numeric failure (partial
report written).
"""

import argparse
import sys

from .config import PRESET_NAMES, ConfigError, ExperimentConfig, default_thresholds, load_ini, preset
from .runner import run


def _add_common(sub):
    sub.add_argument("--config", help="INI experiment configuration file")
    sub.add_argument("--preset", choices=PRESET_NAMES, help="built-in configuration")
    sub.add_argument("--out", help="output directory (default: out)")
    sub.add_argument("--threads", type=int, help="worker threads (default: BARGMANN_LENS_THREADS or all cores)")
    sub.add_argument("--seed", type=int, help="seed for randomized selections")
    sub.add_argument("--k-ladder", help="comma- or space-separated powers, e.g. '4,16,64'")
    sub.add_argument("--center", help="chart center: 'origin', 'zero', or coordinates 'x,y[,x2,y2]'")
    sub.add_argument("--grid", help="points per axis, optionally with radius: '129' or '129@0.9'")
    sub.add_argument("--epsilon", type=float, help="relative near-zero threshold for margins")


def build_parser():
    parser = argparse.ArgumentParser(prog="bargmann-lens", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("model-check", "renorm", "sweep", "zeroset", "report"):
        _add_common(subs.add_parser(name))
    return parser


def _config_from_args(args):
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_ini(args.config, command=args.command)
        if cfg.command != args.command:
            cfg.command = args.command
            cfg.thresholds = cfg.thresholds or default_thresholds(args.command)
    elif args.preset:
        cfg = preset(args.preset, command=args.command)
    else:
        cfg = preset("model-check") if args.command == "model-check" else ExperimentConfig()
        cfg.command = args.command
        cfg.thresholds = default_thresholds(args.command)

    if args.out:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    if args.k_ladder:
        cfg.ladder = tuple(int(t) for t in args.k_ladder.replace(",", " ").split())
    if args.center:
        text = args.center.strip()
        if text in ("origin", "zero"):
            cfg.center = text
        else:
            cfg.center = tuple(float(t) for t in text.replace(",", " ").split())
    if args.grid:
        text = args.grid.strip()
        if "@" in text:
            pts, radius = text.split("@", 1)
            cfg.points_per_axis = int(pts)
            cfg.radius = float(radius)
        else:
            cfg.points_per_axis = int(text)
    if args.epsilon is not None:
        cfg.epsilon_rel = args.epsilon
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        cfg.validate()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        payload, status = run(cfg)
    except ConfigError as exc:
        # late config problems (family/center resolution) still mean status 2
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    failed = [r["name"] for r in payload.get("records", []) if r.get("passed") is False]
    if payload.get("error"):
        print(f"numeric failure: {payload['error']}", file=sys.stderr)
    elif failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
    print(f"{cfg.command}: status {status}, {len(payload.get('records', []))} records -> {cfg.out}/")
    return status


if __name__ == "__main__":
    sys.exit(main())
