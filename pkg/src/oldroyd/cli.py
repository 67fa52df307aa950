"""Command-line front end: one subcommand per experiment.

    oldroyd-experiment decay --config decay.yaml --out out/decay --seed 3

Exit status is 0 only if every verdict in the report is PASS.
"""

from __future__ import annotations

import argparse
import sys

from oldroyd.experiments import EXPERIMENTS, config_from_dict, load_config, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oldroyd-experiment", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH", help="YAML configuration file")
        p.add_argument("--out", metavar="DIR", help="output directory")
        p.add_argument("--seed", type=int, help="data seed")
        p.add_argument("--grid", type=int, metavar="P", help="points per axis")
        p.add_argument("--dim", type=int, choices=(2, 3), help="space dimension")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"out_dir": args.out, "seed": args.seed, "grid": args.grid, "dim": args.dim}
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
            if cfg.experiment != args.experiment:
                print(f"error: config is for {cfg.experiment!r}, not {args.experiment!r}", file=sys.stderr)
                return 2
        else:
            cfg = config_from_dict({"experiment": args.experiment}, **overrides)
        report = run(cfg)
    except (ValueError, OSError) as err:
        print(f"error [{args.experiment}]: {err}", file=sys.stderr)
        return 2
    sys.stdout.write(report.text())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
