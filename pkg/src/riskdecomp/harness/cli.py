"""Command line entry point: ``riskdecomp run|list-presets|report``."""

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, coerce, load_config
from .presets import PRESETS
from .report import emit_report
from .results import read_table
from .runner import run_experiment

DEFAULT_OUT = "results"


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="riskdecomp",
        description="Excess-risk decomposition experiments (standard / variance / bias training).")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a key=value config file")
    run.add_argument("target", help="preset name or path to a config file")
    run.add_argument("--trials", type=int, help="number of trials (default: preset value)")
    run.add_argument("--seed", type=int, help="master seed (default 0)")
    run.add_argument("--out", help=f"output directory (default ./{DEFAULT_OUT})")
    run.add_argument("--svg", action="store_true", default=None, help="also write SVG charts")
    run.add_argument("--threads", type=int, help="worker threads for trials (default 1)")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a preset parameter; may be repeated")

    sub.add_parser("list-presets", help="list registered presets")

    rep = sub.add_parser("report", help="summarize result directories")
    rep.add_argument("directory", help="a preset output directory or a parent of several")
    return parser


def _run(args):
    target = Path(args.target)
    if target.is_file():
        values = load_config(target)
    else:
        values = {"preset": args.target}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = coerce(value)
    flags = {"trials": args.trials, "seed": args.seed, "out": args.out, "svg": args.svg,
             "threads": args.threads}
    values.update({k: v for k, v in flags.items() if v is not None})
    values.setdefault("out", DEFAULT_OUT)
    cfg = ExperimentConfig.from_mapping(values)
    result = run_experiment(cfg)
    print((result.directory / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"wrote {result.directory}")


def _report(args):
    root = Path(args.directory)
    if (root / "trials.csv").is_file():
        dirs = [root]
    else:
        dirs = sorted(p.parent for p in root.glob("*/trials.csv"))
    if not dirs:
        raise ConfigError(f"no result tables under {root}")
    text = emit_report([read_table(d) for d in dirs], root / "summary.txt")
    print(text, end="")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            width = max(len(n) for n in PRESETS)
            for name, preset in PRESETS.items():
                print(f"{name:<{width}}  {preset.trials:>2} trials  {preset.description}")
        elif args.command == "run":
            _run(args)
        else:
            _report(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
