"""``rptlab`` command line.

    rptlab <experiment> --config cfg.json --out DIR [--seed N] [--threads K]
    rptlab gen-data --kind sphere --d 2 --tau 1.0 --D 50 --n 20000 --out data.bin
    rptlab replay --summary DIR/summary.json --row I
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, ExperimentConfig
from .experiments import make_manifold, replay_row, run_experiment, write_results
from .io import DatasetParseError, write_dataset
from ..manifolds import sample_global

__all__ = ["build_parser", "main"]


def build_parser():
    parser = argparse.ArgumentParser(prog="rptlab", description="Random projection tree experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--threads", type=int, default=1)
    g = sub.add_parser("gen-data", help="sample a synthetic dataset to a file")
    g.add_argument("--kind", choices=["sphere", "flat", "torus"], required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--D", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--tau", type=float, default=1.0, help="sphere radius")
    g.add_argument("--extent", type=float, default=1.0, help="flat cube side")
    g.add_argument("--r0", type=float, default=1.0, help="torus tube radius")
    g.add_argument("--R0", type=float, default=3.0, help="torus center radius")
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=["bin", "csv"], default=None,
                   help="defaults to csv for a .csv suffix, binary otherwise")
    g.add_argument("--out", required=True)
    r = sub.add_parser("replay", help="recompute one row of a finished run")
    r.add_argument("--summary", required=True)
    r.add_argument("--row", type=int, required=True)
    return parser


def _run(args):
    cfg = ExperimentConfig.from_json(args.config)
    if cfg.experiment != args.command:
        raise ConfigError(f"config is for {cfg.experiment!r} but {args.command!r} was requested")
    if args.seed is not None:
        doc = cfg.to_dict()
        doc["base_seed"] = args.seed
        cfg = ExperimentConfig.from_dict(doc)
    rows, index = run_experiment(cfg, threads=max(1, args.threads))
    csv_path, summary_path = write_results(cfg, rows, index, args.out)
    print(f"{len(rows)} rows -> {csv_path}")
    print(f"summary -> {summary_path}")
    return 0


def _gen_data(args):
    ds = {"kind": args.kind, "tau": args.tau, "extent": args.extent, "r0": args.r0,
          "R0": args.R0, "noise_sigma": args.noise}
    d = 2 if args.kind == "torus" else args.d
    spec = make_manifold(ds, d, args.D, args.seed)
    pts = sample_global(spec, args.n, np.random.default_rng([args.seed, 1]))
    write_dataset(args.out, pts, args.format)
    print(f"wrote {pts.shape[0]}x{pts.shape[1]} {args.kind} points to {args.out}")
    return 0


def _replay(args):
    with open(args.summary) as fh:
        summary = json.load(fh)
    summary["_dir"] = str(Path(args.summary).resolve().parent)
    recomputed, recorded = replay_row(summary, args.row)
    print(json.dumps(recomputed, indent=2))
    if recorded is None:
        print("no results.csv found; nothing to compare", file=sys.stderr)
        return 0
    diff = {c: (recorded[c], recomputed[c]) for c in recomputed if recorded[c] != recomputed[c]}
    if diff:
        print(f"row {args.row} differs: {diff}", file=sys.stderr)
        return 1
    print(f"row {args.row} reproduced exactly")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-data":
            return _gen_data(args)
        if args.command == "replay":
            return _replay(args)
        return _run(args)
    except (ConfigError, DatasetParseError, OSError) as exc:
        print(f"rptlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
