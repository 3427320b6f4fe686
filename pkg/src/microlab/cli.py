"""Command-line entry point.

    microlab simulate lmf --seed 3 --set n_events=200000 --out runs/lmf
    microlab execute --set kernel=exponential --set alpha=2
    microlab theory response --config theory.yaml

Each subcommand maps to a family of operations; ``--config`` reads a YAML
experiment file and ``--set key=value`` overrides single parameters. The
output root defaults to ``$MICROLAB_OUT`` (or ./microlab-out).
"""
from __future__ import annotations

import argparse
import sys

import yaml

from .experiment import OPERATIONS, ExperimentError, UsageError, load_config, run_experiment

GROUPS = {
    "simulate": "simulate",
    "estimate": "estimate",
    "theory": "theory",
    "spread": "spread",
    "bookshape": "bookshape",
    "execute": "execute",
    "mech-impact": "mech_impact",
    "phase": "phase",
    "ingest": "ingest",
}


def _kinds(prefix: str) -> list[str]:
    return sorted(n.split(".", 1)[1] for n in OPERATIONS if n.split(".", 1)[0] == prefix)


def _parse_set(items) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise UsageError(f"--set expects key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = yaml.safe_load(v)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="microlab", description="Order-flow and impact experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd, prefix in GROUPS.items():
        kinds = _kinds(prefix)
        sp = sub.add_parser(cmd, help=f"operations: {', '.join(kinds)}")
        sp.add_argument("kind", nargs="?", choices=kinds, default=kinds[0] if len(kinds) == 1 else None)
        sp.add_argument("--seed", type=int, action="append",
                        help="root seed; repeat for a seed sweep")
        sp.add_argument("--config", help="YAML experiment file")
        sp.add_argument("--out", help="artifact directory")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a parameter")
        sp.set_defaults(prefix=prefix)
    sub.add_parser("ops", help="list operations")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "ops":
        for name in sorted(OPERATIONS):
            print(f"{name}\t{OPERATIONS[name].doc}")
        return 0
    try:
        cfg = load_config(args.config) if args.config else {}
        op = cfg.get("operation")
        if args.kind:
            want = f"{args.prefix}.{args.kind}"
            if op and op != want:
                raise UsageError(f"config operation {op!r} does not match {want!r}")
            op = want
        if op is None:
            raise UsageError(f"{args.command}: choose one of {', '.join(_kinds(args.prefix))}")
        if op.split(".", 1)[0] != args.prefix:
            raise UsageError(f"operation {op!r} does not belong to {args.command!r}")
        cfg["operation"] = op
        cfg["params"] = {**(cfg.get("params") or {}), **_parse_set(args.set)}
        if args.seed:
            cfg.pop("seed", None)
            cfg["seeds"] = args.seed
        path = run_experiment(cfg, out=args.out)
    except UsageError as e:
        print(f"microlab: usage error: {e}", file=sys.stderr)
        return 2
    except (ExperimentError, OSError, ValueError) as e:
        print(f"microlab: error: {e}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
