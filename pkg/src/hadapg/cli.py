"""Command-line entry point: ``hadapg {run,mab,audit}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import ExperimentSpec, InvalidSpec, IoFailure, run_experiment

EXIT_OK, EXIT_AUDIT_FAILED, EXIT_INPUT_ERROR = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hadapg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, iters=500, instances=1):
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--iters", type=int, default=iters)
        p.add_argument("--instances", type=int, default=instances)
        p.add_argument("--out", type=Path, default=Path("results"))
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--tol", type=float, default=1e-8, help="audit tolerance")
        return p

    p = common(sub.add_parser("run", help="Hadamard PG on random or given MDPs, with audit"))
    p.add_argument("--states", type=int, default=4)
    p.add_argument("--actions", type=int, default=3)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=None, help="not accepted; step size comes from kappa")
    p.add_argument("--mdp-file", type=Path, default=None)

    p = common(sub.add_parser("mab", help="bandit comparison of Hadamard PG, softmax PG, softmax NPG"),
               iters=1000, instances=10)
    p.add_argument("--arms", type=int, nargs="+", default=[2, 5, 20, 50])
    p.add_argument("--eta", type=float, default=0.4)

    p = common(sub.add_parser("audit", help="re-audit a trace JSON written by `run`"))
    p.add_argument("trace", type=Path)
    return parser


def spec_from_args(args) -> ExperimentSpec:
    base = dict(out=args.out, seed=args.seed, iterations=args.iters, instances=args.instances,
                format=args.format, tol=args.tol)
    if args.command == "run":
        return ExperimentSpec(mode="mdp-run", num_states=args.states, num_actions=args.actions,
                              gamma=args.gamma, kappa=args.kappa, eta=args.eta,
                              mdp_file=args.mdp_file, **base)
    if args.command == "mab":
        return ExperimentSpec(mode="mab-compare", arms=tuple(args.arms), eta=args.eta, kappa=None, **base)
    return ExperimentSpec(mode="audit", trace_file=args.trace, **base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        written, passed = run_experiment(spec_from_args(args))
    except (InvalidSpec, IoFailure) as exc:
        print(f"hadapg: error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    for path in written:
        print(path)
    if not passed:
        print("hadapg: audit failed", file=sys.stderr)
        return EXIT_AUDIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
