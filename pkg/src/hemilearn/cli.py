"""Command-line entry point: ``hemilearn {gen,run,sweep,verify,bounds}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    ALGORITHMS,
    INSTANCE_KINDS,
    build_instance,
    ConfigError,
    ExperimentConfig,
    load_config,
    rows_to_csv,
    run_trial,
    sweep,
    verify,
    write_csv,
)
from .core import InvalidInputError, read_instance, write_instance
from .instances import gen_synthetic_restaurants, write_items_csv
from .learner import predicted_bounds
from .response import DegenerateParameters, NOISE_KINDS

EXIT_OK, EXIT_USAGE, EXIT_VERIFY = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _globals(suppress: bool) -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--out", default=default, help="output path (stdout when omitted)")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def _instance_args(p: argparse.ArgumentParser, n_default=100) -> None:
    p.add_argument("--n", type=int, default=n_default)
    p.add_argument("--k", type=int, default=5, dest="K")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--r-in", type=float, default=0.1, dest="r_in")
    p.add_argument("--quantum", type=float, default=None, help="grid step for quantized instances")
    p.add_argument("--value", type=float, default=None, help="off-diagonal value for uniform instances")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hemilearn", description="Active learning of bounded hemimetrics.",
                     parents=[_globals(False)])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    g = _globals(True)

    p = sub.add_parser("gen", parents=[g], help="write an instance or items file")
    p.add_argument("--kind", required=True, choices=[k for k in INSTANCE_KINDS if k != "file"] + ["restaurants"])
    _instance_args(p)

    p = sub.add_parser("run", parents=[g], help="run a single trial and print one CSV row")
    p.add_argument("--algo", required=True, choices=ALGORITHMS)
    p.add_argument("--instance", help="instance file (overrides --kind)")
    p.add_argument("--kind", default="clustered", choices=INSTANCE_KINDS)
    p.add_argument("--items", help="items CSV for yelp-like kinds")
    _instance_args(p, n_default=None)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--noise", default="noise-free", choices=NOISE_KINDS)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--eta-bn", type=float, default=0.0, dest="eta_bn")
    p.add_argument("--policy", default="qclique", choices=("qclique", "qgreedy"))
    p.add_argument("--projection", default="fast", choices=("full", "fast", "none"))
    p.add_argument("--timing", action="store_true", help="record wall-clock time")

    p = sub.add_parser("sweep", parents=[g], help="run an experiment grid from a config file")
    p.add_argument("--config", required=True)

    p = sub.add_parser("verify", parents=[g], help="check projection optimality against oracles")
    p.add_argument("--n", type=int, default=4, help="largest item count (at most 6)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--skip-pivot", type=int, default=None, help="inject a fault by dropping this pivot")

    p = sub.add_parser("bounds", parents=[g], help="print a closed-form query bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True, dest="K")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--r-in", type=float, default=None, dest="r_in")
    p.add_argument("--quantum", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--sigma-max", type=float, default=None, dest="sigma_max")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _log(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def cmd_gen(args) -> int:
    if not args.out:
        raise UsageError("gen requires --out")
    if args.kind == "restaurants":
        write_items_csv(args.out, gen_synthetic_restaurants(args.seed))
    else:
        cfg = ExperimentConfig(kind=args.kind, n=args.n, K=args.K, r=args.r, r_in=args.r_in,
                               quantum=args.quantum, value=args.value, seed=args.seed)
        write_instance(args.out, build_instance(cfg, args.seed))
    _log(args, f"wrote {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    kind = "file" if args.instance else args.kind
    if kind == "file" and not args.instance:
        raise UsageError("--kind file needs --instance")
    n = args.n
    if n is None:
        n = read_instance(args.instance).n if args.instance else 100
    cfg = ExperimentConfig(
        kind=kind, n=n, K=args.K, r=args.r, r_in=args.r_in, quantum=args.quantum, value=args.value,
        instance=args.instance, items=args.items, algorithms=(args.algo,), eps=args.eps,
        delta=args.delta, noise_kind=args.noise, sigma=args.sigma, eta_bn=args.eta_bn,
        policy=args.policy, projection_mode=args.projection, seed=args.seed, record_timing=args.timing,
    )
    row = run_trial(cfg, args.algo, args.seed)
    _emit(rows_to_csv([row]), args.out)
    return EXIT_OK if row["status"] == "ok" else EXIT_VERIFY


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed_given:
        cfg.seed = args.seed
    out = args.out or cfg.out
    rows = sweep(cfg)
    if out:
        write_csv(rows, out)
        _log(args, f"wrote {len(rows)} rows to {out}")
    else:
        sys.stdout.write(rows_to_csv(rows))
    return EXIT_OK


def cmd_verify(args) -> int:
    rep = verify(args.n, args.trials, args.seed, skip_pivot=args.skip_pivot)
    text = str(rep) + "\n"
    if rep.ok:
        if not args.quiet:
            _emit(text, args.out)
        return EXIT_OK
    _emit(text, args.out)
    if args.out:
        print(rep.failures[0], file=sys.stderr)
    return EXIT_VERIFY


def cmd_bounds(args) -> int:
    value = predicted_bounds(args.n, args.K, args.r, eps=args.eps, r_in=args.r_in,
                             quantum=args.quantum, delta=args.delta, sigma_max=args.sigma_max)
    _emit(f"{value:.12g}\n", args.out)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "bounds": cmd_bounds}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = 0
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InvalidInputError, DegenerateParameters, FileNotFoundError) as exc:
        print(f"hemilearn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
