"""Command-line entry point: ``gradient-gate <kind> --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .. import __version__
from ..densenet import ROTATIONS, TrainMode
from ..errors import ConfigError, GradientGateError
from ..gridworld import TrainMethod
from ..seeding import MAX_SEED
from ..tools import parse_number_list
from .config import KINDS, ExperimentConfig, apply_overrides, default_config, parse_config, save_config
from .experiments import execute
from .settings import LOG_FORMAT, get_settings

logger = logging.getLogger(__name__)


def _ints(text: str) -> list[int]:
    return parse_number_list(text, int)


def _floats(text: str) -> list[float]:
    return parse_number_list(text, float)


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= MAX_SEED:
        msg = f"seed must be in [0, 2**64), got {value}"
        raise ValueError(msg)
    return value


def _methods(text: str) -> list[str]:
    return [TrainMethod(item.strip()).value for item in text.split(",") if item.strip()]


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Nested config overrides from the kind-specific flags."""
    kind = args.command
    if kind == "toy":
        params = {"steps": args.steps, "alpha": args.alpha, "n_inits": args.inits}
    elif kind == "prop3":
        params = {"a_values": args.a, "n_per_segment": args.n_per_segment}
    elif kind == "gridworld":
        params = {
            "pairs": args.pairs,
            "temperatures": args.temperatures,
            "methods": args.methods,
            "same_task": True if args.same_task else None,
            "train": {"steps": args.steps},
        }
    elif kind == "mnist":
        params = {
            "rotations": args.rotation,
            "modes": args.mode,
            "seeds": args.seeds,
            "train_frac": args.train_frac,
            "data_dir": str(args.data_dir) if args.data_dir else None,
            "training": {"epochs": args.epochs, "batch": args.batch},
        }
    else:
        params = {"dims": args.dims, "sigmas": args.sigmas, "n": args.n}
    out = str(args.out) if args.out else None
    return {"seed": args.seed, "out": out, "params": params}


def run_command(args: argparse.Namespace) -> int:
    """Load (or default) the config, apply flag overrides and run it."""
    if args.config:
        config = parse_config(args.config)
        if config.kind != args.command:
            msg = f"{args.config} describes a {config.kind} experiment, not {args.command}"
            raise ConfigError(msg)
    else:
        logger.info("No --config given; using %s defaults", args.command)
        config = default_config(args.command)
    config = apply_overrides(config, _overrides(args))
    record = execute(config, workers=args.workers, progress=True if args.progress else None)
    print(f"{record.run_id}: {len(record.artifacts)} artifacts ({', '.join(record.artifacts)})")
    return 0


def create_config_command(args: argparse.Namespace) -> int:
    """Write a fully populated default config for one experiment kind."""
    config: ExperimentConfig = default_config(args.kind)
    path = save_config(config, args.output)
    print(f"Configuration created at: {path}")
    print(f"Run it with: gradient-gate {args.kind} --config {path}")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Experiment YAML file (defaults are used when omitted)")
    parser.add_argument("--seed", type=_seed, help="Override the master seed")
    parser.add_argument("--out", type=Path, help="Override the output directory")
    parser.add_argument("--workers", type=int, help="Worker processes for independent trials")
    parser.add_argument("--progress", action="store_true", help="Show progress bars")
    parser.set_defaults(func=run_command)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradient-gate",
        description="Cosine-gated auxiliary gradients: toy landscapes, gridworld, rotated MNIST, cosine statistics",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose debug logging")
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    toy = subparsers.add_parser("toy", help="Steepest descent on the 2-D toy landscapes")
    _add_common(toy)
    toy.add_argument("--steps", type=int, help="Descent steps per run (default: 600)")
    toy.add_argument("--alpha", type=float, help="Constant step size (default: 0.01)")
    toy.add_argument("--inits", type=int, help="Random inits per scenario (default: 100)")

    prop3 = subparsers.add_parser("prop3", help="Line integrals showing the gated field is not conservative")
    _add_common(prop3)
    prop3.add_argument("--a", type=_floats, help="Comma separated slopes, e.g. 1,2.5")
    prop3.add_argument("--n-per-segment", type=int, help="Midpoints per path segment (>= 1000)")

    grid = subparsers.add_parser("gridworld", help="Gated distillation from a Q-learning teacher")
    _add_common(grid)
    grid.add_argument("--pairs", type=int, help="Environment pairs (default: 50)")
    grid.add_argument("--steps", type=int, help="Student training steps (default: 10000)")
    grid.add_argument("--temperatures", type=_floats, help="Comma separated teacher temperatures")
    grid.add_argument("--methods", type=_methods, help=f"Comma separated methods from {[m.value for m in TrainMethod]}")
    grid.add_argument("--same-task", action="store_true", help="Train the teacher on the main environment")

    mnist = subparsers.add_parser("mnist", help="Rotated-MNIST auxiliary task with a two-head dense network")
    _add_common(mnist)
    mnist.add_argument(
        "--rotation",
        type=int,
        action="append",
        choices=ROTATIONS,
        help="Auxiliary rotation in degrees (repeatable)",
    )
    mnist.add_argument(
        "--mode",
        action="append",
        choices=[m.value for m in TrainMode],
        help="Training mode (repeatable)",
    )
    mnist.add_argument("--epochs", type=int, help="Epochs per run (default: 50)")
    mnist.add_argument("--batch", type=int, help="Mini-batch size (default: 128)")
    mnist.add_argument("--seeds", type=_ints, help="Comma separated run seeds")
    mnist.add_argument("--train-frac", type=float, help="Fraction of the training set to use")
    mnist.add_argument("--data-dir", type=Path, help="Directory with the MNIST IDX files")

    highdim = subparsers.add_parser("highdim", help="Cosine of random vector pairs versus dimension")
    _add_common(highdim)
    highdim.add_argument("--dims", type=_ints, help="Comma separated dimensions")
    highdim.add_argument("--sigmas", type=_floats, help="Comma separated noise scales")
    highdim.add_argument("--n", type=int, help="Pairs per (kind, d, sigma)")

    config_parser = subparsers.add_parser("create-config", help="Write a default experiment configuration")
    config_parser.add_argument("kind", choices=KINDS, help="Experiment kind")
    config_parser.add_argument(
        "-o",
        "--output",
        type=Path,
        default=Path("experiment.yaml"),
        help="Output configuration file path (default: experiment.yaml)",
    )
    config_parser.set_defaults(func=create_config_command)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Main CLI entry point; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 2

    settings = get_settings()
    level = logging.DEBUG if args.verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT)

    try:
        return args.func(args)
    except (GradientGateError, OSError, ValueError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
