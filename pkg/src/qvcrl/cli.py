"""Command-line entry point: ``qvcrl run | eval | gradcheck | plot``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from qvcrl.errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    from qvcrl.harness.config import FIELD_TYPES

    p.add_argument("--config", help="flat 'key = value' config file")
    for key in FIELD_TYPES:
        names = [f"--{key}"]
        if "_" in key:
            names.append(f"--{key.replace('_', '-')}")
        p.add_argument(*names, dest=key, default=None, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qvcrl", description="Variational-circuit DQN experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="train every seed and write per-seed + aggregate CSVs")
    _add_config_flags(run)

    ev = sub.add_parser("eval", help="greedy rollout of a saved model checkpoint")
    ev.add_argument("checkpoint")
    ev.add_argument("--env", required=True, choices=("cartpole", "blackjack"))
    ev.add_argument("--episodes", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--max-steps", "--max_steps", dest="max_steps", type=int, default=200)

    gc = sub.add_parser("gradcheck", help="parameter-shift vs finite-difference report")
    gc.add_argument("--circuits", type=int, default=200)
    gc.add_argument("--hybrid-models", "--hybrid_models", dest="hybrid_models", type=int, default=20)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--h", type=float, default=1e-6)
    gc.add_argument("--tol", type=float, default=1e-5)

    pl = sub.add_parser("plot", help="aggregate CSVs -> SVG")
    pl.add_argument("inputs", nargs="+", help="aggregate CSV files")
    pl.add_argument("--labels", help="comma-separated legend labels (default: file names)")
    pl.add_argument("--title", default="")
    pl.add_argument("-o", "--output", required=True)
    return parser


def cmd_run(args) -> int:
    from qvcrl.harness.config import FIELD_TYPES, build_config
    from qvcrl.harness.experiment import run_experiment
    from qvcrl.harness.metrics import final_moving_averages

    overrides = {k: getattr(args, k) for k in FIELD_TYPES}
    config = build_config(args.config, overrides)
    result = run_experiment(config)
    for path in result.run_csvs:
        print(path)
    print(result.aggregate_csv)
    if config.episodes >= 50:
        finals = final_moving_averages(result.run_csvs)
        print(f"final ma50 per seed: {', '.join(f'{v:.4g}' for v in finals)}; median {np.median(finals):.4g}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from qvcrl import envs
    from qvcrl.agent import greedy_rollout
    from qvcrl.models import QModel

    model = QModel.load(args.checkpoint)
    env = envs.make_env(args.env, envs.make_rng(args.seed), args.max_steps)
    if model.n_inputs != env.obs_len or model.n_actions != env.action_count:
        raise ConfigError(f"checkpoint shape ({model.n_inputs} -> {model.n_actions}) does not fit {args.env}")
    rewards = greedy_rollout(env, model, args.episodes)
    print(f"episodes {len(rewards)} mean_reward {np.mean(rewards):.6g} std {np.std(rewards):.6g}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from qvcrl.gradcheck import hybrid_model_deviations, random_circuit_deviations

    rng = np.random.default_rng(args.seed)
    circ = random_circuit_deviations(rng, args.circuits, args.h)
    hyb = hybrid_model_deviations(rng, args.hybrid_models, args.h)
    worst = max([0.0, *circ, *hyb])
    print(f"random circuits: {len(circ)}  max |shift - finite diff| = {max(circ, default=0.0):.3e}")
    print(f"hybrid models:   {len(hyb)}  max |shift - finite diff| = {max(hyb, default=0.0):.3e}")
    ok = worst <= args.tol
    print(f"{'PASS' if ok else 'FAIL'} (tolerance {args.tol:g})")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_plot(args) -> int:
    from qvcrl.harness.metrics import read_aggregate_csv
    from qvcrl.harness.svg import emit_plot

    labels = args.labels.split(",") if args.labels else [Path(p).stem.removesuffix("_aggregate") for p in args.inputs]
    if len(labels) != len(args.inputs):
        raise ConfigError("need exactly one label per input")
    series = [(label, read_aggregate_csv(p)) for label, p in zip(labels, args.inputs)]
    emit_plot(series, args.output, args.title)
    print(args.output)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "eval": cmd_eval, "gradcheck": cmd_gradcheck, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"qvcrl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"qvcrl: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
