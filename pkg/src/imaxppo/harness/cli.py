"""Command line entry point.

    imaxppo train --config PATH [--resume PATH]
    imaxppo eval --checkpoint PATH --episodes N
    imaxppo verify [--suite NAME]
    imaxppo summarize DIR...

Exit status: 0 ok, 1 verification violation, 2 configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..config import ConfigError, load_config
from ..fnapprox.checkpoint import CheckpointError
from ..marl.trainer import TrainingError
from ..theory import SUITES

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imaxppo", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train every seed in the config")
    p.add_argument("--config", required=True)
    p.add_argument("--resume", help="trainer_state.npz (single seed) or a run directory")
    p.add_argument("--output-dir", help="override run.output_dir")
    p.add_argument("--deterministic-eval", action="store_true", help="greedy actions in the final evaluation")

    p = sub.add_parser("eval", help="win rate of a saved policy")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=12345)
    p.add_argument("--deterministic", action="store_true")

    p = sub.add_parser("verify", help="run a theory check suite")
    p.add_argument("--suite", default="chain", choices=SUITES)
    p.add_argument("--out", default=None, help="report path (default: print only)")

    p = sub.add_parser("summarize", help="CSV summary of finished runs")
    p.add_argument("dirs", nargs="+")
    p.add_argument("--out", default=None)
    return parser


def _train(args) -> int:
    from .runner import run_train

    cfg = load_config(args.config)
    manifest = run_train(cfg, args.output_dir, args.resume, args.deterministic_eval)
    print(json.dumps({"status": manifest.status, "config_hash": manifest.config_hash, "final": manifest.final}))
    return EXIT_OK


def _eval(args) -> int:
    from .evaluate import evaluate_winrate
    from .runner import load_policy_checkpoint

    cfg, agent, meta = load_policy_checkpoint(args.checkpoint)
    episodes = args.episodes if args.episodes is not None else cfg.run.eval_episodes
    if episodes < 1:
        raise ConfigError("--episodes must be >= 1")
    result = evaluate_winrate(agent.game, agent, episodes, args.seed, args.deterministic)
    print(json.dumps({"checkpoint": args.checkpoint, "iteration": meta.get("iteration"), **result.to_dict()}))
    return EXIT_OK


def _verify(args) -> int:
    from .verify import run_verify

    report = run_verify(args.suite, args.out)
    for c in report["checks"]:
        flag = "ok  " if c["violations"] == 0 else "FAIL"
        print(f"{flag} {c['check_name']:<32} trials={c['trials']:<4} violations={c['violations']:<3} worst_ratio={c['worst_ratio']}")
    return EXIT_OK if report["passed"] else EXIT_VIOLATION


def _summarize(args) -> int:
    from .summary import emit_summary

    sys.stdout.write(emit_summary(args.dirs, args.out))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"train": _train, "eval": _eval, "verify": _verify, "summarize": _summarize}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, CheckpointError, FileNotFoundError, FloatingPointError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
