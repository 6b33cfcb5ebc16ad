#!/usr/bin/env python3
"""
Command-line entry point.

    gen-data             scripted multi-goal dataset
    train                actor-critic training with checkpoints and metrics
    eval                 policy evaluation report
    sample               actions sampled at one state
    diag-order           solver-order test of the surrogate objective gap
    diag-identity        identity residual on closed-form maps
    export-trajectories  sampled rollouts as CSV

Exit codes: 0 success, 1 diagnostic failed, 2 usage / config / data /
checkpoint error, 3 numeric divergence.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.data.generate_data import generate_dataset
from src.data.load_data import load_data, write_dataset
from src.data.multigoal_env import make_env_spec
from src.diagnostics.identity import run_identity_diagnostic
from src.diagnostics.order import run_order_diagnostic
from src.models.evaluate import rollout_episodes, summarize_episodes
from src.models.train import run
from src.serving.inference import load_policy
from src.utils.config import load_train_config
from src.utils.errors import (
    CheckpointError,
    ConfigError,
    DatasetParseError,
    DatasetValidationError,
    DivergenceError,
    NumericError,
)
from src.utils.tracking import RunTracker
from src.utils.utils import EVAL_STREAM, SAMPLE_STREAM, make_rng, setup_logger

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3

logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _out_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# === COMMANDS ===

def cmd_gen_data(args) -> int:
    spec = make_env_spec(reward_mode=args.reward_mode, horizon=args.horizon)
    print(f"🔄 Generating {args.episodes} episodes (noise={args.noise}, reward_mode={args.reward_mode})...")
    dataset = generate_dataset(spec, args.episodes, args.noise, args.seed)
    _out_parent(args.out)
    write_dataset(args.out, dataset)

    counts = np.bincount(dataset.episode_goals, minlength=spec.n_goals)
    print(f"✅ Dataset written: {args.out}")
    print(f"   📊 {len(dataset)} transitions, episodes per goal: {counts.tolist()}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_train_config(args.config, seed=args.seed)
    print("🔄 Loading data...")
    dataset = load_data(args.data)
    print(f"✅ Data loaded: {len(dataset)} transitions")

    os.makedirs(args.out, exist_ok=True)
    setup_logger("src", os.path.join(args.out, "train.log"), level=logging.INFO)

    tracker = RunTracker(args.mlflow_uri or os.getenv("MLFLOW_TRACKING_URI"), args.experiment)
    print(f"🚀 Training for {config.K_total} iterations (eta={config.eta})...")
    with tracker:
        try:
            path = run(
                config, dataset, args.out, resume_from=args.resume, stop_at=args.stop_at,
                tracker=tracker, progress=args.progress,
            )
        except DivergenceError as err:
            print(f"❌ Training diverged at iteration {err.iteration}", file=sys.stderr)
            print(f"   Diagnostic dump: {err.dump_path}", file=sys.stderr)
            return EXIT_DIVERGED
    print(f"✅ Checkpoint: {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    policy, ckpt = load_policy(args.checkpoint)
    rng = make_rng(args.seed, EVAL_STREAM)
    episodes, _ = rollout_episodes(ckpt.env_spec, policy, args.episodes, args.steps, rng)
    report = summarize_episodes(ckpt.env_spec, episodes, args.steps)

    out = args.out or os.path.splitext(args.checkpoint)[0] + "_eval.json"
    _out_parent(out)
    with open(out, "w") as f:
        f.write(report.model_dump_json(indent=2) + "\n")
    episodes_path = os.path.splitext(out)[0] + "_episodes.csv"
    episodes.to_csv(episodes_path, index=False, lineterminator="\n")

    print("📊 Evaluation report")
    print(f"   mean_return:    {report.mean_return:.4f}")
    print(f"   goal_hit_rate:  {report.goal_hit_rate:.4f}")
    print(f"   per_goal_share: {[round(s, 4) for s in report.per_goal_share]}")
    print(f"   K = {report.n_sample_steps}, episodes = {report.n_episodes}")
    print(f"✅ Report: {out}  episodes: {episodes_path}")
    return EXIT_OK


def cmd_sample(args) -> int:
    state = _float_list(args.state)
    if len(state) != 2:
        raise ConfigError(f"--state needs two coordinates, got {len(state)}")
    policy, _ = load_policy(args.checkpoint)
    rng = make_rng(args.seed, SAMPLE_STREAM)
    actions = policy.act(np.tile(state, (args.n, 1)), args.steps, rng)

    _out_parent(args.out)
    pd.DataFrame(actions, columns=["ax", "ay"]).to_csv(args.out, index=False, lineterminator="\n")
    print(f"✅ {args.n} actions at state {state} written to {args.out}")
    return EXIT_OK


def cmd_diag_order(args) -> int:
    result = run_order_diagnostic(
        args.scheme, args.h_list, mc_samples=args.mc_samples, seed=args.seed,
        atoms=args.atoms, n_jobs=args.n_jobs,
    )
    _out_parent(args.out)
    result.table.to_csv(args.out, index=False, lineterminator="\n")
    print(result.table.to_string(index=False))
    print(f"📈 log-log slope ({args.scheme}): {result.slope:.4f}")
    print(f"✅ CSV: {args.out}")
    return EXIT_OK


def cmd_diag_identity(args) -> int:
    result = run_identity_diagnostic(
        args.case, samples=args.samples, seed=args.seed, negative_control=args.negative_control
    )
    status = "PASS" if result.passed else "FAIL"
    icon = "✅" if result.passed else "❌"
    print(f"{icon} identity ({result.case}{', negative control' if result.negative_control else ''}): "
          f"{status}, max residual {result.max_residual:.3e}")
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_export_trajectories(args) -> int:
    policy, ckpt = load_policy(args.checkpoint)
    rng = make_rng(args.seed, SAMPLE_STREAM, 1)
    _, steps = rollout_episodes(ckpt.env_spec, policy, args.n, args.steps, rng)

    _out_parent(args.out)
    steps.to_csv(args.out, index=False, lineterminator="\n")
    print(f"✅ {args.n} rollouts ({len(steps)} steps) written to {args.out}")
    return EXIT_OK


# === PARSER ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Flow-map trajectory policies for offline RL")
    parser.add_argument("--log-level", default="WARNING", help="logging level for stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0, help="seed threaded to every rng")
        p.set_defaults(func=fn)
        return p

    p = command("gen-data", cmd_gen_data, "generate the multi-goal offline dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", type=_positive_int, default=400)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--reward-mode", choices=["uniform", "preferred"], default="uniform")
    p.add_argument("--horizon", type=_positive_int, default=20)

    p = command("train", cmd_train, "train a policy")
    p.add_argument("--config", default=None, help="key = value config file (defaults when omitted)")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.add_argument("--stop-at", type=int, default=None, help="halt at this iteration")
    p.add_argument("--mlflow_uri", default=None, help="MLflow tracking URI or directory")
    p.add_argument("--experiment", default="gtp-offline-rl")
    p.add_argument("--progress", action="store_true")
    # train re-reads the seed from its config unless given explicitly
    p.set_defaults(seed=None)

    p = command("eval", cmd_eval, "evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=_positive_int, default=100)
    p.add_argument("--steps", type=_positive_int, default=5)
    p.add_argument("--out", default=None)

    p = command("sample", cmd_sample, "sample actions at one state")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--state", required=True, help="x,y")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--steps", type=_positive_int, default=5)
    p.add_argument("--out", required=True)

    p = command("diag-order", cmd_diag_order, "solver-order test of the objective gap")
    p.add_argument("--scheme", choices=["euler", "heun"], required=True)
    p.add_argument("--h-list", type=_float_list, default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--mc-samples", type=_positive_int, default=100_000)
    p.add_argument("--atoms", type=_float_list, default=[-1.0, 1.0])
    p.add_argument("--n-jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("diag-identity", cmd_diag_identity, "identity residual on closed-form maps")
    p.add_argument("--case", choices=["constant", "linear"], required=True)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--negative-control", action="store_true")

    p = command("export-trajectories", cmd_export_trajectories, "export sampled rollouts")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=_positive_int, default=10)
    p.add_argument("--steps", type=_positive_int, default=5)
    p.add_argument("--out", required=True)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors
        return int(e.code or 0)
    setup_logger("src", level=args.log_level.upper())

    try:
        return args.func(args)
    except (ConfigError, CheckpointError, DatasetParseError, DatasetValidationError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"❌ Numeric failure: {e}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
