#!/usr/bin/env python3
"""
Entry script.

    python scripts/run_pipeline.py <command> [flags]      one CLI command
    python scripts/run_pipeline.py pipeline [flags]       gen-data -> train -> eval -> export

The pipeline mode runs the whole desk-scale workflow into one output
directory; every stage is the corresponding CLI command.
"""

import argparse
import os
import sys

# === Fix import path for local modules ===
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, project_root)

from src.app.cli import main as cli_main  # noqa: E402


def run_pipeline(argv) -> int:
    parser = argparse.ArgumentParser(description="gen-data -> train -> eval -> export-trajectories")
    parser.add_argument("--out_dir", default=os.path.join(project_root, "runs", "default"))
    parser.add_argument("--config", default=None, help="training config file")
    parser.add_argument("--episodes", default="400")
    parser.add_argument("--noise", default="0.1")
    parser.add_argument("--reward_mode", default="uniform", choices=["uniform", "preferred"])
    parser.add_argument("--eval_episodes", default="100")
    parser.add_argument("--steps", default="5", help="sampling steps K for eval and export")
    parser.add_argument("--mlflow_uri", default=None)
    parser.add_argument("--experiment", default="gtp-offline-rl")
    parser.add_argument("--seed", default="0")
    args = parser.parse_args(argv)

    data_path = os.path.join(args.out_dir, "dataset.txt")
    train_dir = os.path.join(args.out_dir, "train")
    final_ckpt = os.path.join(train_dir, "final.ckpt")

    # === STAGE 1: Dataset ===
    print("=== STAGE 1: dataset ===")
    code = cli_main([
        "gen-data", "--out", data_path, "--episodes", args.episodes, "--noise", args.noise,
        "--reward-mode", args.reward_mode, "--seed", args.seed,
    ])
    if code:
        return code

    # === STAGE 2: Training ===
    print("=== STAGE 2: training ===")
    train_args = ["train", "--data", data_path, "--out", train_dir, "--seed", args.seed,
                  "--experiment", args.experiment]
    if args.config:
        train_args += ["--config", args.config]
    if args.mlflow_uri:
        train_args += ["--mlflow_uri", args.mlflow_uri]
    code = cli_main(train_args)
    if code:
        return code

    # === STAGE 3: Evaluation ===
    print("=== STAGE 3: evaluation ===")
    code = cli_main([
        "eval", "--checkpoint", final_ckpt, "--episodes", args.eval_episodes, "--steps", args.steps,
        "--out", os.path.join(args.out_dir, "eval.json"), "--seed", args.seed,
    ])
    if code:
        return code

    # === STAGE 4: Trajectories for plotting ===
    print("=== STAGE 4: trajectories ===")
    return cli_main([
        "export-trajectories", "--checkpoint", final_ckpt, "--n", "50", "--steps", args.steps,
        "--out", os.path.join(args.out_dir, "trajectories.csv"), "--seed", args.seed,
    ])


if __name__ == "__main__":
    argv = sys.argv[1:]
    if argv and argv[0] == "pipeline":
        sys.exit(run_pipeline(argv[1:]))
    sys.exit(cli_main(argv))
