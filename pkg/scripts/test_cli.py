# test_cli.py
import contextlib
import io
import json
import os
import struct
import sys
import tempfile

import pandas as pd

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, project_root)
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from run_pipeline import run_pipeline
from src.app.cli import EXIT_DIVERGED, EXIT_FAILED, EXIT_OK, EXIT_USAGE
from src.app.cli import main as cli_main

SMALL_CONFIG = """\
# small network, short run
hidden_dims = 16, 16
critic_hidden_dims = 16, 16
time_embed_dim = 4
batch_size = 32
K_total = 10
n_value_samples = 2
n_sample_steps_train = 2
n_sample_steps_eval = 2
eval_interval = 5
eval_episodes = 2
checkpoint_interval = 5
"""


def _run(*argv):
    """main() with stderr captured; returns (exit code, stderr text)."""
    err = io.StringIO()
    with contextlib.redirect_stderr(err):
        code = cli_main(["--log-level", "ERROR", *argv])
    return code, err.getvalue()


def _read(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _write(path, text):
    with open(path, "w") as f:
        f.write(text)
    return path


def _trained(tmp, extra_config=""):
    """Dataset plus a 10-iteration training run inside `tmp`; returns final.ckpt."""
    data = os.path.join(tmp, "data.txt")
    assert _run("gen-data", "--out", data, "--episodes", "8", "--seed", "0")[0] == EXIT_OK
    cfg = _write(os.path.join(tmp, "train.cfg"), SMALL_CONFIG + extra_config)
    out = os.path.join(tmp, "train")
    code, err = _run("train", "--config", cfg, "--data", data, "--out", out)
    assert code == EXIT_OK, err
    return os.path.join(out, "final.ckpt")


# === USAGE ERRORS ===

def test_usage_errors_exit_2():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "d.txt")
        assert _run("gen-data", "--out", out, "--episodes", "0")[0] == EXIT_USAGE
        assert _run("no-such-command")[0] == EXIT_USAGE
        assert _run("diag-order", "--scheme", "rk4", "--out", out)[0] == EXIT_USAGE
        assert _run("diag-order", "--scheme", "euler", "--h-list", "0.1,0.05", "--out", out)[0] == EXIT_USAGE
        assert not os.path.exists(out)


def test_config_errors_exit_2():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data.txt")
        assert _run("gen-data", "--out", data, "--episodes", "4")[0] == EXIT_OK

        unknown = _write(os.path.join(tmp, "unknown.cfg"), "eta = 0\nlearning_rate = 0.1\n")
        code, err = _run("train", "--config", unknown, "--data", data, "--out", os.path.join(tmp, "a"))
        assert code == EXIT_USAGE and "learning_rate" in err

        malformed = _write(os.path.join(tmp, "malformed.cfg"), "eta = 0\nbatch_size: 12\n")
        code, err = _run("train", "--config", malformed, "--data", data, "--out", os.path.join(tmp, "b"))
        assert code == EXIT_USAGE and "line 2" in err

        invalid = _write(os.path.join(tmp, "invalid.cfg"), "ema_rate = 0\n")
        assert _run("train", "--config", invalid, "--data", data, "--out", os.path.join(tmp, "c"))[0] == EXIT_USAGE


def test_missing_files_exit_2():
    with tempfile.TemporaryDirectory() as tmp:
        missing = os.path.join(tmp, "missing")
        assert _run("train", "--data", missing, "--out", os.path.join(tmp, "t"))[0] == EXIT_USAGE
        assert _run("train", "--config", missing, "--data", missing, "--out", os.path.join(tmp, "t"))[0] == EXIT_USAGE
        assert _run("eval", "--checkpoint", missing)[0] == EXIT_USAGE
        assert _run("sample", "--checkpoint", missing, "--state", "0,0", "--out", missing)[0] == EXIT_USAGE


def test_corrupt_dataset_exit_2():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data.txt")
        assert _run("gen-data", "--out", data, "--episodes", "2")[0] == EXIT_OK
        lines = _read(data).decode().splitlines(keepends=True)
        lines[9] = "0.1,0.2,oops,0.0,0.0,0.1,0.2,0\n"
        _write(data, "".join(lines))
        code, err = _run("train", "--data", data, "--out", os.path.join(tmp, "t"))
        assert code == EXIT_USAGE and "line 10" in err


# === GEN-DATA ===

def test_gen_data_is_byte_identical_per_seed():
    with tempfile.TemporaryDirectory() as tmp:
        a, b, c = (os.path.join(tmp, n) for n in ("a.txt", "b.txt", "c.txt"))
        for path, seed in ((a, "3"), (b, "3"), (c, "4")):
            assert _run("gen-data", "--out", path, "--episodes", "12", "--seed", seed)[0] == EXIT_OK
        assert _read(a) == _read(b)
        assert _read(a) != _read(c)
        assert _read(a).startswith(b"# gtp-dataset v1\n")


# === TRAIN / EVAL / SAMPLE / EXPORT ===

def test_train_smoke_run():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp)
        out = os.path.dirname(final)
        assert os.path.exists(final)
        assert os.path.exists(os.path.join(out, "ckpt_000005.ckpt"))
        assert os.path.exists(os.path.join(out, "train.log"))
        metrics = pd.read_csv(os.path.join(out, "metrics.csv"))
        assert len(metrics) == 10
        assert metrics["iteration"].tolist() == list(range(10))
        assert metrics["eval_return"].notna().sum() == 2


def test_train_bc_mode_has_unit_weights():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp, "eta = 0\n")
        metrics = pd.read_csv(os.path.join(os.path.dirname(final), "metrics.csv"))
        assert (metrics["mean_weight"] == 1.0).all()


def test_train_stop_and_resume():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp)
        data = os.path.join(tmp, "data.txt")
        cfg = os.path.join(tmp, "train.cfg")
        split = os.path.join(tmp, "split")
        assert _run("train", "--config", cfg, "--data", data, "--out", split, "--stop-at", "5")[0] == EXIT_OK
        assert not os.path.exists(os.path.join(split, "final.ckpt"))
        resume = os.path.join(split, "ckpt_000005.ckpt")
        assert _run("train", "--config", cfg, "--data", data, "--out", split, "--resume", resume)[0] == EXIT_OK
        assert _read(os.path.join(split, "final.ckpt")) == _read(final)


def test_train_divergence_exit_3():
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "data.txt")
        assert _run("gen-data", "--out", data, "--episodes", "8")[0] == EXIT_OK
        cfg = _write(os.path.join(tmp, "boom.cfg"), SMALL_CONFIG + "lr_actor = 1e300\nlr_critic = 1e300\n")
        out = os.path.join(tmp, "train")
        code, err = _run("train", "--config", cfg, "--data", data, "--out", out)
        assert code == EXIT_DIVERGED, err
        assert any(name.startswith("divergence_") for name in os.listdir(out))


def test_eval_writes_report_and_episodes():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp)
        for steps in ("1", "5"):
            out = os.path.join(tmp, f"eval_k{steps}.json")
            assert _run("eval", "--checkpoint", final, "--episodes", "4", "--steps", steps, "--out", out)[0] == EXIT_OK
            with open(out) as f:
                report = json.load(f)
            assert report["n_episodes"] == 4 and report["n_sample_steps"] == int(steps)
            assert 0.0 <= report["goal_hit_rate"] <= 1.0
            assert len(report["per_goal_share"]) == 4
            episodes = pd.read_csv(os.path.join(tmp, f"eval_k{steps}_episodes.csv"))
            assert len(episodes) == 4

        # default report path sits next to the checkpoint
        assert _run("eval", "--checkpoint", final, "--episodes", "2")[0] == EXIT_OK
        assert os.path.exists(os.path.splitext(final)[0] + "_eval.json")


def test_sample_actions():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp)
        out = os.path.join(tmp, "actions.csv")
        assert _run("sample", "--checkpoint", final, "--state", "0.5,-0.25", "--n", "50", "--out", out)[0] == EXIT_OK
        actions = pd.read_csv(out)
        assert list(actions.columns) == ["ax", "ay"] and len(actions) == 50
        assert actions.abs().max().max() <= 1.0

        again = os.path.join(tmp, "again.csv")
        assert _run("sample", "--checkpoint", final, "--state", "0.5,-0.25", "--n", "50", "--out", again)[0] == EXIT_OK
        assert _read(out) == _read(again)

        assert _run("sample", "--checkpoint", final, "--state", "0.5", "--out", out)[0] == EXIT_USAGE


def test_export_trajectories():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp)
        a, b = os.path.join(tmp, "a.csv"), os.path.join(tmp, "b.csv")
        for path in (a, b):
            assert _run("export-trajectories", "--checkpoint", final, "--n", "1", "--steps", "1",
                        "--out", path)[0] == EXIT_OK
        assert _read(a) == _read(b)
        steps = pd.read_csv(a)
        assert list(steps.columns) == ["episode", "step", "x", "y", "ax", "ay"]
        assert 1 <= len(steps) <= 20 and (steps["episode"] == 0).all()


def test_checkpoint_version_mismatch_exit_2():
    with tempfile.TemporaryDirectory() as tmp:
        final = _trained(tmp)
        payload = bytearray(_read(final))
        payload[8:12] = struct.pack("<I", 2)
        bad = os.path.join(tmp, "v2.ckpt")
        with open(bad, "wb") as f:
            f.write(bytes(payload))
        code, err = _run("eval", "--checkpoint", bad, "--episodes", "1")
        assert code == EXIT_USAGE and "version" in err


# === DIAGNOSTICS ===

def test_diag_identity_exit_codes():
    for case in ("constant", "linear"):
        assert _run("diag-identity", "--case", case, "--samples", "50")[0] == EXIT_OK
        assert _run("diag-identity", "--case", case, "--samples", "50", "--negative-control")[0] == EXIT_FAILED


def test_diag_order_single_atom():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "order.csv")
        code = _run("diag-order", "--scheme", "euler", "--h-list", "0.4,0.2,0.1", "--mc-samples", "200",
                    "--atoms", "0.5", "--out", out)[0]
        assert code == EXIT_OK
        table = pd.read_csv(out)
        assert list(table.columns) == ["h", "gap", "raw_gap", "scheme"]
        assert table["h"].tolist() == [0.4, 0.2, 0.1]
        assert (table["raw_gap"] < 1e-10).all()
        assert (table["gap"] < 1e-8).all()


def test_diag_order_two_atoms_runs():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "order.csv")
        code = _run("diag-order", "--scheme", "heun", "--h-list", "0.4,0.2,0.1", "--mc-samples", "500", "--out", out)[0]
        assert code == EXIT_OK
        table = pd.read_csv(out)
        assert (table["scheme"] == "heun").all() and (table["gap"] >= 0).all()


# === PIPELINE ===

def test_pipeline_mode():
    with tempfile.TemporaryDirectory() as tmp:
        cfg = _write(os.path.join(tmp, "train.cfg"), SMALL_CONFIG)
        out_dir = os.path.join(tmp, "run")
        with contextlib.redirect_stderr(io.StringIO()):
            code = run_pipeline([
                "--out_dir", out_dir, "--config", cfg, "--episodes", "8",
                "--eval_episodes", "2", "--steps", "2",
            ])
        assert code == EXIT_OK
        for name in ("dataset.txt", "train/final.ckpt", "eval.json", "eval_episodes.csv", "trajectories.csv"):
            assert os.path.exists(os.path.join(out_dir, name)), name


def main():
    print("=== cli: commands, exit codes, pipeline ===")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        fn()
        print(f"✅ {name}")
    print(f"\n✅ {len(tests)} cli tests passed")


if __name__ == "__main__":
    main()
