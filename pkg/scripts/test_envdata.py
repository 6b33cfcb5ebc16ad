# test_envdata.py
import os
import sys
import tempfile

import numpy as np
import pandas as pd
from scipy import stats

project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, project_root)

from src.data.dataset import OfflineDataset
from src.data.generate_data import gen_dataset, generate_dataset
from src.data.load_data import load_data, write_dataset
from src.data.multigoal_env import env_step, make_env_spec, reached_goal, scripted_action
from src.data.preprocess import compute_normalization, denormalize_states, normalize_states, sample_batch
from src.models.evaluate import RandomPolicy, ScriptedPolicy, evaluate_policy, rollout_episodes
from src.utils.errors import ConfigError, DatasetParseError, DatasetValidationError
from src.utils.utils import make_rng

SPEC = make_env_spec()


def _small_dataset(n=10, seed=0) -> OfflineDataset:
    full = generate_dataset(SPEC, 8, 0.1, seed)
    states = full.states[:n]
    mean, std = compute_normalization(states)
    return OfflineDataset(
        states=states, actions=full.actions[:n], rewards=full.rewards[:n],
        next_states=full.next_states[:n], terminals=full.terminals[:n],
        env_spec=SPEC, seed=seed, state_mean=mean, state_std=std, episode_goals=[0],
    )


def _episode_starts(ds: OfflineDataset) -> np.ndarray:
    ends = np.flatnonzero(ds.terminals)
    return np.concatenate([[0], ends[:-1] + 1])


# === ENVIRONMENT ===

def test_zero_action_keeps_state():
    s = np.array([0.02, -0.03])
    nxt, reward, terminal = env_step(SPEC, s, np.zeros(2))
    assert np.array_equal(nxt, s) and reward == 0.0 and terminal is False


def test_step_into_goal_terminates():
    s = np.array([0.7, 0.7])
    a = np.array([1.0, 1.0]) / np.sqrt(2)
    nxt, reward, terminal = env_step(SPEC, s, a)
    assert terminal and reward == 1.0
    assert reached_goal(SPEC, nxt)[0] == 0

    preferred = make_env_spec(reward_mode="preferred", preferred_goal=0)
    _, r0, _ = env_step(preferred, s, a)
    _, r1, _ = env_step(preferred, np.array([-0.7, 0.7]), np.array([-1.0, 1.0]) / np.sqrt(2))
    assert r0 == 1.0 and r1 == 0.2


def test_dynamics_are_linear_without_clamp():
    rng = make_rng(1)
    s = rng.uniform(-0.5, 0.5, size=(100, 2))
    a = rng.uniform(-1.0, 1.0, size=(100, 2))
    nxt, _, _ = env_step(SPEC, s, a)
    assert np.allclose(nxt - s, 0.1 * a, rtol=0, atol=1e-15)


def test_dynamics_clamp_to_box():
    nxt, _, _ = env_step(SPEC, np.array([[0.98, 0.0]]), np.array([[1.0, 0.0]]))
    assert np.array_equal(nxt, [[1.0, 0.0]])
    nxt, _, _ = env_step(SPEC, np.array([[0.0, 0.0]]), np.array([[5.0, -5.0]]))
    assert np.allclose(nxt, [[0.1, -0.1]])


def test_env_spec_validation():
    for kwargs in (
        {"goals": []},
        {"goals": [(0.5, 0.5), (0.5, 0.5)]},
        {"goals": [(1.5, 0.0)]},
        {"goal_radius": 0.9},
        {"horizon": 0},
        {"preferred_goal": 4},
    ):
        try:
            make_env_spec(**kwargs)
            raise AssertionError(f"spec {kwargs} accepted")
        except ConfigError:
            pass


def test_scripted_action_points_at_goal():
    a = scripted_action(SPEC, np.zeros((4, 2)), np.arange(4), 0.0, make_rng(0))
    assert np.allclose(a, SPEC.goal_array / np.linalg.norm(SPEC.goal_array, axis=1, keepdims=True))


# === GENERATION ===

def test_noise_free_episodes_reach_their_goal():
    spec = make_env_spec(horizon=100)
    ds = gen_dataset(spec, 8, 0.0, make_rng(2))
    assert int(ds.terminals.sum()) == 8
    ends = ds.next_states[ds.terminals]
    assert np.array_equal(reached_goal(spec, ends), np.array(ds.episode_goals))


def test_round_robin_goal_counts():
    ds = generate_dataset(SPEC, 103, 0.1, 3)
    counts = np.bincount(ds.episode_goals, minlength=4)
    assert counts.sum() == 103
    assert counts.max() - counts.min() <= 1
    assert ds.episode_goals[:5] == [0, 1, 2, 3, 0]


def test_start_actions_form_four_clusters():
    ds = generate_dataset(SPEC, 400, 0.1, 0)
    assert int(ds.terminals.sum()) == 400
    first = ds.actions[_episode_starts(ds)]
    angles = np.degrees(np.arctan2(first[:, 1], first[:, 0]))
    modes = np.array([45.0, 135.0, -135.0, -45.0])
    diff = np.abs((angles[:, None] - modes[None, :] + 180.0) % 360.0 - 180.0)
    nearest = diff.argmin(axis=1)
    assert np.mean(diff.min(axis=1) <= 15.0) >= 0.95
    assert np.array_equal(np.bincount(nearest, minlength=4), [100, 100, 100, 100])


def test_generation_errors():
    for n, noise in ((3, 0.1), (8, -0.1)):
        try:
            gen_dataset(SPEC, n, noise, make_rng(0))
            raise AssertionError("invalid generation accepted")
        except ConfigError:
            pass


def test_generation_is_deterministic():
    assert generate_dataset(SPEC, 12, 0.1, 5).equals(generate_dataset(SPEC, 12, 0.1, 5))
    assert not generate_dataset(SPEC, 12, 0.1, 5).equals(generate_dataset(SPEC, 12, 0.1, 6))


def test_records_rebuild_the_dataset():
    ds = generate_dataset(SPEC, 8, 0.1, 3)
    records = list(ds)
    assert len(records) == len(ds)
    assert sum(tr.terminal for tr in records) == int(ds.terminals.sum())
    rebuilt = OfflineDataset.from_transitions(
        records, env_spec=ds.env_spec, seed=ds.seed, state_mean=ds.state_mean,
        state_std=ds.state_std, episode_goals=ds.episode_goals,
    )
    assert rebuilt.equals(ds)
    try:
        OfflineDataset.from_transitions([], env_spec=SPEC, seed=0, state_mean=np.zeros(2), state_std=np.ones(2))
        raise AssertionError("empty record list accepted")
    except ConfigError:
        pass


# === BATCHES ===

def test_sample_batch_is_uniform():
    ds = _small_dataset(n=40)
    n = len(ds)
    rng = make_rng(6)
    counts = np.zeros(n)
    draws = 0
    while draws < 100_000:
        batch = sample_batch(ds, n, rng)
        counts += np.bincount(batch.indices, minlength=n)
        draws += n
    expected = draws / n
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    df = n - 1
    assert abs(chi2 - df) < 3 * np.sqrt(2 * df), chi2
    assert stats.chi2.sf(chi2, df) > 1e-3


def test_sample_batch_contents():
    ds = _small_dataset(n=10)
    batch = sample_batch(ds, 7, make_rng(7))
    idx = batch.indices
    assert np.allclose(batch.states, (ds.states[idx] - ds.state_mean) / ds.state_std)
    assert np.allclose(batch.next_states, (ds.next_states[idx] - ds.state_mean) / ds.state_std)
    assert np.array_equal(batch.actions, ds.actions[idx])
    assert np.array_equal(batch.rewards, ds.rewards[idx])

    again = sample_batch(ds, 7, make_rng(7))
    assert np.array_equal(again.indices, idx) and np.array_equal(again.states, batch.states)

    for size in (0, 11):
        try:
            sample_batch(ds, size, make_rng(7))
            raise AssertionError(f"batch size {size} accepted")
        except ConfigError:
            pass


def test_normalization_round_trip():
    ds = _small_dataset(n=10)
    s = make_rng(8).uniform(-1, 1, size=(50, 2))
    back = denormalize_states(normalize_states(s, ds.state_mean, ds.state_std), ds.state_mean, ds.state_std)
    assert np.allclose(back, s, rtol=0, atol=1e-12)


def test_constant_dimension_gets_unit_std():
    mean, std = compute_normalization(np.array([[1.0, 0.5], [3.0, 0.5]]))
    assert np.array_equal(mean, [2.0, 0.5]) and np.array_equal(std, [1.0, 1.0])


def test_empty_dataset_rejected():
    try:
        OfflineDataset(
            states=np.zeros((0, 2)), actions=np.zeros((0, 2)), rewards=np.zeros(0),
            next_states=np.zeros((0, 2)), terminals=np.zeros(0, dtype=bool),
            env_spec=SPEC, seed=0, state_mean=np.zeros(2), state_std=np.ones(2),
        )
        raise AssertionError("empty dataset accepted")
    except ConfigError:
        pass


# === FILE FORMAT ===

def test_dataset_round_trip():
    with tempfile.TemporaryDirectory() as tmp:
        for ds in (_small_dataset(n=10), generate_dataset(make_env_spec(reward_mode="preferred"), 20, 0.3, 9)):
            path = os.path.join(tmp, "data.txt")
            write_dataset(path, ds)
            loaded = load_data(path)
            assert loaded.equals(ds)
            assert loaded.terminals.dtype == bool
            assert len(loaded) == len(ds) and loaded[3].reward == ds[3].reward


def _write_lines(tmp, lines, name="bad.txt"):
    path = os.path.join(tmp, name)
    with open(path, "w") as f:
        f.write("".join(lines))
    return path


def _dataset_lines(tmp):
    path = os.path.join(tmp, "ok.txt")
    write_dataset(path, _small_dataset(n=10))
    with open(path) as f:
        return f.readlines()


def test_parse_errors_carry_line_numbers():
    with tempfile.TemporaryDirectory() as tmp:
        lines = _dataset_lines(tmp)
        cases = [
            ([], 1),
            (["not a dataset\n"] + lines[1:], 1),
            (lines[:2] + ["# wrong: 1\n"] + lines[3:], 3),
            (lines[:9] + ["1,2,3\n"] + lines[10:], 10),
            (lines[:8] + ["0.0,0.0,x,0.0,0.0,0.0,0.0,0\n"] + lines[9:], 9),
            (lines[:7], 8),
        ]
        for body, line in cases:
            try:
                load_data(_write_lines(tmp, body))
                raise AssertionError(f"malformed file accepted (expected line {line})")
            except DatasetParseError as e:
                assert e.line == line, (e.line, line)


def test_validation_errors_name_the_record():
    with tempfile.TemporaryDirectory() as tmp:
        lines = _dataset_lines(tmp)
        fields = lines[10].rstrip("\n").split(",")
        fields[2] = "1.5"
        bad = lines[:10] + [",".join(fields) + "\n"] + lines[11:]
        try:
            load_data(_write_lines(tmp, bad))
            raise AssertionError("action outside the box accepted")
        except DatasetValidationError as e:
            assert e.record == 3
            assert "record 3" in str(e)

        # the same file loads when validation is off
        assert len(load_data(_write_lines(tmp, bad, "raw.txt"), validate=False)) == 10


def test_normalization_mismatch_detected():
    ds = _small_dataset(n=10)
    ds.state_mean = ds.state_mean + 1e-3
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "data.txt")
        write_dataset(path, ds)
        try:
            load_data(path)
            raise AssertionError("stale normalization accepted")
        except DatasetValidationError:
            pass


def test_missing_file():
    try:
        load_data("/nonexistent/data.txt")
        raise AssertionError("missing file accepted")
    except FileNotFoundError:
        pass


# === EVALUATION ===

def test_scripted_policy_hits_every_time():
    for goal in range(4):
        report = evaluate_policy(SPEC, ScriptedPolicy(SPEC, goal=goal), 20, 5, make_rng(10))
        assert report.goal_hit_rate == 1.0
        assert report.mean_return == 1.0
        assert report.per_goal_share[goal] == 1.0
        assert report.n_sample_steps == 5


def test_random_policy_rarely_hits():
    report = evaluate_policy(SPEC, RandomPolicy(), 2000, 1, make_rng(11))
    assert report.goal_hit_rate < 0.01
    assert np.isclose(sum(report.per_goal_share), report.goal_hit_rate)


def test_rollout_tables():
    episodes, steps = rollout_episodes(SPEC, ScriptedPolicy(SPEC, goal=2, noise=0.05), 6, 1, make_rng(12))
    assert list(episodes.columns) == ["episode", "return", "goal", "steps"]
    assert list(steps.columns) == ["episode", "step", "x", "y", "ax", "ay"]
    assert len(steps) == int(episodes["steps"].sum())
    assert np.all(episodes["goal"] == 2)
    first = steps[steps["step"] == 0]
    assert np.all(np.abs(first[["x", "y"]].to_numpy()) <= 0.05)

    again, again_steps = rollout_episodes(SPEC, ScriptedPolicy(SPEC, goal=2, noise=0.05), 6, 1, make_rng(12))
    pd.testing.assert_frame_equal(episodes, again)
    pd.testing.assert_frame_equal(steps, again_steps)
    try:
        rollout_episodes(SPEC, RandomPolicy(), 0, 1, make_rng(0))
        raise AssertionError("zero episodes accepted")
    except ConfigError:
        pass


def main():
    print("=== envdata: environment, generation, batches, file format, evaluation ===")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        fn()
        print(f"✅ {name}")
    print(f"\n✅ {len(tests)} envdata tests passed")


if __name__ == "__main__":
    main()
