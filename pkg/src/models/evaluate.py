import logging
from typing import List, Protocol, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.data.multigoal_env import MultiGoalEnvSpec, env_step, reset, scripted_action
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)


class Policy(Protocol):
    def act(self, states: np.ndarray, n_steps: int, rng: np.random.Generator) -> np.ndarray:
        """Actions for raw (unnormalized) states."""


class EvaluationReport(BaseModel):
    mean_return: float
    goal_hit_rate: float
    per_goal_share: List[float]
    n_episodes: int
    n_sample_steps: int


class ScriptedPolicy:
    """Goal-seeking controller used to generate data; `goal` fixes the target."""

    def __init__(self, spec: MultiGoalEnvSpec, goal: int = 0, noise: float = 0.0):
        self.spec = spec
        self.goal = goal
        self.noise = noise

    def act(self, states, n_steps, rng):
        goals = np.full(states.shape[0], self.goal)
        return scripted_action(self.spec, states, goals, self.noise, rng)


class RandomPolicy:
    def act(self, states, n_steps, rng):
        return rng.uniform(-1.0, 1.0, size=states.shape)


def rollout_episodes(
    spec: MultiGoalEnvSpec,
    policy: Policy,
    n_episodes: int,
    n_sample_steps: int,
    rng: np.random.Generator,
    horizon: int = None,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Runs all episodes side by side until each terminates or hits the horizon.

    Returns:
        (episodes, steps): per-episode (episode, return, goal, steps) and
        per-step (episode, step, x, y, ax, ay) tables.
    """
    if n_episodes < 1:
        raise ConfigError(f"n_episodes must be >= 1, got {n_episodes}")
    if n_sample_steps < 1:
        raise ConfigError(f"sampling steps must be >= 1, got {n_sample_steps}")
    horizon = spec.horizon if horizon is None else horizon

    states = reset(spec, n_episodes, rng)
    active = np.ones(n_episodes, dtype=bool)
    returns = np.zeros(n_episodes)
    goals = np.full(n_episodes, -1)
    lengths = np.zeros(n_episodes, dtype=int)
    step_rows = []

    for step in range(horizon):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        actions = np.clip(policy.act(states[idx], n_sample_steps, rng), -1.0, 1.0)
        nxt, reward, terminal = env_step(spec, states[idx], actions)
        for j, ep in enumerate(idx):
            step_rows.append((ep, step, states[ep, 0], states[ep, 1], actions[j, 0], actions[j, 1]))

        states[idx] = nxt
        returns[idx] += reward
        lengths[idx] += 1
        done = idx[terminal]
        goals[done] = np.argmin(
            np.linalg.norm(states[done, None, :] - spec.goal_array[None, :, :], axis=2), axis=1
        )
        active[done] = False

    episodes = pd.DataFrame(
        {"episode": np.arange(n_episodes), "return": returns, "goal": goals, "steps": lengths}
    )
    steps = pd.DataFrame(step_rows, columns=["episode", "step", "x", "y", "ax", "ay"])
    return episodes, steps


def summarize_episodes(spec: MultiGoalEnvSpec, episodes: pd.DataFrame, n_sample_steps: int) -> EvaluationReport:
    n = len(episodes)
    goals = episodes["goal"].to_numpy()
    share = [float(np.sum(goals == g)) / n for g in range(spec.n_goals)]
    return EvaluationReport(
        mean_return=float(episodes["return"].mean()),
        goal_hit_rate=float(np.mean(goals >= 0)),
        per_goal_share=share,
        n_episodes=n,
        n_sample_steps=n_sample_steps,
    )


def evaluate_policy(
    spec: MultiGoalEnvSpec,
    policy: Policy,
    n_episodes: int,
    n_sample_steps: int,
    rng: np.random.Generator,
) -> EvaluationReport:
    """
    Mean undiscounted return, fraction of episodes reaching any goal, and
    the share of episodes ending at each goal.
    """
    episodes, _ = rollout_episodes(spec, policy, n_episodes, n_sample_steps, rng)
    report = summarize_episodes(spec, episodes, n_sample_steps)
    logger.info(
        "evaluation: return=%.4f hit_rate=%.3f shares=%s",
        report.mean_return, report.goal_hit_rate, report.per_goal_share,
    )
    return report
