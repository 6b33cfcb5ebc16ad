"""
2-D point-mass environment with several goal regions.

The state is a point in the unit box [-1, 1]^2; an action in [-1, 1]^2 moves
it by step_scale * action. An episode ends on the first step that lands within
goal_radius of a goal.
"""

from itertools import combinations
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.errors import ConfigError

DEFAULT_GOALS = [(0.8, 0.8), (-0.8, 0.8), (-0.8, -0.8), (0.8, -0.8)]


class MultiGoalEnvSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    goals: List[Tuple[float, float]] = Field(default_factory=lambda: list(DEFAULT_GOALS))
    step_scale: float = Field(default=0.1, gt=0)
    horizon: int = Field(default=20, ge=1)
    goal_radius: float = Field(default=0.15, gt=0)
    reward_mode: Literal["uniform", "preferred"] = "uniform"
    preferred_goal: int = Field(default=0, ge=0)
    other_reward: float = Field(default=0.2, ge=0, le=1)
    start_half_width: float = Field(default=0.05, ge=0)

    @model_validator(mode="after")
    def _check_goals(self):
        if len(self.goals) < 1:
            raise ValueError("at least one goal is required")
        g = np.asarray(self.goals, dtype=np.float64)
        if np.any(np.abs(g) > 1.0):
            raise ValueError("goals must lie inside the unit box")
        dists = [float(np.linalg.norm(a - b)) for a, b in combinations(g, 2)]
        if dists and min(dists) == 0.0:
            raise ValueError("goals must be distinct")
        if dists and not self.goal_radius < min(dists) / 2:
            raise ValueError("goal_radius must be below half the smallest goal distance")
        if self.preferred_goal >= len(self.goals):
            raise ValueError(f"preferred_goal {self.preferred_goal} out of range")
        return self

    @property
    def n_goals(self) -> int:
        return len(self.goals)

    @property
    def goal_array(self) -> np.ndarray:
        return np.asarray(self.goals, dtype=np.float64)

    @property
    def goal_rewards(self) -> np.ndarray:
        if self.reward_mode == "uniform":
            return np.ones(self.n_goals)
        r = np.full(self.n_goals, self.other_reward)
        r[self.preferred_goal] = 1.0
        return r


def make_env_spec(**kwargs) -> MultiGoalEnvSpec:
    try:
        return MultiGoalEnvSpec(**kwargs)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def reached_goal(spec: MultiGoalEnvSpec, states: np.ndarray) -> np.ndarray:
    """Index of the goal whose region contains each state, -1 if none."""
    states = np.atleast_2d(states)
    d = np.linalg.norm(states[:, None, :] - spec.goal_array[None, :, :], axis=2)
    nearest = np.argmin(d, axis=1)
    hit = d[np.arange(states.shape[0]), nearest] <= spec.goal_radius
    return np.where(hit, nearest, -1)


def reset(spec: MultiGoalEnvSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-spec.start_half_width, spec.start_half_width, size=(n, 2))


def env_step(spec: MultiGoalEnvSpec, state: np.ndarray, action: np.ndarray):
    """
    Batched dynamics.

    Returns:
        (next_state, reward, terminal)
    """
    state = np.asarray(state, dtype=np.float64)
    single = state.ndim == 1
    s = np.atleast_2d(state)
    a = np.clip(np.atleast_2d(np.asarray(action, dtype=np.float64)), -1.0, 1.0)

    nxt = np.clip(s + spec.step_scale * a, -1.0, 1.0)
    goal = reached_goal(spec, nxt)
    terminal = goal >= 0
    reward = np.where(terminal, spec.goal_rewards[np.maximum(goal, 0)], 0.0)

    if single:
        return nxt[0], float(reward[0]), bool(terminal[0])
    return nxt, reward, terminal


def scripted_action(
    spec: MultiGoalEnvSpec, states: np.ndarray, goals: np.ndarray, noise: float, rng: np.random.Generator
) -> np.ndarray:
    """Unit vector toward each row's goal plus Gaussian noise, clamped to the box."""
    states = np.atleast_2d(states)
    delta = spec.goal_array[goals] - states
    norm = np.linalg.norm(delta, axis=1, keepdims=True)
    direction = delta / np.maximum(norm, 1e-12)
    eps = rng.standard_normal(states.shape) if noise > 0 else 0.0
    return np.clip(direction + noise * eps, -1.0, 1.0)
