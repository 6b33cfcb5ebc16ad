import logging

import numpy as np

from src.data.dataset import OfflineDataset, Transition
from src.data.multigoal_env import MultiGoalEnvSpec, env_step, reset, scripted_action
from src.data.preprocess import compute_normalization
from src.utils.errors import ConfigError
from src.utils.utils import DATA_STREAM, make_rng

logger = logging.getLogger(__name__)


def gen_dataset(
    spec: MultiGoalEnvSpec,
    n_episodes: int,
    behavior_noise: float,
    rng: np.random.Generator,
    seed: int = 0,
) -> OfflineDataset:
    """
    Rolls out the scripted goal-seeking controller.

    Goals are assigned round-robin, so each goal gets n_episodes / n_goals
    episodes (+-1). Each episode runs until it reaches a goal or the horizon.

    Args:
        spec (MultiGoalEnvSpec): Environment.
        n_episodes (int): At least one per goal.
        behavior_noise (float): Std of the Gaussian perturbation of the controller.
        rng: Generator for start states and controller noise.
        seed (int): Recorded in the dataset header.
    """
    if n_episodes < spec.n_goals:
        raise ConfigError(f"need at least {spec.n_goals} episodes (one per goal), got {n_episodes}")
    if behavior_noise < 0:
        raise ConfigError(f"behavior noise must be >= 0, got {behavior_noise}")

    transitions = []
    episode_goals = []

    for ep in range(n_episodes):
        goal = ep % spec.n_goals
        episode_goals.append(goal)
        state = reset(spec, 1, rng)
        for _ in range(spec.horizon):
            action = scripted_action(spec, state, np.array([goal]), behavior_noise, rng)
            nxt, reward, terminal = env_step(spec, state, action)
            transitions.append(Transition(state[0], action[0], float(reward[0]), nxt[0], bool(terminal[0])))
            state = nxt
            if terminal[0]:
                break

    mean, std = compute_normalization(np.array([tr.state for tr in transitions]))
    dataset = OfflineDataset.from_transitions(
        transitions,
        env_spec=spec,
        seed=seed,
        state_mean=mean,
        state_std=std,
        episode_goals=episode_goals,
    )
    logger.info("generated %d transitions from %d episodes", len(dataset), n_episodes)
    return dataset


def generate_dataset(spec: MultiGoalEnvSpec, n_episodes: int, behavior_noise: float, seed: int) -> OfflineDataset:
    """gen_dataset on the dedicated data stream of `seed`."""
    return gen_dataset(spec, n_episodes, behavior_noise, make_rng(seed, DATA_STREAM), seed=seed)
