from typing import Tuple

import numpy as np
from sklearn.preprocessing import StandardScaler

from src.data.dataset import OfflineDataset, TransitionBatch
from src.utils.errors import ConfigError


def compute_normalization(states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-dimension mean and (population) std of the states.

    Constant dimensions get std 1 so normalization stays finite.
    """
    scaler = StandardScaler().fit(np.asarray(states, dtype=np.float64))
    return scaler.mean_.astype(np.float64), scaler.scale_.astype(np.float64)


def normalize_states(states: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (states - mean) / std


def denormalize_states(states: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return states * std + mean


def sample_batch(dataset: OfflineDataset, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
    """Uniform draw with replacement; states and next states are normalized, actions are not."""
    n = len(dataset)
    if n == 0:
        raise ConfigError("cannot sample from an empty dataset")
    if not 1 <= batch_size <= n:
        raise ConfigError(f"batch_size must lie in [1, {n}], got {batch_size}")

    idx = rng.integers(0, n, size=batch_size)
    mean, std = dataset.state_mean, dataset.state_std
    return TransitionBatch(
        states=normalize_states(dataset.states[idx], mean, std),
        actions=dataset.actions[idx],
        rewards=dataset.rewards[idx],
        next_states=normalize_states(dataset.next_states[idx], mean, std),
        terminals=dataset.terminals[idx],
        indices=idx,
    )
