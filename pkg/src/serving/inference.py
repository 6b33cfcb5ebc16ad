"""
Checkpoint-backed policy for acting in the environment.

A GTPPolicy bundles the flow-map network with the dataset normalization it
was trained on, so callers pass raw environment states.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from src.data.preprocess import normalize_states
from src.dynamics.sampler import SamplerConfig, sample_actions
from src.models.checkpoint import Checkpoint, load_checkpoint
from src.models.flowmap import FlowMapNet

logger = logging.getLogger(__name__)


class GTPPolicy:
    def __init__(
        self,
        net: FlowMapNet,
        state_mean: np.ndarray,
        state_std: np.ndarray,
        sampler: SamplerConfig = SamplerConfig(),
        use_ema: bool = True,
    ):
        self.net = net
        self.state_mean = np.asarray(state_mean, dtype=np.float64)
        self.state_std = np.asarray(state_std, dtype=np.float64)
        self.sampler = sampler
        self.use_ema = use_ema

    def act(self, states: np.ndarray, n_steps: Optional[int] = None, rng: np.random.Generator = None) -> np.ndarray:
        """One sampled action per raw state row, with K = n_steps flow-map jumps."""
        kwargs = self.sampler.kwargs()
        if n_steps is not None:
            kwargs["n_steps"] = n_steps
        s = normalize_states(np.atleast_2d(states), self.state_mean, self.state_std)
        return sample_actions(self.net, s, rng=rng, use_ema=self.use_ema, **kwargs)


def policy_from_checkpoint(ckpt: Checkpoint) -> GTPPolicy:
    cfg = ckpt.config
    return GTPPolicy(
        ckpt.state.actor,
        ckpt.state_mean,
        ckpt.state_std,
        sampler=cfg.eval_sampler(),
        use_ema=cfg.eval_use_ema,
    )


def load_policy(path: str) -> Tuple[GTPPolicy, Checkpoint]:
    """
    Loads a checkpoint and wraps its actor.

    Raises:
        FileNotFoundError, CheckpointError: unreadable or version-mismatched file.
    """
    ckpt = load_checkpoint(path)
    logger.info("loaded checkpoint %s at iteration %d", path, ckpt.state.iteration)
    return policy_from_checkpoint(ckpt), ckpt
