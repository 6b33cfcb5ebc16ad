from dataclasses import dataclass

import numpy as np

from src.models.critic import DoubleCritic
from src.models.flowmap import FlowMapNet
from src.models.optim import AdamState
from src.utils.utils import TRAIN_STREAM, make_rng


@dataclass
class TrainState:
    actor: FlowMapNet
    critic: DoubleCritic
    adam_actor: AdamState
    adam_q1: AdamState
    adam_q2: AdamState
    iteration: int
    rng: np.random.Generator


def init_train_state(config, state_dim: int, action_dim: int) -> TrainState:
    """
    Fresh networks drawn from the training stream of `config.seed`; EMA
    copies start equal to the online weights.
    """
    rng = make_rng(config.seed, TRAIN_STREAM)
    actor = FlowMapNet.create(
        state_dim, action_dim, rng,
        hidden_dims=config.hidden_dims,
        time_embed_dim=config.time_embed_dim,
        activation=config.activation,
        zero_head=True,
    )
    critic = DoubleCritic.create(
        state_dim, action_dim, rng, hidden_dims=config.critic_hidden_dims, activation=config.activation
    )
    n_actor = actor.params.size
    n_critic = critic.q1.size
    return TrainState(
        actor=actor,
        critic=critic,
        adam_actor=AdamState.zeros(n_actor, lr=config.lr_actor),
        adam_q1=AdamState.zeros(n_critic, lr=config.lr_critic),
        adam_q2=AdamState.zeros(n_critic, lr=config.lr_critic),
        iteration=0,
        rng=rng,
    )
