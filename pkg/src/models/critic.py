from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from src.models.mlp import MlpSpec, ParamVector, init_params, make_spec, mlp_forward, mlp_grad


def _sa(states, actions) -> np.ndarray:
    return np.concatenate(
        [np.atleast_2d(np.asarray(states, dtype=np.float64)),
         np.atleast_2d(np.asarray(actions, dtype=np.float64))],
        axis=1,
    )


@dataclass(frozen=True)
class DoubleCritic:
    """Two Q networks with their EMA targets, sharing one architecture."""

    spec: MlpSpec
    q1: ParamVector
    q2: ParamVector
    q1_target: ParamVector
    q2_target: ParamVector

    @classmethod
    def create(
        cls,
        state_dim: int,
        action_dim: int,
        rng: np.random.Generator,
        hidden_dims: Sequence[int] = (128, 128),
        activation: str = "mish",
    ) -> "DoubleCritic":
        spec = make_spec(
            input_dim=state_dim + action_dim,
            hidden_dims=tuple(hidden_dims),
            output_dim=1,
            activation=activation,
        )
        q1 = init_params(spec, rng)
        q2 = init_params(spec, rng)
        return cls(spec, q1, q2, q1.copy(), q2.copy())

    def with_params(self, **kwargs) -> "DoubleCritic":
        return replace(self, **kwargs)

    def q(self, params: ParamVector, states, actions) -> np.ndarray:
        return mlp_forward(self.spec, params, _sa(states, actions))[:, 0]

    def q_pair(self, states, actions, target: bool = False) -> np.ndarray:
        """Shape (batch, 2): both critics, online or target."""
        p1, p2 = (self.q1_target, self.q2_target) if target else (self.q1, self.q2)
        x = _sa(states, actions)
        return np.stack([mlp_forward(self.spec, p1, x)[:, 0], mlp_forward(self.spec, p2, x)[:, 0]], axis=1)

    def min_q(self, states, actions, target: bool = False) -> np.ndarray:
        return self.q_pair(states, actions, target=target).min(axis=1)

    def q_vjp(self, params: ParamVector, states, actions, upstream: np.ndarray):
        """(param_grad, action_grad) of sum_i upstream_i * Q(s_i, a_i)."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        pg, ig = mlp_grad(self.spec, params, _sa(states, actions), None, upstream.reshape(-1, 1))
        return pg, ig[:, states.shape[1]:]
