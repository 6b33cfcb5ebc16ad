"""
Multi-step action sampler.

Starting from a_T ~ N(0, T^2 I), each step applies the flow map between
consecutive sampling times; the last step lands at tau = 0. Only the final
action is clamped to the action box.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.dynamics.timegrid import sampling_times
from src.models.flowmap import FlowMapNet, flowmap_eval, flowmap_vjp


class SamplerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    T: float = Field(default=5.0, gt=0)
    t_min: float = Field(default=0.002, gt=0)
    rho: float = Field(default=7.0, ge=1.0)
    n_steps: int = Field(default=5, ge=1)

    def kwargs(self) -> dict:
        return {"n_steps": self.n_steps, "T": self.T, "t_min": self.t_min, "rho": self.rho}


@dataclass
class SamplerTrace:
    states: np.ndarray
    times: np.ndarray
    path: List[np.ndarray]
    clamp_mask: np.ndarray
    use_ema: bool


def sample_actions(
    net: FlowMapNet,
    states: np.ndarray,
    n_steps: int,
    rng: Optional[np.random.Generator] = None,
    T: float = 5.0,
    t_min: float = 0.002,
    rho: float = 7.0,
    use_ema: bool = False,
    noise: Optional[np.ndarray] = None,
    low: float = -1.0,
    high: float = 1.0,
    return_trace: bool = False,
):
    """
    Draws one action per state row.

    Args:
        net (FlowMapNet): Policy network.
        states (np.ndarray): shape (batch, state_dim), already normalized.
        n_steps (int): Number of flow-map jumps K >= 1.
        rng: Generator for the initial noise (ignored when `noise` is given).
        noise: Optional standard-normal draws of shape (batch, action_dim).

    Returns:
        Actions of shape (batch, action_dim), plus a SamplerTrace when
        `return_trace` is set.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    times = sampling_times(T, t_min, n_steps, rho)
    if noise is None:
        noise = rng.standard_normal((states.shape[0], net.action_dim))
    a = T * np.asarray(noise, dtype=np.float64)

    path = [a]
    for t_i, t_next in zip(times[:-1], times[1:]):
        a = flowmap_eval(net, states, a, t_i, t_next, use_ema=use_ema)
        path.append(a)

    mask = (a > low) & (a < high)
    actions = np.clip(a, low, high)
    if return_trace:
        return actions, SamplerTrace(states, times, path, mask, use_ema)
    return actions


def sampler_vjp(net: FlowMapNet, trace: SamplerTrace, upstream: np.ndarray) -> np.ndarray:
    """
    Parameter gradient of <upstream, clamp(a_0)> back through every
    flow-map jump of the sampler.
    """
    g = upstream * trace.clamp_mask
    grad = np.zeros_like(net.params)
    times = trace.times
    for i in range(len(times) - 2, -1, -1):
        pg, g = flowmap_vjp(
            net, trace.states, trace.path[i], times[i], times[i + 1], g, use_ema=trace.use_ema
        )
        grad += pg
    return grad
