"""
Flow-map policy network.

The network outputs phi(state, a_t, t, tau); the flow map is recovered by
interpolating towards the input:

    Phi(state, a_t, t, tau) = (1 - tau/t) * phi + (tau/t) * a_t

so Phi(., t, t) = a_t holds for any weights.
"""

from dataclasses import dataclass, replace
from typing import Sequence, Tuple

import numpy as np

from src.models.mlp import MlpSpec, ParamVector, init_params, make_spec, mlp_forward, mlp_grad
from src.utils.errors import ConfigError, DomainError

_TIME_TOL = 1e-12


def _row_times(t, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(t, dtype=np.float64).reshape(-1) if np.ndim(t) else t, (n,))


def _interp_coeffs(t, tau, n: int) -> Tuple[np.ndarray, np.ndarray]:
    t = _row_times(t, n)
    tau = _row_times(tau, n)
    if np.any(t <= 0):
        raise DomainError(f"flow map needs t > 0, got min t = {np.min(t)}")
    if np.any(tau < 0) or np.any(tau > t * (1 + _TIME_TOL)):
        raise DomainError("flow map needs 0 <= tau <= t")
    ratio = np.minimum(tau / t, 1.0)
    return (1.0 - ratio)[:, None], ratio[:, None]


def phi_to_flowmap(phi_value: np.ndarray, x_t: np.ndarray, t, tau) -> np.ndarray:
    """(1 - tau/t) * phi_value + (tau/t) * x_t"""
    phi_value = np.asarray(phi_value, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    single = x_t.ndim == 1
    pv = np.atleast_2d(phi_value)
    xt = np.atleast_2d(x_t)
    c, d = _interp_coeffs(t, tau, xt.shape[0])
    out = c * pv + d * xt
    return out[0] if single else out


@dataclass(frozen=True)
class FlowMapNet:
    """Online parameters theta plus the EMA twin theta_minus."""

    spec: MlpSpec
    params: ParamVector
    ema_params: ParamVector
    state_dim: int
    action_dim: int

    @classmethod
    def create(
        cls,
        state_dim: int,
        action_dim: int,
        rng: np.random.Generator,
        hidden_dims: Sequence[int] = (128, 128),
        time_embed_dim: int = 16,
        activation: str = "mish",
        zero_head: bool = True,
    ) -> "FlowMapNet":
        spec = make_spec(
            input_dim=state_dim + action_dim,
            hidden_dims=tuple(hidden_dims),
            output_dim=action_dim,
            activation=activation,
            time_embed_dim=time_embed_dim,
            n_time_inputs=2,
        )
        params = init_params(spec, rng, zero_last=zero_head)
        return cls(spec, params, params.copy(), state_dim, action_dim)

    @classmethod
    def from_spec(cls, spec: MlpSpec, params: ParamVector, ema_params: ParamVector, action_dim: int):
        if spec.n_time_inputs != 2 or spec.output_dim != action_dim:
            raise ConfigError("architecture is not a flow-map network")
        return cls(spec, params, ema_params, spec.input_dim - action_dim, action_dim)

    def with_params(self, params=None, ema_params=None) -> "FlowMapNet":
        return replace(
            self,
            params=self.params if params is None else params,
            ema_params=self.ema_params if ema_params is None else ema_params,
        )

    def _weights(self, use_ema: bool) -> ParamVector:
        return self.ema_params if use_ema else self.params

    def _inputs(self, states, a_t):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        a_t = np.atleast_2d(np.asarray(a_t, dtype=np.float64))
        if states.shape[0] == 1 and a_t.shape[0] > 1:
            states = np.repeat(states, a_t.shape[0], axis=0)
        if states.shape[0] != a_t.shape[0]:
            raise ConfigError(f"{states.shape[0]} states for {a_t.shape[0]} actions")
        return np.concatenate([states, a_t], axis=1)

    def phi(self, states, a_t, t, tau, use_ema: bool = False) -> np.ndarray:
        x = self._inputs(states, a_t)
        n = x.shape[0]
        return mlp_forward(self.spec, self._weights(use_ema), x, [_row_times(t, n), _row_times(tau, n)])

    def phi_inst(self, states, a_t, t, use_ema: bool = False) -> np.ndarray:
        """phi(state, a_t, t, t): the denoiser that defines the learned field."""
        return self.phi(states, a_t, t, t, use_ema=use_ema)

    def phi_vjp(self, states, a_t, t, tau, upstream, use_ema: bool = False):
        """(param_grad, a_t_grad) of <upstream, phi>."""
        x = self._inputs(states, a_t)
        n = x.shape[0]
        pg, ig = mlp_grad(
            self.spec, self._weights(use_ema), x, [_row_times(t, n), _row_times(tau, n)], upstream
        )
        return pg, ig[:, self.state_dim:]


def flowmap_eval(net: FlowMapNet, states, a_t, t, tau, use_ema: bool = False) -> np.ndarray:
    """Phi_theta(state, a_t, t, tau); `use_ema` selects theta_minus."""
    a_t = np.atleast_2d(np.asarray(a_t, dtype=np.float64))
    _interp_coeffs(t, tau, a_t.shape[0])
    phi = net.phi(states, a_t, t, tau, use_ema=use_ema)
    return phi_to_flowmap(phi, a_t, t, tau)


def flowmap_vjp(net: FlowMapNet, states, a_t, t, tau, upstream, use_ema: bool = False):
    """
    Gradient of <upstream, Phi(state, a_t, t, tau)>.

    Returns:
        (param_grad, a_t_grad)
    """
    a_t = np.atleast_2d(np.asarray(a_t, dtype=np.float64))
    c, d = _interp_coeffs(t, tau, a_t.shape[0])
    pg, ag = net.phi_vjp(states, a_t, t, tau, c * upstream, use_ema=use_ema)
    return pg, ag + d * upstream
