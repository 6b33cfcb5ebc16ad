"""
Training objectives with hand-written gradients.

Every loss returns (value, gradient) pairs; batch losses are means over rows.
Teacher targets, TD targets and advantage weights are constants with respect
to the parameters being differentiated.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.dynamics.fields import LearnedField
from src.dynamics.sampler import SamplerConfig, sample_actions, sampler_vjp
from src.dynamics.solvers import propagate_rows
from src.models.critic import DoubleCritic
from src.models.flowmap import FlowMapNet, flowmap_eval, flowmap_vjp
from src.models.schedule import TimeTriple
from src.utils.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)


class AdvantageConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    eta: float = Field(default=1.0, ge=0)
    eps: float = Field(default=1e-6, gt=0)
    weight_cap: float = Field(default=100.0, ge=1)
    n_value_samples: int = Field(default=4, ge=1)


class LossBreakdown(BaseModel):
    """Per-iteration loss values; every term is finite and all but linear_q are >= 0."""

    consistency: float
    flow: float
    total_actor: float
    critic: float
    mean_weight: float
    linear_q: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        values = self.model_dump()
        bad = [k for k, v in values.items() if not np.isfinite(v)]
        if bad:
            raise ValueError(f"non-finite loss terms: {bad}")
        negative = [k for k, v in values.items() if k != "linear_q" and v < 0]
        if negative:
            raise ValueError(f"loss terms must be >= 0: {negative}")
        return self


# === ADVANTAGE WEIGHTS ===

def advantage_weight(q_sa, v_s, batch_std_A, cfg: AdvantageConfig):
    """
    w = min(exp(eta * max(0, A) / (std + eps)), weight_cap), A = Q - V.

    Negative advantages give exactly 1; eta = 0 gives 1 everywhere.
    Accepts scalars or arrays.
    """
    adv = np.asarray(q_sa, dtype=np.float64) - np.asarray(v_s, dtype=np.float64)
    if np.any(np.asarray(batch_std_A) < 0):
        raise ConfigError("advantage std must be non-negative")
    if cfg.eta == 0:
        w = np.ones_like(adv)
    else:
        expo = cfg.eta * np.maximum(adv, 0.0) / (batch_std_A + cfg.eps)
        log_cap = np.log(cfg.weight_cap)
        # exp(log(cap)) rounds below cap, so saturated rows take cap itself
        w = np.where(expo >= log_cap, cfg.weight_cap, np.exp(np.minimum(expo, log_cap)))
    return float(w) if w.ndim == 0 else w


# === ACTOR LOSSES ===

def consistency_loss(
    net: FlowMapNet,
    states: np.ndarray,
    actions: np.ndarray,
    triple: TimeTriple,
    z: np.ndarray,
    w: np.ndarray,
    teacher: Literal["surrogate", "solver"] = "surrogate",
    teacher_scheme: str = "heun",
    teacher_steps: int = 3,
):
    """
    mean_i w_i * ||Phi_theta(s, a + t z, t, tau) - Phi_ema(s, a_u, u, tau)||^2

    The intermediate action a_u is a + u z for the surrogate teacher, or the
    EMA network's own field integrated from t to u for the solver teacher.

    Returns:
        (loss, param_grad)
    """
    t = triple.t.reshape(-1, 1)
    a_t = actions + t * z
    if teacher == "surrogate":
        a_u = actions + triple.u.reshape(-1, 1) * z
    elif teacher == "solver":
        field = LearnedField(net, states, use_ema=True)
        a_u = propagate_rows(teacher_scheme, field, a_t, triple.t, triple.u, teacher_steps)
    else:
        raise ConfigError(f"unknown teacher {teacher!r}")

    target = flowmap_eval(net, states, a_u, triple.u, triple.tau, use_ema=True)
    pred = flowmap_eval(net, states, a_t, triple.t, triple.tau)
    diff = pred - target
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), (diff.shape[0],))
    n = diff.shape[0]

    loss = float(np.mean(w * np.sum(diff * diff, axis=1)))
    upstream = 2.0 * w[:, None] * diff / n
    grad, _ = flowmap_vjp(net, states, a_t, triple.t, triple.tau, upstream)
    return loss, grad


def flow_loss(net: FlowMapNet, states, actions, t, z, w):
    """mean_i w_i * ||a_i - phi_inst(s_i, a_i + t_i z_i, t_i)||^2; returns (loss, param_grad)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    a_t = actions + t[:, None] * z
    phi = net.phi_inst(states, a_t, t)
    diff = actions - phi
    n = diff.shape[0]
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), (n,))

    loss = float(np.mean(w * np.sum(diff * diff, axis=1)))
    grad, _ = net.phi_vjp(states, a_t, t, t, -2.0 * w[:, None] * diff / n)
    return loss, grad


def actor_total(consistency: float, flow: float, lambda_flow: float) -> float:
    return consistency + lambda_flow * flow


def linear_q_actor_loss(
    net: FlowMapNet,
    critic: DoubleCritic,
    states: np.ndarray,
    lambda_q: float,
    rng: Optional[np.random.Generator] = None,
    sampler: SamplerConfig = SamplerConfig(),
    noise: Optional[np.ndarray] = None,
):
    """
    -lambda_q * mean Q1(s, sample_actions(net, s)), differentiated through
    every step of the sampler. Returns (loss, param_grad).
    """
    if lambda_q < 0:
        raise ConfigError(f"lambda_q must be >= 0, got {lambda_q}")
    if lambda_q == 0:
        return 0.0, np.zeros_like(net.params)

    states = np.atleast_2d(states)
    n = states.shape[0]
    actions, trace = sample_actions(
        net, states, rng=rng, noise=noise, return_trace=True, **sampler.kwargs()
    )
    q = critic.q(critic.q1, states, actions)
    loss = float(-lambda_q * np.mean(q))
    _, a_grad = critic.q_vjp(critic.q1, states, actions, np.full(n, -lambda_q / n))
    return loss, sampler_vjp(net, trace, a_grad)


# === CRITIC ===

@dataclass
class CriticLoss:
    loss: float
    grad_q1: np.ndarray
    grad_q2: np.ndarray
    td_target: np.ndarray


def critic_loss(
    critic: DoubleCritic,
    ema_actor: FlowMapNet,
    batch,
    gamma: float,
    rng: Optional[np.random.Generator] = None,
    sampler: SamplerConfig = SamplerConfig(),
    next_actions: Optional[np.ndarray] = None,
    max_q_backup: bool = False,
    n_backup_samples: int = 10,
) -> CriticLoss:
    """
    Double-critic TD loss.

    y = r + gamma * (1 - terminal) * min_j Q_target_j(s', a'), a' drawn from
    the EMA actor (the max over `n_backup_samples` draws with max_q_backup).
    loss = mean over rows and both critics of (y - Q_j(s, a))^2.
    """
    n = batch.states.shape[0]
    if n == 0:
        raise ConfigError("critic_loss needs a non-empty batch")

    n_draws = n_backup_samples if max_q_backup else 1
    next_states = np.repeat(batch.next_states, n_draws, axis=0)
    if next_actions is None:
        next_actions = sample_actions(ema_actor, next_states, rng=rng, use_ema=True, **sampler.kwargs())
    q_next = critic.min_q(next_states, next_actions, target=True).reshape(n, n_draws).max(axis=1)

    not_done = 1.0 - batch.terminals.astype(np.float64)
    y = batch.rewards + gamma * not_done * q_next

    r1 = y - critic.q(critic.q1, batch.states, batch.actions)
    r2 = y - critic.q(critic.q2, batch.states, batch.actions)
    loss = float((np.sum(r1 * r1) + np.sum(r2 * r2)) / (2 * n))
    g1, _ = critic.q_vjp(critic.q1, batch.states, batch.actions, -r1 / n)
    g2, _ = critic.q_vjp(critic.q2, batch.states, batch.actions, -r2 / n)
    return CriticLoss(loss, g1, g2, y)


# === IDENTITY DIAGNOSTIC ===

def identity_residual(
    phi_fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    x: np.ndarray,
    t,
    s,
    fd_step: float = 1e-5,
) -> np.ndarray:
    """
    R = phi(x,t,s) - [phi(x,t,t) - (t^2/s - t) * (f . d_x phi + d_t phi)]

    with f = (x - phi(x,t,t)) / t. Partial derivatives of phi(., ., s) are
    central differences; the x-derivative is taken along f directly.
    Zero for the exact map of any field.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    s = np.broadcast_to(np.asarray(s, dtype=np.float64), (n,))
    if np.any(s == 0):
        raise DomainError("identity residual is undefined at s = 0")
    if np.any(s < 0) or np.any(s >= t):
        raise DomainError("identity residual needs 0 < s < t")

    phi_s = phi_fn(x, t, s)
    phi_inst = phi_fn(x, t, t)
    f = (x - phi_inst) / t[:, None]

    e = fd_step
    d_x = (phi_fn(x + e * f, t, s) - phi_fn(x - e * f, t, s)) / (2 * e)
    d_t = (phi_fn(x, t + e, s) - phi_fn(x, t - e, s)) / (2 * e)
    coeff = (t * t / s - t)[:, None]
    return phi_s - (phi_inst - coeff * (d_x + d_t))
