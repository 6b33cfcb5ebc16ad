from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from src.utils.errors import ConfigError, NumericError


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, lr: float = 3e-4, **kwargs) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), lr=lr, **kwargs)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> Tuple[AdamState, np.ndarray]:
    """
    One Adam update with bias correction.

    Raises:
        NumericError: if any gradient entry is non-finite. Nothing is updated.
    """
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise ConfigError(
            f"adam shapes differ: params {params.shape}, grads {grads.shape}, moments {state.m.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient passed to adam_step")

    step = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step_count=step), new_params


def ema_update(target: np.ndarray, online: np.ndarray, rate: float) -> np.ndarray:
    """target <- rate * online + (1 - rate) * target"""
    if not 0.0 < rate <= 1.0:
        raise ConfigError(f"EMA rate must lie in (0, 1], got {rate}")
    if target.shape != online.shape:
        raise ConfigError(f"EMA shapes differ: {target.shape} vs {online.shape}")
    if rate == 1.0:
        return online.copy()
    return rate * online + (1.0 - rate) * target


def grad_norm(*grads: np.ndarray) -> float:
    return float(np.sqrt(sum(float(np.dot(g, g)) for g in grads)))


def clip_grad_norm(grads: np.ndarray, max_norm: float) -> Tuple[np.ndarray, float]:
    """Rescales so the global L2 norm is at most `max_norm`. Returns (grads, scale)."""
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient passed to clip_grad_norm")
    norm = grad_norm(grads)
    if norm <= max_norm:
        return grads, 1.0
    scale = max_norm / norm
    return grads * scale, scale
