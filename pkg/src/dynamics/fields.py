"""
Vector fields of the generative ODE, all defined for t > 0 and evaluated
row-wise on batches of shape (batch, dim).

Time runs from T down to 0, so a solver step from t to u < t has a
negative increment.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import softmax

from src.utils.errors import ConfigError, DomainError


def _time_column(t, n: int) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise DomainError(f"vector fields are defined for t > 0 only, got min t = {np.min(t)}")
    return np.broadcast_to(t.reshape(-1, 1) if t.ndim else t, (n, 1))


@dataclass(frozen=True)
class SurrogateField:
    """(x - anchor) / t, anchored to a data sample (one anchor per row allowed)."""

    anchor: np.ndarray
    kind: str = "surrogate"

    @property
    def dimension(self) -> int:
        return int(np.shape(self.anchor)[-1])

    def velocity(self, x, t):
        return (x - self.anchor) / t


@dataclass(frozen=True)
class PosteriorOracleField:
    """
    Exact probability-flow drift for a Dirac mixture:
    (x - E[x0 | x]) / t with E[x0 | x] a softmax-weighted atom average.
    """

    atoms: np.ndarray
    weights: np.ndarray
    kind: str = "posterior_oracle"

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=np.float64))
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if atoms.shape[0] != weights.size:
            raise ConfigError(f"{atoms.shape[0]} atoms but {weights.size} weights")
        if np.any(weights <= 0) or not np.isclose(weights.sum(), 1.0, rtol=0, atol=1e-12):
            raise ConfigError("mixture weights must be positive and sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dimension(self) -> int:
        return self.atoms.shape[1]

    def posterior_mean(self, x, t):
        # log-space weights; softmax subtracts the row max
        sq = ((x[:, None, :] - self.atoms[None, :, :]) ** 2).sum(axis=2)
        logits = np.log(self.weights)[None, :] - sq / (2.0 * t * t)
        return softmax(logits, axis=1) @ self.atoms

    def velocity(self, x, t):
        return (x - self.posterior_mean(x, t)) / t


@dataclass(frozen=True)
class LearnedField:
    """(x - phi_inst(state, x, t)) / t from a flow-map network."""

    net: "object"
    states: np.ndarray
    use_ema: bool = True
    kind: str = "learned"

    @property
    def dimension(self) -> int:
        return self.net.action_dim

    def velocity(self, x, t):
        t_row = t.reshape(-1)
        phi = self.net.phi_inst(self.states, x, t_row, use_ema=self.use_ema)
        return (x - phi) / t


@dataclass(frozen=True)
class ConstantField:
    c: np.ndarray
    kind: str = "analytic_constant"

    @property
    def dimension(self) -> int:
        return int(np.size(self.c))

    def velocity(self, x, t):
        return np.broadcast_to(np.asarray(self.c, dtype=np.float64), x.shape).copy()


@dataclass(frozen=True)
class LinearField:
    """f(x, t) = x"""

    dim: Optional[int] = None
    kind: str = "analytic_linear"

    @property
    def dimension(self) -> int:
        return self.dim or 0

    def velocity(self, x, t):
        return np.array(x, dtype=np.float64, copy=True)


VectorFieldSpec = Union[SurrogateField, PosteriorOracleField, LearnedField, ConstantField, LinearField]


def eval_field(field: VectorFieldSpec, x: np.ndarray, t) -> np.ndarray:
    """
    Velocity of `field` at (x, t).

    Args:
        x: shape (batch, dim) or (dim,).
        t: scalar or one time per row; every entry must be > 0.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2:
        raise ConfigError(f"x must have shape (batch, dim) or (dim,), got {x.shape}")
    dim = field.dimension
    if dim and xb.shape[1] != dim:
        raise ConfigError(f"{field.kind} field has dimension {dim}, x has {xb.shape[1]}")
    tcol = _time_column(t, xb.shape[0])
    out = field.velocity(xb, tcol)
    return out[0] if single else out
