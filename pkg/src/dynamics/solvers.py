import math
from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from src.dynamics.fields import VectorFieldSpec, eval_field
from src.utils.errors import ConfigError, DomainError, NumericError

SCHEME_ORDER = {"euler": 1, "heun": 2}


class SolverSpec(BaseModel):
    """One-step scheme plus a strictly decreasing sequence of positive times."""

    model_config = ConfigDict(frozen=True)

    scheme: Literal["euler", "heun"]
    time_points: Tuple[float, ...]

    @field_validator("time_points")
    @classmethod
    def _check_points(cls, pts):
        if len(pts) < 2:
            raise ValueError("a solver needs at least two time points")
        if any(p <= 0 for p in pts):
            raise ValueError("solver time points must all be positive")
        if any(b >= a for a, b in zip(pts[:-1], pts[1:])):
            raise ValueError("solver time points must be strictly decreasing")
        return pts

    @property
    def order(self) -> int:
        return SCHEME_ORDER[self.scheme]

    @property
    def h(self) -> float:
        pts = np.asarray(self.time_points)
        return float(np.max(np.abs(np.diff(pts))))

    @classmethod
    def uniform(cls, scheme: str, t: float, u: float, h_max: float) -> "SolverSpec":
        """ceil((t - u) / h_max) equal steps from t down to u."""
        if h_max <= 0:
            raise ConfigError(f"h_max must be positive, got {h_max}")
        n = max(1, math.ceil((t - u) / h_max - 1e-9))
        return make_solver(scheme, np.linspace(t, u, n + 1))


def make_solver(scheme: str, time_points) -> SolverSpec:
    try:
        return SolverSpec(scheme=scheme, time_points=tuple(float(p) for p in time_points))
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def solver_step(scheme: str, field: VectorFieldSpec, x: np.ndarray, t_from, t_to) -> np.ndarray:
    """
    Euler:  x + d * f(x, t_from)
    Heun:   x + d/2 * (f(x, t_from) + f(x + d * f(x, t_from), t_to))
    with d = t_to - t_from. Times may be scalars or one per row.
    """
    if scheme not in SCHEME_ORDER:
        raise ConfigError(f"unknown solver scheme {scheme!r}")
    t_from = np.asarray(t_from, dtype=np.float64)
    t_to = np.asarray(t_to, dtype=np.float64)
    if np.any(t_from == t_to):
        raise DomainError("solver step needs t_from != t_to")

    x = np.asarray(x, dtype=np.float64)
    d = t_to - t_from
    if d.ndim and x.ndim == 2:
        d = d.reshape(-1, 1)

    k1 = eval_field(field, x, t_from)
    pred = x + d * k1
    if scheme == "euler":
        return pred
    k2 = eval_field(field, pred, t_to)
    return x + 0.5 * d * (k1 + k2)


def propagate(solver: SolverSpec, field: VectorFieldSpec, x_start: np.ndarray) -> np.ndarray:
    """Composes solver_step along the solver's time points."""
    x = np.asarray(x_start, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite start state for propagate")
    pts = solver.time_points
    for k, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        x = solver_step(solver.scheme, field, x, a, b)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state after solver step {k} ({a:g} -> {b:g})")
    return x


def propagate_rows(
    scheme: str,
    field: VectorFieldSpec,
    x: np.ndarray,
    t_from: np.ndarray,
    t_to: np.ndarray,
    n_steps: int,
) -> np.ndarray:
    """Propagates every row over its own interval with `n_steps` equal steps."""
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
    t_from = np.asarray(t_from, dtype=np.float64).reshape(-1)
    t_to = np.asarray(t_to, dtype=np.float64).reshape(-1)
    if np.any(t_to <= 0) or np.any(t_to >= t_from):
        raise DomainError("propagate_rows needs t_from > t_to > 0 on every row")

    x = np.asarray(x, dtype=np.float64)
    d = (t_to - t_from) / n_steps
    for k in range(n_steps):
        a = t_from + k * d
        b = t_to if k == n_steps - 1 else t_from + (k + 1) * d
        x = solver_step(scheme, field, x, a, b)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state after solver step {k}")
    return x
