"""
Step schedule N(k) = min(s0 * 2^floor(k / K'), s1) + 1 with
K' = floor(K_total / (log2(s1 / s0) + 1)), and time-triple sampling on the
resulting grid.
"""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.dynamics.timegrid import TimeGrid
from src.utils.errors import ConfigError


class ScheduleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    s0: int = Field(default=10, ge=1)
    s1: int = Field(default=1280, ge=1)
    K_total: int = Field(gt=0)

    @model_validator(mode="after")
    def _check(self):
        ratio, rem = divmod(self.s1, self.s0)
        if rem or ratio < 1 or ratio & (ratio - 1):
            raise ValueError(f"s1/s0 must be a power of two, got {self.s1}/{self.s0}")
        if self.k_prime < 1:
            raise ValueError(
                f"K_total={self.K_total} is too small for {self.n_levels} schedule levels"
            )
        return self

    @property
    def n_levels(self) -> int:
        # log2(s1/s0) + 1
        return (self.s1 // self.s0).bit_length()

    @property
    def k_prime(self) -> int:
        return self.K_total // self.n_levels


def make_schedule(s0: int, s1: int, K_total: int) -> ScheduleSpec:
    try:
        return ScheduleSpec(s0=s0, s1=s1, K_total=K_total)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def step_schedule(spec: ScheduleSpec, k: int) -> int:
    if not 0 <= k < spec.K_total:
        raise ConfigError(f"iteration {k} outside [0, {spec.K_total})")
    return min(spec.s0 * 2 ** (k // spec.k_prime), spec.s1) + 1


@dataclass(frozen=True)
class TimeTriple:
    """t > u > tau >= 0, vectorized over batch rows."""

    t: np.ndarray
    u: np.ndarray
    tau: np.ndarray


def sample_time_triples(grid: TimeGrid, n: int, rng: np.random.Generator) -> TimeTriple:
    """
    Per row: t is a grid point other than t_min, u the next (smaller) grid
    point, and tau any point strictly below u, the terminal 0 included.
    """
    pts = grid.with_zero()
    m = grid.n_points
    if m < 2:
        raise ConfigError("time grid needs at least two points before the terminal 0")
    j = rng.integers(0, m - 1, size=n)
    k = rng.integers(j + 2, m + 1)
    return TimeTriple(t=pts[j], u=pts[j + 1], tau=pts[k])


def sample_time_triple(grid: TimeGrid, rng: np.random.Generator) -> TimeTriple:
    return sample_time_triples(grid, 1, rng)
