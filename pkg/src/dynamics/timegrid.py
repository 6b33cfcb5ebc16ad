import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.errors import ConfigError


class TimeGrid(BaseModel):
    """
    Decreasing rho-spaced times from T down to t_min.

    point_i = (t_min^(1/rho) + (1 - i/(n-1)) * (T^(1/rho) - t_min^(1/rho)))^rho
    """

    model_config = ConfigDict(frozen=True)

    T: float = Field(gt=0)
    t_min: float = Field(gt=0)
    n_points: int = Field(ge=2)
    rho: float = Field(default=7.0, ge=1.0)

    @model_validator(mode="after")
    def _check_range(self):
        if not self.t_min < self.T:
            raise ValueError(f"t_min={self.t_min} must be smaller than T={self.T}")
        return self

    @property
    def points(self) -> np.ndarray:
        inv = 1.0 / self.rho
        frac = 1.0 - np.arange(self.n_points) / (self.n_points - 1)
        pts = (self.t_min ** inv + frac * (self.T ** inv - self.t_min ** inv)) ** self.rho
        # pin the endpoints against pow round-off
        pts[0] = self.T
        pts[-1] = self.t_min
        return pts

    def with_zero(self) -> np.ndarray:
        """Grid points followed by the terminal time 0."""
        return np.append(self.points, 0.0)


def make_time_grid(T: float, t_min: float, n_points: int, rho: float = 7.0) -> TimeGrid:
    try:
        return TimeGrid(T=T, t_min=t_min, n_points=n_points, rho=rho)
    except ValidationError as e:
        raise ConfigError(f"degenerate time grid: {e}") from e


def sampling_times(T: float, t_min: float, n_steps: int, rho: float = 7.0) -> np.ndarray:
    """
    Times visited by a K-step sampler: K grid points from T to t_min, then 0.

    K = 1 jumps straight from T to 0.
    """
    if n_steps < 1:
        raise ConfigError(f"sampler needs at least one step, got {n_steps}")
    if n_steps == 1:
        return np.array([T, 0.0])
    return make_time_grid(T, t_min, n_steps, rho).with_zero()
