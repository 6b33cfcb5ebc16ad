"""
Training configuration and its flat `key = value` file grammar.

    # comment
    eta = 0.0
    hidden_dims = 128, 128

Unknown keys and lines without '=' are rejected with the key / line number.
"""

import os
from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.dynamics.sampler import SamplerConfig
from src.models.losses import AdvantageConfig
from src.models.schedule import ScheduleSpec, make_schedule
from src.utils.errors import ConfigError

# smallest K_total for which the default schedule has K' >= 1
_MIN_SCHEDULE_ITERS = 8


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # optimisation
    lr_actor: float = Field(default=3e-4, gt=0)
    lr_critic: float = Field(default=3e-4, gt=0)
    grad_norm_max: float = Field(default=5.0, gt=0)
    batch_size: int = Field(default=256, ge=1)
    K_total: int = Field(default=20000, ge=0)
    ema_rate: float = Field(default=0.005, gt=0, le=1)

    # objective
    eta: float = Field(default=1.0, ge=0)
    lambda_flow: float = Field(default=1.0, ge=0)
    gamma: float = Field(default=0.99, ge=0, le=1)
    adv_eps: float = Field(default=1e-6, gt=0)
    weight_cap: float = Field(default=100.0, ge=1)
    n_value_samples: int = Field(default=4, ge=1)
    ablation: Literal["none", "linear_q"] = "none"
    lambda_q: float = Field(default=1.0, ge=0)
    teacher: Literal["surrogate", "solver"] = "surrogate"
    teacher_scheme: Literal["euler", "heun"] = "heun"
    teacher_steps: int = Field(default=3, ge=1)
    max_q_backup: bool = False
    n_backup_samples: int = Field(default=10, ge=1)

    # time domain and schedule
    T: float = Field(default=5.0, gt=0)
    t_min: float = Field(default=0.002, gt=0)
    rho: float = Field(default=7.0, ge=1)
    s0: int = Field(default=10, ge=1)
    s1: int = Field(default=1280, ge=1)

    # networks
    hidden_dims: Tuple[int, ...] = (128, 128)
    critic_hidden_dims: Tuple[int, ...] = (128, 128)
    time_embed_dim: int = Field(default=16, ge=0)
    activation: Literal["mish", "relu", "tanh"] = "mish"

    # sampling, evaluation, bookkeeping
    n_sample_steps_train: int = Field(default=5, ge=1)
    n_sample_steps_eval: int = Field(default=5, ge=1)
    eval_interval: int = Field(default=500, ge=1)
    eval_episodes: int = Field(default=10, ge=1)
    eval_use_ema: bool = True
    checkpoint_interval: int = Field(default=5000, ge=1)
    seed: int = 0

    @field_validator("hidden_dims", "critic_hidden_dims", mode="before")
    @classmethod
    def _split_dims(cls, v):
        if isinstance(v, str):
            return tuple(int(p) for p in v.split(",") if p.strip())
        return v

    @model_validator(mode="after")
    def _check(self):
        if not self.t_min < self.T:
            raise ValueError(f"t_min={self.t_min} must be smaller than T={self.T}")
        # fails early on an inconsistent schedule
        self.schedule
        return self

    @property
    def schedule(self) -> ScheduleSpec:
        return make_schedule(self.s0, self.s1, max(self.K_total, _MIN_SCHEDULE_ITERS))

    @property
    def advantage(self) -> AdvantageConfig:
        return AdvantageConfig(
            eta=self.eta, eps=self.adv_eps, weight_cap=self.weight_cap,
            n_value_samples=self.n_value_samples,
        )

    @property
    def train_sampler(self) -> SamplerConfig:
        return SamplerConfig(T=self.T, t_min=self.t_min, rho=self.rho, n_steps=self.n_sample_steps_train)

    def eval_sampler(self, n_steps: Optional[int] = None) -> SamplerConfig:
        return SamplerConfig(
            T=self.T, t_min=self.t_min, rho=self.rho,
            n_steps=self.n_sample_steps_eval if n_steps is None else n_steps,
        )


def build_train_config(values: Dict[str, object]) -> TrainConfig:
    unknown = sorted(set(values) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown config key: {unknown[0]}")
    try:
        return TrainConfig(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def parse_config_text(text: str) -> Dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line {lineno}: {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"malformed config line {lineno}: missing key")
        if key not in TrainConfig.model_fields:
            raise ConfigError(f"unknown config key: {key} (line {lineno})")
        values[key] = value
    return values


def load_train_config(path: Optional[str], **overrides) -> TrainConfig:
    """
    Reads a config file (or only defaults when `path` is None) and applies
    non-None keyword overrides, e.g. the CLI --seed.
    """
    values: Dict[str, object] = {}
    if path is not None:
        if not os.path.exists(path):
            raise FileNotFoundError(f"File not found: {path}")
        with open(path) as f:
            values.update(parse_config_text(f.read()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return build_train_config(values)


def dump_train_config(cfg: TrainConfig) -> str:
    lines = []
    for key, value in cfg.model_dump().items():
        if isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
