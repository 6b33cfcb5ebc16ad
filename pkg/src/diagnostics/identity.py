from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.models.losses import identity_residual
from src.utils.errors import ConfigError
from src.utils.utils import DIAG_STREAM, make_rng

CONSTANT_VELOCITY = np.array([0.7, -0.3])
PASS_TOLERANCE = 1e-6


def constant_field_phi(c: np.ndarray = CONSTANT_VELOCITY) -> Callable:
    """Exact phi for dx/dt = c: x - t * c, independent of s."""
    def phi(x, t, s):
        return x - t[:, None] * c
    return phi


def linear_field_phi(x, t, s):
    """
    Exact phi for dx/dt = x:  x + x * t * (e^(s-t) - 1) / (t - s),
    with the s = t limit x * (1 - t).
    """
    t_, s_ = t[:, None], s[:, None]
    gap = t_ - s_
    safe = np.where(gap == 0, 1.0, gap)
    general = x + x * t_ * np.expm1(s_ - t_) / safe
    return np.where(gap == 0, x * (1.0 - t_), general)


@dataclass
class IdentityResult:
    case: str
    max_residual: float
    passed: bool
    negative_control: bool


def run_identity_diagnostic(case: str, samples: int = 1000, seed: int = 0, negative_control: bool = False) -> IdentityResult:
    """
    Evaluates the identity residual of the closed-form map at random
    (x, t, s) with t in [0.5, 2], s in [0.2 t, 0.9 t], x in [-2, 2]^2.

    The negative control adds 0.1 * s to the exact map.
    """
    if case == "constant":
        phi = constant_field_phi()
    elif case == "linear":
        phi = linear_field_phi
    else:
        raise ConfigError(f"unknown identity case {case!r}")
    if samples < 1:
        raise ConfigError("samples must be >= 1")

    if negative_control:
        exact = phi

        def phi(x, t, s):
            return exact(x, t, s) + 0.1 * s[:, None]

    rng = make_rng(seed, DIAG_STREAM, 2)
    t = rng.uniform(0.5, 2.0, size=samples)
    s = t * rng.uniform(0.2, 0.9, size=samples)
    x = rng.uniform(-2.0, 2.0, size=(samples, 2))

    residual = identity_residual(phi, x, t, s)
    max_res = float(np.max(np.linalg.norm(residual, axis=1)))
    return IdentityResult(case, max_res, max_res <= PASS_TOLERANCE, negative_control)
