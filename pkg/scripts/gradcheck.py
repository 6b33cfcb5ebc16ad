"""Central-difference helpers shared by the gradient tests."""

import numpy as np

FD_STEP = 1e-4
RTOL = 1e-4


def numeric_grad(loss_fn, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """d loss_fn / d x by central differences; x is perturbed in place and restored."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = loss_fn(x)
        flat[i] = orig - step
        down = loss_fn(x)
        flat[i] = orig
        g[i] = (up - down) / (2 * step)
    return grad


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = RTOL, atol: float = 1e-8):
    err = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    bad = err > rtol * scale + atol
    assert not bad.any(), (
        f"{bad.sum()} gradient entries disagree; worst abs error {err.max():.3e} "
        f"at index {int(np.argmax(err))}"
    )
