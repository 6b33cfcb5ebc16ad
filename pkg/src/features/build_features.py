import numpy as np

from src.utils.errors import ConfigError, NumericError


def time_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """
    Sinusoidal embedding of scalar times.

    Frequencies are geometric from 1 to 1000; the first half of the
    output holds the sines, the second half the cosines.

    Args:
        t (np.ndarray): Times, shape (batch,).
        dim (int): Even embedding width. 0 returns the raw time as one column.

    Returns:
        np.ndarray: shape (batch, max(dim, 1)).
    """
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    if dim == 0:
        return t[:, None]
    if dim % 2:
        raise ConfigError(f"time embedding width must be even, got {dim}")
    freqs = np.geomspace(1.0, 1000.0, dim // 2)
    angles = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def _time_columns(times, batch: int, n_time_inputs: int) -> list:
    if n_time_inputs == 0:
        if times is not None and len(np.atleast_1d(times)) > 0:
            raise ConfigError("network takes no time inputs but times were given")
        return []
    if times is None:
        raise ConfigError(f"network expects {n_time_inputs} time input(s), got none")

    if isinstance(times, np.ndarray) and times.ndim == 2:
        cols = [times[:, j] for j in range(times.shape[1])]
    elif isinstance(times, (list, tuple)):
        cols = list(times)
    else:
        cols = [times]

    if len(cols) != n_time_inputs:
        raise ConfigError(f"network expects {n_time_inputs} time input(s), got {len(cols)}")

    # scalars broadcast over the batch
    return [np.broadcast_to(np.asarray(c, dtype=np.float64), (batch,)) for c in cols]


def assemble_inputs(spec, inputs: np.ndarray, times=None) -> np.ndarray:
    """
    Builds the first-layer input matrix: raw inputs followed by one
    embedding block per scalar time input.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ConfigError(
            f"input shape {x.shape} does not match input_dim={spec.input_dim}"
        )
    cols = _time_columns(times, x.shape[0], spec.n_time_inputs)

    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite network input")
    for c in cols:
        if not np.all(np.isfinite(c)):
            raise NumericError("non-finite time input")

    blocks = [x] + [time_embedding(c, spec.time_embed_dim) for c in cols]
    return np.concatenate(blocks, axis=1) if len(blocks) > 1 else x
