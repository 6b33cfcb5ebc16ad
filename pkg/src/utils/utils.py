import logging
import sys
from typing import Optional

import numpy as np

from src.utils.errors import NumericError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logger(name: str, log_file: Optional[str] = None, level=logging.INFO):
    """
    Creates and configures a logger.

    Args:
        name (str): Logger name.
        log_file (str): Optional file to log to, in addition to stderr.
        level: Logging level.
    """
    formatter = logging.Formatter(LOG_FORMAT)
    logger = logging.getLogger(name)
    logger.setLevel(level)

    # calling twice (e.g. once per CLI command in tests) must not duplicate lines
    for old in list(logger.handlers):
        logger.removeHandler(old)
        old.close()

    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(formatter)
    logger.addHandler(stream)

    if log_file:
        handler = logging.FileHandler(log_file)
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    return logger


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """
    Independent PCG64 generator for (seed, *stream).

    Streams with different ids never overlap, so sub-tasks (evaluation,
    Monte-Carlo shards, dataset generation) can draw without consuming
    the training stream.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(seq))


def ensure_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise NumericError(f"non-finite values in {what}")
    return values


# stream ids for make_rng
DATA_STREAM = 1
TRAIN_STREAM = 2
EVAL_STREAM = 3
DIAG_STREAM = 4
SAMPLE_STREAM = 5
