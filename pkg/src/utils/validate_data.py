import logging
from typing import List, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

EXPECTED_COLUMNS = ["sx", "sy", "ax", "ay", "r", "nsx", "nsy", "terminal"]


def _first_bad(mask: np.ndarray) -> int:
    return int(np.flatnonzero(mask)[0])


def validate_transitions(df: pd.DataFrame, step_scale: float = None) -> Tuple[bool, List[Tuple[int, str]]]:
    """
    Record-level validation of an offline transition table.

    Every failure names the first offending record (0-based row index) so
    callers can report it; checks run in a fixed order and the first
    failure in the list is the one a loader should raise on.

    Returns:
        (validation_passed, failed_expectations) where each failure is
        (record_index, message).
    """
    failed_expectations = []
    checks_passed = 0
    total_checks = 0

    # === SCHEMA ===
    total_checks += 1
    if list(df.columns) != EXPECTED_COLUMNS:
        failed_expectations.append((0, f"columns {list(df.columns)} != {EXPECTED_COLUMNS}"))
        return False, failed_expectations
    checks_passed += 1

    values = df.to_numpy(dtype=np.float64)

    # === FINITE VALUES ===
    total_checks += 1
    bad = ~np.isfinite(values).all(axis=1)
    if bad.any():
        failed_expectations.append((_first_bad(bad), "non-finite value"))
    else:
        checks_passed += 1

    # === ACTION BOX ===
    total_checks += 1
    actions = values[:, 2:4]
    bad = (np.abs(actions) > 1.0).any(axis=1)
    if bad.any():
        i = _first_bad(bad)
        failed_expectations.append((i, f"action {actions[i].tolist()} outside [-1, 1]^2"))
    else:
        checks_passed += 1

    # === REWARD RANGE ===
    total_checks += 1
    rewards = values[:, 4]
    bad = (rewards < 0.0) | (rewards > 1.0)
    if bad.any():
        i = _first_bad(bad)
        failed_expectations.append((i, f"reward {rewards[i]} outside [0, 1]"))
    else:
        checks_passed += 1

    # === TERMINAL FLAGS ===
    total_checks += 1
    terminal = values[:, 7]
    bad = (terminal != 0.0) & (terminal != 1.0)
    if bad.any():
        i = _first_bad(bad)
        failed_expectations.append((i, f"terminal flag {terminal[i]} is not 0/1"))
    else:
        checks_passed += 1

    # === DYNAMICS CONSISTENCY ===
    if step_scale is not None:
        total_checks += 1
        expected = np.clip(values[:, 0:2] + step_scale * np.clip(actions, -1, 1), -1.0, 1.0)
        bad = (np.abs(values[:, 5:7] - expected) > 1e-9).any(axis=1)
        if bad.any():
            failed_expectations.append((_first_bad(bad), "next state does not follow the dynamics"))
        else:
            checks_passed += 1

    failed_expectations.sort(key=lambda f: f[0])
    validation_passed = not failed_expectations
    if validation_passed:
        logger.debug("transition validation passed: %d/%d checks", checks_passed, total_checks)
    else:
        logger.warning(
            "transition validation failed: %d/%d checks, first failures %s",
            total_checks - checks_passed, total_checks, failed_expectations[:5],
        )
    return validation_passed, failed_expectations
