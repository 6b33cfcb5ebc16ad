"""
Offline dataset file format.

    # gtp-dataset v1
    # env_spec: {...}
    # seed: 0
    # state_mean: [...]
    # state_std: [...]
    # episode_goals: [...]
    sx,sy,ax,ay,r,nsx,nsy,terminal
    one transition per line

Header values are JSON with sorted keys; floats are written in shortest
round-trip form, so read(write(d)) reproduces every value exactly.
"""

import io
import json
import os

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.data.dataset import COLUMNS, OfflineDataset
from src.data.multigoal_env import MultiGoalEnvSpec
from src.data.preprocess import compute_normalization
from src.utils.errors import DatasetParseError, DatasetValidationError
from src.utils.validate_data import validate_transitions

MAGIC = "# gtp-dataset v1"
HEADER_KEYS = ["env_spec", "seed", "state_mean", "state_std", "episode_goals"]


def write_dataset(path: str, dataset: OfflineDataset) -> None:
    header = {
        "env_spec": dataset.env_spec.model_dump(mode="json"),
        "seed": int(dataset.seed),
        "state_mean": [float(v) for v in dataset.state_mean],
        "state_std": [float(v) for v in dataset.state_std],
        "episode_goals": [int(g) for g in dataset.episode_goals],
    }
    df = pd.DataFrame(dataset.to_matrix(), columns=COLUMNS)
    df["terminal"] = dataset.terminals.astype(int)

    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="\n") as f:
        f.write(MAGIC + "\n")
        for key in HEADER_KEYS:
            f.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
        df.to_csv(f, index=False, lineterminator="\n")
    os.replace(tmp, path)


def _parse_header(lines):
    if not lines:
        raise DatasetParseError("empty file", line=1)
    if lines[0].rstrip("\n") != MAGIC:
        raise DatasetParseError(f"expected {MAGIC!r}", line=1)

    header = {}
    for offset, key in enumerate(HEADER_KEYS):
        lineno = offset + 2
        if lineno > len(lines):
            raise DatasetParseError(f"missing header key {key!r}", line=lineno)
        text = lines[lineno - 1].rstrip("\n")
        prefix = f"# {key}: "
        if not text.startswith(prefix):
            raise DatasetParseError(f"expected header key {key!r}", line=lineno)
        try:
            header[key] = json.loads(text[len(prefix):])
        except json.JSONDecodeError as e:
            raise DatasetParseError(f"bad JSON for {key!r}: {e.msg}", line=lineno) from e
    return header


def load_data(file_path: str, validate: bool = True) -> OfflineDataset:
    """
    Reads an offline dataset file.

    Raises:
        FileNotFoundError: if the file does not exist.
        DatasetParseError: malformed file, with the 1-based line number.
        DatasetValidationError: a record breaks an invariant, naming its index.
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"File not found: {file_path}")

    with open(file_path) as f:
        lines = f.readlines()

    header = _parse_header(lines)
    body_start = len(HEADER_KEYS) + 2  # 1-based line of the column header
    if len(lines) < body_start:
        raise DatasetParseError("missing column header", line=body_start)
    if lines[body_start - 1].strip() != ",".join(COLUMNS):
        raise DatasetParseError(f"expected column header {','.join(COLUMNS)}", line=body_start)

    body = lines[body_start:]
    if not body:
        raise DatasetParseError("no transitions", line=body_start + 1)
    for i, text in enumerate(body):
        if text.count(",") != len(COLUMNS) - 1:
            raise DatasetParseError(
                f"expected {len(COLUMNS)} fields, got {text.count(',') + 1}", line=body_start + 1 + i
            )

    raw = pd.read_csv(
        io.StringIO("".join(lines[body_start - 1:])), dtype=str, keep_default_na=False
    )
    df = raw.apply(pd.to_numeric, errors="coerce")
    bad_rows = np.flatnonzero(df.isna().to_numpy().any(axis=1))
    if bad_rows.size:
        # re-parse with full precision below; here only locate unparsable text
        row = int(bad_rows[0])
        raise DatasetParseError("non-numeric field", line=body_start + 1 + row)
    df = pd.read_csv(io.StringIO("".join(lines[body_start - 1:])), float_precision="round_trip")

    try:
        env_spec = MultiGoalEnvSpec(**header["env_spec"])
    except (TypeError, ValidationError) as e:
        raise DatasetParseError(f"invalid env_spec: {e}", line=2) from e

    if validate:
        passed, failures = validate_transitions(df, step_scale=env_spec.step_scale)
        if not passed:
            record, message = failures[0]
            raise DatasetValidationError(message, record=record)

    values = df.to_numpy(dtype=np.float64)
    dataset = OfflineDataset(
        states=values[:, 0:2].copy(),
        actions=values[:, 2:4].copy(),
        rewards=values[:, 4].copy(),
        next_states=values[:, 5:7].copy(),
        terminals=values[:, 7] == 1.0,
        env_spec=env_spec,
        seed=int(header["seed"]),
        state_mean=np.asarray(header["state_mean"], dtype=np.float64),
        state_std=np.asarray(header["state_std"], dtype=np.float64),
        episode_goals=[int(g) for g in header["episode_goals"]],
    )

    if validate:
        mean, std = compute_normalization(dataset.states)
        if not (np.allclose(mean, dataset.state_mean, rtol=0, atol=1e-10)
                and np.allclose(std, dataset.state_std, rtol=0, atol=1e-10)):
            raise DatasetValidationError("stored normalization does not match the transitions", record=0)
    return dataset
