"""
Binary checkpoint format.

    8 bytes   b"GTPCKPT\\n"
    uint32    format version
    uint64    header length H
    H bytes   JSON header (sorted keys)
    blocks    serialized parameter vectors, in the order listed by the header

Everything is little-endian and contains no timestamps or paths, so equal
training states give byte-identical files.
"""

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from src.data.multigoal_env import MultiGoalEnvSpec
from src.models.critic import DoubleCritic
from src.models.flowmap import FlowMapNet
from src.models.mlp import deserialize_params, serialize_params
from src.models.optim import AdamState
from src.models.train_state import TrainState
from src.utils.config import TrainConfig, build_train_config
from src.utils.errors import CheckpointError, ConfigError

MAGIC = b"GTPCKPT\n"
FORMAT_VERSION = 1

BLOCKS = [
    "actor", "actor_ema", "q1", "q2", "q1_target", "q2_target",
    "adam_actor_m", "adam_actor_v", "adam_q1_m", "adam_q1_v", "adam_q2_m", "adam_q2_v",
]


@dataclass
class Checkpoint:
    config: TrainConfig
    state: TrainState
    env_spec: MultiGoalEnvSpec
    state_mean: np.ndarray
    state_std: np.ndarray


def encode_checkpoint(config: TrainConfig, state, env_spec: MultiGoalEnvSpec, state_mean, state_std) -> bytes:
    actor, critic = state.actor, state.critic
    pairs = {
        "actor": (actor.spec, actor.params),
        "actor_ema": (actor.spec, actor.ema_params),
        "q1": (critic.spec, critic.q1),
        "q2": (critic.spec, critic.q2),
        "q1_target": (critic.spec, critic.q1_target),
        "q2_target": (critic.spec, critic.q2_target),
        "adam_actor_m": (actor.spec, state.adam_actor.m),
        "adam_actor_v": (actor.spec, state.adam_actor.v),
        "adam_q1_m": (critic.spec, state.adam_q1.m),
        "adam_q1_v": (critic.spec, state.adam_q1.v),
        "adam_q2_m": (critic.spec, state.adam_q2.m),
        "adam_q2_v": (critic.spec, state.adam_q2.v),
    }
    blobs = [serialize_params(*pairs[name]) for name in BLOCKS]
    header = {
        "config": config.model_dump(mode="json"),
        "iteration": int(state.iteration),
        "rng_state": state.rng.bit_generator.state,
        "env_spec": env_spec.model_dump(mode="json"),
        "state_mean": [float(v) for v in state_mean],
        "state_std": [float(v) for v in state_std],
        "action_dim": int(actor.action_dim),
        "adam_steps": {
            "actor": state.adam_actor.step_count,
            "q1": state.adam_q1.step_count,
            "q2": state.adam_q2.step_count,
        },
        "blocks": [[name, len(b)] for name, b in zip(BLOCKS, blobs)],
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<IQ", FORMAT_VERSION, len(head)) + head + b"".join(blobs)


def save_checkpoint(path: str, config: TrainConfig, state, env_spec, state_mean, state_std) -> str:
    """Atomic write: `<path>.tmp` then rename."""
    payload = encode_checkpoint(config, state, env_spec, state_mean, state_std)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)
    return path


def decode_checkpoint(payload: bytes) -> Checkpoint:
    if payload[:len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    pos = len(MAGIC)
    try:
        version, head_len = struct.unpack_from("<IQ", payload, pos)
    except struct.error as e:
        raise CheckpointError("truncated checkpoint header") from e
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version}, this build reads {FORMAT_VERSION}")
    pos += 12
    try:
        header = json.loads(payload[pos:pos + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from e
    pos += head_len

    blocks = {}
    for name, size in header["blocks"]:
        chunk = payload[pos:pos + size]
        if len(chunk) != size:
            raise CheckpointError(f"truncated checkpoint block {name!r}")
        blocks[name] = deserialize_params(chunk)
        pos += size
    if pos != len(payload):
        raise CheckpointError("trailing bytes after the last checkpoint block")
    missing = [b for b in BLOCKS if b not in blocks]
    if missing:
        raise CheckpointError(f"checkpoint misses blocks {missing}")

    try:
        config = build_train_config(header["config"])
        env_spec = MultiGoalEnvSpec(**header["env_spec"])
    except (ConfigError, ValueError, TypeError) as e:
        raise CheckpointError(f"invalid configuration in checkpoint: {e}") from e

    actor_spec, actor_params = blocks["actor"]
    actor = FlowMapNet.from_spec(actor_spec, actor_params, blocks["actor_ema"][1], header["action_dim"])
    critic_spec = blocks["q1"][0]
    critic = DoubleCritic(
        critic_spec, blocks["q1"][1], blocks["q2"][1], blocks["q1_target"][1], blocks["q2_target"][1]
    )

    def adam(prefix: str, lr: float) -> AdamState:
        return AdamState(
            m=blocks[f"adam_{prefix}_m"][1], v=blocks[f"adam_{prefix}_v"][1],
            step_count=int(header["adam_steps"][prefix]), lr=lr,
        )

    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = header["rng_state"]
    state = TrainState(
        actor=actor,
        critic=critic,
        adam_actor=adam("actor", config.lr_actor),
        adam_q1=adam("q1", config.lr_critic),
        adam_q2=adam("q2", config.lr_critic),
        iteration=int(header["iteration"]),
        rng=rng,
    )
    return Checkpoint(
        config=config,
        state=state,
        env_spec=env_spec,
        state_mean=np.asarray(header["state_mean"], dtype=np.float64),
        state_std=np.asarray(header["state_std"], dtype=np.float64),
    )


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise FileNotFoundError(f"File not found: {path}")
    with open(path, "rb") as f:
        payload = f.read()
    try:
        return decode_checkpoint(payload)
    except KeyError as e:
        raise CheckpointError(f"checkpoint header misses {e}") from e
