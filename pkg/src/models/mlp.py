"""
Fixed-topology multilayer perceptrons over flat float64 parameter vectors.

Layers compute y = x @ W + b with W stored row-major as (fan_in, fan_out),
followed by the activation on every hidden layer. The output layer is linear.
"""

import struct
from typing import List, Literal, Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.special import expit

from src.features.build_features import assemble_inputs
from src.utils.errors import CheckpointError, ConfigError, NumericError

ParamVector = npt.NDArray[np.float64]

ACTIVATIONS = ("mish", "relu", "tanh")
_PARAM_MAGIC = b"GTPV"


class MlpSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    input_dim: int = Field(ge=1)
    hidden_dims: Tuple[int, ...]
    output_dim: int = Field(ge=1)
    activation: Literal["mish", "relu", "tanh"] = "mish"
    time_embed_dim: int = Field(default=0, ge=0)
    n_time_inputs: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_dims(self):
        if not self.hidden_dims:
            raise ValueError("hidden_dims must be non-empty")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must be >= 1, got {self.hidden_dims}")
        if self.time_embed_dim % 2:
            raise ValueError(f"time_embed_dim must be even or zero, got {self.time_embed_dim}")
        return self

    @property
    def first_layer_width(self) -> int:
        return self.input_dim + self.n_time_inputs * max(self.time_embed_dim, 1)

    @property
    def layer_dims(self) -> List[int]:
        return [self.first_layer_width, *self.hidden_dims, self.output_dim]


def make_spec(**kwargs) -> MlpSpec:
    """MlpSpec constructor that reports invalid fields as ConfigError."""
    try:
        return MlpSpec(**kwargs)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def layer_layout(spec: MlpSpec) -> List[Tuple[int, Tuple[int, int], int, int]]:
    """Per layer: (weight offset, weight shape, bias offset, bias length)."""
    layout = []
    offset = 0
    dims = spec.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w_off = offset
        offset += fan_in * fan_out
        layout.append((w_off, (fan_in, fan_out), offset, fan_out))
        offset += fan_out
    return layout


def param_count(spec: MlpSpec) -> int:
    dims = spec.layer_dims
    return sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))


def unpack(spec: MlpSpec, params: ParamVector):
    """Views (W, b) per layer into the flat parameter vector."""
    if params.shape != (param_count(spec),):
        raise ConfigError(
            f"parameter vector has shape {params.shape}, expected ({param_count(spec)},)"
        )
    return [
        (params[w:w + fi * fo].reshape(fi, fo), params[b:b + n])
        for w, (fi, fo), b, n in layer_layout(spec)
    ]


def init_params(spec: MlpSpec, rng: np.random.Generator, zero_last: bool = False) -> ParamVector:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    params = np.zeros(param_count(spec), dtype=np.float64)
    layout = layer_layout(spec)
    for i, (w, (fi, fo), b, n) in enumerate(layout):
        if zero_last and i == len(layout) - 1:
            break
        bound = 1.0 / np.sqrt(fi)
        params[w:w + fi * fo] = rng.uniform(-bound, bound, size=fi * fo)
        params[b:b + n] = rng.uniform(-bound, bound, size=n)
    return params


# === ACTIVATIONS ===

def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "mish":
        return z * np.tanh(np.logaddexp(0.0, z))
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "mish":
        tsp = np.tanh(np.logaddexp(0.0, z))
        return tsp + z * (1.0 - tsp * tsp) * expit(z)
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    th = np.tanh(z)
    return 1.0 - th * th


# === FORWARD / BACKWARD ===

def _forward(spec: MlpSpec, params: ParamVector, x: np.ndarray):
    layers = unpack(spec, params)
    acts = [x]
    pres = []
    h = x
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        if i < len(layers) - 1:
            pres.append(z)
            h = _activate(spec.activation, z)
            acts.append(h)
        else:
            h = z
    return h, acts, pres, layers


def mlp_forward(spec: MlpSpec, params: ParamVector, inputs: np.ndarray, times=None) -> np.ndarray:
    """
    Evaluates the network on a batch.

    Args:
        spec (MlpSpec): Architecture.
        params (ParamVector): Flat parameters.
        inputs (np.ndarray): shape (batch, input_dim).
        times: One entry per time input (vector per row or scalar), or a
            (batch, n_time_inputs) matrix. Each is replaced by its sinusoidal
            embedding before the first layer.

    Returns:
        np.ndarray: shape (batch, output_dim).
    """
    if not np.all(np.isfinite(params)):
        raise NumericError("non-finite network parameters")
    x = assemble_inputs(spec, inputs, times)
    out, _, _, _ = _forward(spec, params, x)
    return out


def mlp_grad(
    spec: MlpSpec,
    params: ParamVector,
    inputs: np.ndarray,
    times,
    upstream: np.ndarray,
) -> Tuple[ParamVector, np.ndarray]:
    """
    Reverse-mode gradient of <upstream, output>.

    Returns:
        (param_grad, input_grad): param_grad has the layout of `params`;
        input_grad has the shape of `inputs` (time columns are constants).
    """
    x = assemble_inputs(spec, inputs, times)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (x.shape[0], spec.output_dim):
        raise ConfigError(
            f"upstream shape {upstream.shape} does not match output ({x.shape[0]}, {spec.output_dim})"
        )

    _, acts, pres, layers = _forward(spec, params, x)
    grad = np.zeros_like(params)
    layout = layer_layout(spec)

    g = upstream
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        w_off, (fi, fo), b_off, n = layout[i]
        grad[w_off:w_off + fi * fo] = (acts[i].T @ g).reshape(-1)
        grad[b_off:b_off + n] = g.sum(axis=0)
        g = g @ W.T
        if i > 0:
            g = g * _activate_grad(spec.activation, pres[i - 1])

    return grad, g[:, :spec.input_dim]


# === SERIALIZATION ===

def serialize_params(spec: MlpSpec, params: ParamVector) -> bytes:
    """
    Little-endian layout: magic, n_dims, dims, activation code, length, values.

    dims = [input_dim, n_time_inputs, time_embed_dim, *hidden_dims, output_dim]
    """
    dims = [spec.input_dim, spec.n_time_inputs, spec.time_embed_dim, *spec.hidden_dims, spec.output_dim]
    values = np.ascontiguousarray(params, dtype="<f8")
    if values.shape != (param_count(spec),):
        raise ConfigError("parameter vector does not match its spec")
    head = _PARAM_MAGIC + struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}q", *dims)
    head += struct.pack("<IQ", ACTIVATIONS.index(spec.activation), values.size)
    return head + values.tobytes()


def deserialize_params(buf: bytes) -> Tuple[MlpSpec, ParamVector]:
    if len(buf) < 8 or buf[:4] != _PARAM_MAGIC:
        raise CheckpointError("parameter block has a bad magic")
    try:
        (n_dims,) = struct.unpack_from("<I", buf, 4)
        dims = struct.unpack_from(f"<{n_dims}q", buf, 8)
        pos = 8 + 8 * n_dims
        act_code, length = struct.unpack_from("<IQ", buf, pos)
        pos += 12
    except struct.error as e:
        raise CheckpointError(f"truncated parameter block: {e}") from e
    if n_dims < 5 or act_code >= len(ACTIVATIONS):
        raise CheckpointError("corrupt parameter block header")
    if len(buf) != pos + 8 * length:
        raise CheckpointError(
            f"parameter block holds {len(buf) - pos} value bytes, header says {8 * length}"
        )
    try:
        spec = MlpSpec(
            input_dim=dims[0],
            n_time_inputs=dims[1],
            time_embed_dim=dims[2],
            hidden_dims=tuple(dims[3:-1]),
            output_dim=dims[-1],
            activation=ACTIVATIONS[act_code],
        )
    except ValidationError as e:
        raise CheckpointError(f"invalid architecture in parameter block: {e}") from e
    values = np.frombuffer(buf, dtype="<f8", count=length, offset=pos).astype(np.float64)
    if values.size != param_count(spec):
        raise CheckpointError("parameter count does not match the stored architecture")
    return spec, values
