"""Dense Q-network with hand-written backpropagation and RMSProp.

Everything runs in float64. Parameters are kept as ``(in, out)`` weight
matrices and ``(out,)`` bias vectors so a batch is multiplied as ``x @ W + b``.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

ACTIVATIONS = ("relu",)


class NumericError(ArithmeticError):
    """Raised when a gradient, loss or Q-value stops being finite."""


class CheckpointError(ValueError):
    """Corrupt, truncated or mismatched checkpoint file."""


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_layers: tuple[tuple[int, str], ...] = ((128, "relu"), (128, "relu"))
    output_dim: int = 4

    def __post_init__(self):
        hidden = tuple((int(w), str(act)) for w, act in self.hidden_layers)
        object.__setattr__(self, "hidden_layers", hidden)
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be >= 1")
        for width, act in hidden:
            if width < 1:
                raise ValueError(f"hidden width must be >= 1, got {width}")
            if act not in ACTIVATIONS:
                raise ValueError(f"unsupported activation {act!r}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        widths = [self.input_dim] + [w for w, _ in self.hidden_layers] + [self.output_dim]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def n_params(self) -> int:
        return sum(i * o + o for i, o in self.layer_dims)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_layers": [[w, a] for w, a in self.hidden_layers],
            "output_dim": self.output_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_layers=tuple((int(w), str(a)) for w, a in d["hidden_layers"]),
            output_dim=int(d["output_dim"]),
        )


def _views(flat: np.ndarray, spec: NetworkSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases, offset = [], [], 0
    for fan_in, fan_out in spec.layer_dims:
        weights.append(flat[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out))
        offset += fan_in * fan_out
        biases.append(flat[offset:offset + fan_out])
        offset += fan_out
    return weights, biases


class Network:
    """Q-network parameters.

    All parameters live in one contiguous float64 vector ``flat``;
    ``weights[i]`` (shape ``(in, out)``) and ``biases[i]`` are views into it.
    Mutate them in place, never rebind them.
    """

    def __init__(self, spec: NetworkSpec, flat: np.ndarray | None = None):
        self.spec = spec
        if flat is None:
            flat = np.zeros(spec.n_params)
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {flat.shape}")
        self.flat = flat
        self.weights, self.biases = _views(flat, spec)

    def params(self) -> Iterator[np.ndarray]:
        """Parameters in canonical order W0, b0, W1, b1, ..."""
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "Network":
        return Network(self.spec, self.flat.copy())

    def load_params_from(self, other: "Network") -> None:
        self.flat[...] = other.flat


class GradientBuffer:
    """Gradients laid out exactly like :class:`Network` parameters."""

    def __init__(self, spec: NetworkSpec, flat: np.ndarray | None = None):
        self.spec = spec
        self.flat = np.zeros(spec.n_params) if flat is None else flat
        self.weights, self.biases = _views(self.flat, spec)

    def params(self) -> Iterator[np.ndarray]:
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b


@dataclass
class RMSPropState:
    square_avg: np.ndarray
    smoothing: float = 0.95
    divisor_epsilon: float = 1e-6

    @classmethod
    def zeros_like(cls, net: Network, smoothing: float = 0.95,
                   divisor_epsilon: float = 1e-6) -> "RMSPropState":
        if not 0.0 < smoothing < 1.0:
            raise ValueError("smoothing must lie in (0, 1)")
        if divisor_epsilon <= 0.0:
            raise ValueError("divisor_epsilon must be positive")
        return cls(np.zeros_like(net.flat), smoothing, divisor_epsilon)


def init_network(spec: NetworkSpec, seed: int) -> Network:
    """Glorot-uniform weights from a seeded generator, zero biases."""
    rng = np.random.default_rng(seed)
    net = Network(spec)
    for (fan_in, fan_out), w in zip(spec.layer_dims, net.weights):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    return net


def _check_input(net: Network, batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise ValueError(
            f"expected batch of shape (n, {net.spec.input_dim}), got {np.shape(batch)}"
        )
    return x


def forward_cache(net: Network, batch: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass that also returns the post-activation input of every layer."""
    x = _check_input(net, batch)
    acts = [x]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = x @ w + b
        if i < last:
            np.maximum(x, 0.0, out=x)
            acts.append(x)
    return x, acts


def forward(net: Network, batch: np.ndarray) -> np.ndarray:
    return forward_cache(net, batch)[0]


def backward(net: Network, batch: np.ndarray, upstream_grad: np.ndarray,
             cache: list[np.ndarray] | None = None) -> GradientBuffer:
    """Gradient of ``sum(upstream_grad * forward(net, batch))`` w.r.t. every parameter.

    ``cache`` is the activation list from :func:`forward_cache` for the same
    batch; it is recomputed when omitted.
    """
    if cache is None:
        _, cache = forward_cache(net, batch)
    delta = np.asarray(upstream_grad, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[None, :]
    if delta.shape != (cache[0].shape[0], net.spec.output_dim):
        raise ValueError(
            f"upstream_grad shape {delta.shape} does not match output "
            f"{(cache[0].shape[0], net.spec.output_dim)}"
        )
    grads = GradientBuffer(net.spec, np.empty(net.spec.n_params))
    for i in range(len(net.weights) - 1, -1, -1):
        a_in = cache[i]
        np.matmul(a_in.T, delta, out=grads.weights[i])
        np.sum(delta, axis=0, out=grads.biases[i])
        if i > 0:
            delta = delta @ net.weights[i].T
            # relu derivative; a_in is the relu output so a_in > 0 marks the live units
            delta *= a_in > 0.0
    return grads


def rmsprop_step(net: Network, grads: GradientBuffer, state: RMSPropState, lr: float) -> None:
    """One in-place RMSProp update of ``net`` and ``state``."""
    p, g, s = net.flat, grads.flat, state.square_avg
    if p.shape != g.shape or s.shape != p.shape:
        raise ValueError("gradient/state shapes do not match network")
    # a single reduction is enough: any inf/nan entry makes the sum non-finite
    if not np.isfinite(g.sum()):
        raise NumericError("non-finite gradient passed to rmsprop_step")
    rho = state.smoothing
    tmp = g * g
    tmp *= 1.0 - rho
    s *= rho
    s += tmp
    np.sqrt(s, out=tmp)
    tmp += state.divisor_epsilon
    np.divide(g, tmp, out=tmp)
    tmp *= lr
    p -= tmp


# -- flat binary checkpoints -------------------------------------------------
#
# layout: MAGIC | uint64 LE header length | UTF-8 JSON header | float64 LE payload
# The header lists array shapes in payload order, payload byte count and CRC32.

MAGIC = b"RRCKPT01"


def write_arrays(path: str | os.PathLike, meta: dict, arrays: Sequence[np.ndarray]) -> None:
    payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    header = dict(meta)
    header["arrays"] = [list(a.shape) for a in arrays]
    header["dtype"] = "<f8"
    header["payload_bytes"] = len(payload)
    header["crc32"] = zlib.crc32(payload)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)
    os.replace(tmp, path)


def read_arrays(path: str | os.PathLike) -> tuple[dict, list[np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 8 or not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic or truncated header")
    (hlen,) = struct.unpack_from("<Q", data, len(MAGIC))
    start = len(MAGIC) + 8
    if len(data) < start + hlen:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[start:start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    payload = data[start + hlen:]
    if len(payload) != header.get("payload_bytes"):
        raise CheckpointError(
            f"{path}: payload is {len(payload)} bytes, header says {header.get('payload_bytes')}"
        )
    if zlib.crc32(payload) != header.get("crc32"):
        raise CheckpointError(f"{path}: checksum mismatch")
    flat = np.frombuffer(payload, dtype="<f8")
    arrays, offset = [], 0
    for shape in header["arrays"]:
        n = int(np.prod(shape)) if shape else 1
        arrays.append(flat[offset:offset + n].reshape(shape).astype(np.float64))
        offset += n
    if offset != flat.size:
        raise CheckpointError(f"{path}: array shapes do not cover payload")
    return header, arrays


def network_from_arrays(spec: NetworkSpec, arrays: Sequence[np.ndarray]) -> Network:
    arrays = list(arrays)
    if len(arrays) != 2 * len(spec.layer_dims):
        raise CheckpointError("wrong number of parameter arrays for spec")
    net = Network(spec)
    for dst, src in zip(net.params(), arrays):
        if dst.shape != src.shape:
            raise CheckpointError("parameter shape does not match spec")
        dst[...] = src
    return net


def save_network(net: Network, path: str | os.PathLike) -> None:
    write_arrays(path, {"kind": "network", "spec": net.spec.to_dict()}, list(net.params()))


def load_network(path: str | os.PathLike) -> Network:
    header, arrays = read_arrays(path)
    if header.get("kind") != "network":
        raise CheckpointError(f"{path}: not a network checkpoint")
    return network_from_arrays(NetworkSpec.from_dict(header["spec"]), arrays)
