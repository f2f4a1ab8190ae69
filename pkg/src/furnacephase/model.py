"""
The window regressor: conv -> relu -> maxpool -> flatten -> dense -> dense(tanh).

Training is mini-batch Adam on mean squared error. Model files are JSON
documents holding the configuration and each weight array as base64 of its
little-endian float64 bytes, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import nncore
from .ingestion import NormStats
from .windowing import WindowSet

logger = logging.getLogger(__name__)

FORMAT_NAME = "furnacephase-model"
FORMAT_VERSION = 1
PARAM_NAMES = ("conv_w", "conv_b", "hidden_w", "hidden_b", "out_w", "out_b")
ACTIVATIONS = ("relu", "tanh", "linear")


class ModelConfigError(ValueError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class ModelFileError(ValueError):
    """Base class for unreadable model files."""


class CorruptModelError(ModelFileError):
    pass


class VersionMismatchError(ModelFileError):
    pass


class ShapeMismatchError(ModelFileError):
    def __init__(self, message: str, field_name: str):
        super().__init__(message)
        self.field_name = field_name


@dataclass(frozen=True)
class ModelConfig:
    window_len: int = 21
    channels: int = 1
    filters: int = 64
    kernel_size: int = 3
    pool_size: int = 2
    hidden_units: int = 64
    hidden_activation: str = "relu"
    output_activation: str = "tanh"
    seed: int = 0

    def __post_init__(self):
        for name in ("window_len", "channels", "filters", "kernel_size", "pool_size",
                     "hidden_units"):
            if getattr(self, name) < 1:
                raise ModelConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.kernel_size > self.window_len:
            raise ModelConfigError(
                f"kernel_size {self.kernel_size} exceeds window_len {self.window_len}")
        for name in ("hidden_activation", "output_activation"):
            if getattr(self, name) not in ACTIVATIONS:
                raise ModelConfigError(f"{name} must be one of {ACTIVATIONS}")
        if self.pooled_len < 1:
            raise ModelConfigError("pooling leaves no time steps; flatten size would be 0")

    @property
    def conv_len(self) -> int:
        return self.window_len - self.kernel_size + 1

    @property
    def pooled_len(self) -> int:
        return self.conv_len // self.pool_size

    @property
    def flatten_size(self) -> int:
        return self.pooled_len * self.filters

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        return {
            "conv_w": (self.kernel_size, self.channels, self.filters),
            "conv_b": (self.filters,),
            "hidden_w": (self.hidden_units, self.flatten_size),
            "hidden_b": (self.hidden_units,),
            "out_w": (1, self.hidden_units),
            "out_b": (1,),
        }


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ModelConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ModelConfigError("batch_size must be >= 1")
        if not self.lr >= 0:
            raise ModelConfigError("lr must be non-negative")


@dataclass
class ModelParams:
    config: ModelConfig
    arrays: dict[str, np.ndarray]
    normalization: NormStats | None = None

    def __post_init__(self):
        shapes = self.config.param_shapes()
        if set(self.arrays) != set(shapes):
            raise ShapeMismatchError(f"expected parameters {sorted(shapes)}", "arrays")
        for name, shape in shapes.items():
            arr = self.arrays[name]
            if arr.shape != shape:
                raise ShapeMismatchError(f"{name} has shape {arr.shape}, config implies {shape}",
                                         name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")

    def copy(self) -> "ModelParams":
        return ModelParams(self.config, {k: v.copy() for k, v in self.arrays.items()},
                           self.normalization)

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays.values())


def build_model(cfg: ModelConfig) -> ModelParams:
    """Glorot-uniform weights, zero biases; deterministic per ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    k, c, f = cfg.kernel_size, cfg.channels, cfg.filters

    def glorot(shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    arrays = {
        "conv_w": glorot((k, c, f), k * c, k * f),
        "conv_b": np.zeros(f),
        "hidden_w": glorot((cfg.hidden_units, cfg.flatten_size), cfg.flatten_size,
                           cfg.hidden_units),
        "hidden_b": np.zeros(cfg.hidden_units),
        "out_w": glorot((1, cfg.hidden_units), cfg.hidden_units, 1),
        "out_b": np.zeros(1),
    }
    return ModelParams(cfg, arrays)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return nncore.relu(z)
    if name == "tanh":
        return nncore.tanh(z)
    return z


def _activate_backward(name: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "relu":
        return nncore.relu_backward(z, g)
    if name == "tanh":
        return nncore.tanh_backward(a, g)
    return g


def _forward_cached(m: ModelParams, x: np.ndarray):
    cfg, p = m.config, m.arrays
    if x.shape[1:] != (cfg.window_len, cfg.channels):
        raise ValueError(
            f"window shape {x.shape[1:]} does not match model ({cfg.window_len}, {cfg.channels})")
    conv_z = nncore.conv1d_forward(x, p["conv_w"], p["conv_b"])
    conv_a = nncore.relu(conv_z)
    pooled, argmax = nncore.maxpool1d_forward(conv_a, cfg.pool_size)
    flat = pooled.reshape(len(x), -1)
    hid_z = nncore.dense_forward(flat, p["hidden_w"], p["hidden_b"])
    hid_a = _activate(cfg.hidden_activation, hid_z)
    out_z = nncore.dense_forward(hid_a, p["out_w"], p["out_b"])
    out_a = _activate(cfg.output_activation, out_z)
    cache = (x, conv_z, argmax, pooled.shape, flat, hid_z, hid_a, out_z, out_a)
    return out_a[:, 0], cache


def predict_batch(m: ModelParams, x: np.ndarray) -> np.ndarray:
    """Predictions for a batch of windows of shape ``(n, w, c)``."""
    x = np.asarray(x, dtype=np.float64)
    return _forward_cached(m, x)[0]


def forward(m: ModelParams, window: np.ndarray) -> float:
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    return float(predict_batch(m, window[None])[0])


def loss_and_grads(m: ModelParams, x: np.ndarray, y: np.ndarray):
    """MSE loss on a batch and its exact gradient for every parameter."""
    cfg, p = m.config, m.arrays
    pred, cache = _forward_cached(m, x)
    x, conv_z, argmax, pooled_shape, flat, hid_z, hid_a, out_z, out_a = cache
    loss, g_pred = nncore.mse_loss(pred, y)

    g_out_z = _activate_backward(cfg.output_activation, out_z, out_a, g_pred[:, None])
    g_hid_a, g_out_w, g_out_b = nncore.dense_backward(hid_a, p["out_w"], g_out_z)
    g_hid_z = _activate_backward(cfg.hidden_activation, hid_z, hid_a, g_hid_a)
    g_flat, g_hid_w, g_hid_b = nncore.dense_backward(flat, p["hidden_w"], g_hid_z)
    g_pooled = g_flat.reshape(pooled_shape)
    g_conv_a = nncore.maxpool1d_backward(g_pooled, argmax, conv_z.shape[1])
    g_conv_z = nncore.relu_backward(conv_z, g_conv_a)
    _, g_conv_w, g_conv_b = nncore.conv1d_backward(x, p["conv_w"], g_conv_z)
    grads = {"conv_w": g_conv_w, "conv_b": g_conv_b, "hidden_w": g_hid_w,
             "hidden_b": g_hid_b, "out_w": g_out_w, "out_b": g_out_b}
    return loss, grads


def train(m: ModelParams, data: WindowSet, tc: TrainConfig) -> tuple[ModelParams, list[float]]:
    """
    Mini-batch Adam on MSE. Returns new parameters and the per-epoch mean loss.

    The input parameters are not modified. Each epoch shuffles with a
    generator seeded from ``tc.seed``, so identical inputs give identical
    histories and weights.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty window set")
    out = m.copy()
    params = out.arrays
    state = nncore.AdamState()
    rng = np.random.default_rng(tc.seed)
    n = len(data)
    history: list[float] = []
    for epoch in range(tc.epochs):
        order = rng.permutation(n)
        total = 0.0
        for b, lo in enumerate(range(0, n, tc.batch_size)):
            idx = order[lo:lo + tc.batch_size]
            loss, grads = loss_and_grads(out, data.inputs[idx], data.targets[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}", epoch, b)
            total += loss * len(idx)
            nncore.adam_step(params, grads, state, tc.lr, tc.beta1, tc.beta2, tc.eps)
        history.append(total / n)
        logger.debug("epoch %d loss %.6g", epoch, history[-1])
    return out, history


def format_history_csv(history: list[float]) -> str:
    lines = ["epoch,loss"] + [f"{i},{loss!r}" for i, loss in enumerate(history)]
    return "\n".join(lines) + "\n"


def _encode(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape),
            "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii")}


def save_model(m: ModelParams) -> bytes:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": asdict(m.config),
        "params": {name: _encode(m.arrays[name]) for name in PARAM_NAMES},
    }
    if m.normalization is not None:
        doc["normalization"] = m.normalization.to_dict()
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")


def load_model(payload: bytes) -> ModelParams:
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModelError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptModelError("not a furnacephase model file")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model file version {doc.get('version')!r}, this build reads {FORMAT_VERSION}")
    try:
        known = {f.name for f in fields(ModelConfig)}
        cfg = ModelConfig(**{k: v for k, v in doc["config"].items() if k in known})
        raw_params = doc["params"]
    except (KeyError, TypeError, AttributeError) as exc:
        raise CorruptModelError(f"model file is missing fields: {exc}") from None

    arrays = {}
    for name, shape in cfg.param_shapes().items():
        if name not in raw_params:
            raise CorruptModelError(f"parameter {name} missing")
        entry = raw_params[name]
        try:
            declared = tuple(int(d) for d in entry["shape"])
            raw = base64.b64decode(entry["data"], validate=True)
        except (KeyError, TypeError, ValueError, binascii.Error) as exc:
            raise CorruptModelError(f"parameter {name} is unreadable: {exc}") from None
        if len(raw) != 8 * int(np.prod(declared)):
            raise ShapeMismatchError(
                f"{name}: declared shape {declared} needs {8 * int(np.prod(declared))} bytes, "
                f"payload has {len(raw)}", name)
        if declared != shape:
            raise ShapeMismatchError(f"{name}: declared shape {declared}, config implies {shape}",
                                     name)
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    norm = doc.get("normalization")
    return ModelParams(cfg, arrays, NormStats.from_dict(norm) if norm else None)
