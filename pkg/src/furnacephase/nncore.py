"""
Numeric kernels for the 1D-CNN: forward and exact backward passes.

Arrays are float64 and batched along the first axis: a batch of windows has
shape ``(batch, time, channels)``. Single windows of shape ``(time,
channels)`` are accepted by the forward kernels and promoted to a batch of
one. Convolution is "valid" (no padding) cross-correlation, so a length
``w`` input and a kernel of size ``k`` give ``w - k + 1`` output steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ValueError(f"expected (batch, time, channels) or (time, channels), got {x.shape}")
    return x, False


def conv1d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """
    ``out[b, t, f] = bias[f] + sum_{j, ch} x[b, t + j, ch] * kernels[j, ch, f]``.

    Parameters
    ----------
    x : ndarray, shape (batch, w, c) or (w, c)
    kernels : ndarray, shape (k, c, f)
    bias : ndarray, shape (f,)
    """
    xb, single = _as_batch(x)
    k, c, f = kernels.shape
    if xb.shape[2] != c:
        raise ValueError(f"input has {xb.shape[2]} channels, kernels expect {c}")
    if bias.shape != (f,):
        raise ValueError(f"bias shape {bias.shape} does not match {f} filters")
    w = xb.shape[1]
    if w < k:
        raise ValueError(f"input length {w} shorter than kernel size {k}")
    n_out = w - k + 1
    out = np.broadcast_to(bias, (xb.shape[0], n_out, f)).copy()
    for j in range(k):
        out += xb[:, j:j + n_out, :] @ kernels[j]
    return out[0] if single else out


def conv1d_backward(x: np.ndarray, kernels: np.ndarray, grad_out: np.ndarray):
    """Return ``(grad_x, grad_kernels, grad_bias)`` for :func:`conv1d_forward`."""
    xb, single = _as_batch(x)
    gb, _ = _as_batch(grad_out)
    k, c, f = kernels.shape
    n_out = xb.shape[1] - k + 1
    if gb.shape != (xb.shape[0], n_out, f):
        raise ValueError(f"upstream gradient shape {gb.shape} does not match {(xb.shape[0], n_out, f)}")
    grad_x = np.zeros_like(xb)
    grad_k = np.empty_like(kernels)
    for j in range(k):
        xs = xb[:, j:j + n_out, :]
        grad_k[j] = xs.reshape(-1, c).T @ gb.reshape(-1, f)
        grad_x[:, j:j + n_out, :] += gb @ kernels[j].T
    grad_b = gb.reshape(-1, f).sum(axis=0)
    return (grad_x[0] if single else grad_x), grad_k, grad_b


def maxpool1d_forward(x: np.ndarray, pool: int):
    """
    Non-overlapping max pooling along time; trailing ``n % pool`` steps are dropped.

    Returns the pooled array and the absolute time index of each maximum
    (earliest index on ties).
    """
    xb, single = _as_batch(x)
    if pool < 1:
        raise ValueError(f"pool must be >= 1, got {pool}")
    b, n, f = xb.shape
    if n < pool:
        raise ValueError(f"input length {n} shorter than pool size {pool}")
    n_out = n // pool
    blocks = xb[:, :n_out * pool, :].reshape(b, n_out, pool, f)
    local = blocks.argmax(axis=2)
    out = np.take_along_axis(blocks, local[:, :, None, :], axis=2)[:, :, 0, :]
    idx = local + (np.arange(n_out) * pool)[None, :, None]
    if single:
        return out[0], idx[0]
    return out, idx


def maxpool1d_backward(grad_out: np.ndarray, argmax: np.ndarray, input_len: int) -> np.ndarray:
    gb, single = _as_batch(grad_out)
    ib = argmax[None] if single else argmax
    b, n_out, f = gb.shape
    grad_x = np.zeros((b, input_len, f))
    bi = np.arange(b)[:, None, None]
    fi = np.arange(f)[None, None, :]
    # blocks are disjoint, so plain fancy assignment never collides
    grad_x[bi, ib, fi] = gb
    return grad_x[0] if single else grad_x


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``out = W x + b`` for each row of ``x``; ``W`` has shape (out, in)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != weight.shape[1]:
        raise ValueError(f"input size {x.shape[-1]} does not match weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ValueError(f"bias shape {bias.shape} does not match weight {weight.shape}")
    return x @ weight.T + bias


def dense_backward(x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray):
    x2 = np.atleast_2d(x)
    g2 = np.atleast_2d(grad_out)
    if g2.shape != (x2.shape[0], weight.shape[0]):
        raise ValueError(f"upstream gradient shape {g2.shape} does not match output")
    grad_x = g2 @ weight
    grad_w = g2.T @ x2
    grad_b = g2.sum(axis=0)
    if np.ndim(x) == 1:
        grad_x = grad_x[0]
    return grad_x, grad_w, grad_b


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # derivative at exactly 0 is taken as 0
    return grad_out * (x > 0)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(y: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Backward of tanh given its *output* ``y``."""
    return grad_out * (1.0 - y * y)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise ValueError("empty prediction")
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / pred.size


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if params.keys() != grads.keys():
        raise ValueError("parameter and gradient names differ")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name in sorted(params):
        p, g = params[name], grads[name]
        if p.shape != g.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                         h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function; ``x`` is not modified."""
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        grad[i] = (fp - fm) / (2 * h)
    return grad.reshape(x.shape)
