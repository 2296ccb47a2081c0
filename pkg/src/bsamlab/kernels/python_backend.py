"""Numpy implementation of the MLP forward/backward kernels.

Network: affine layers with ReLU between them, mean softmax cross-entropy
on the last layer's logits. Parameters are a flat float64 vector laid out
as W0, b0, W1, b1, ... with each W stored row-major as (fan_in, fan_out).
"""
import numpy as np

BACKEND_NAME = "python"


def param_count(sizes) -> int:
    return int(sum((sizes[i] + 1) * sizes[i + 1] for i in range(len(sizes) - 1)))


def _unpack(theta: np.ndarray, sizes):
    weights, biases = [], []
    pos = 0
    for i in range(len(sizes) - 1):
        fan_in, fan_out = int(sizes[i]), int(sizes[i + 1])
        weights.append(theta[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
        biases.append(theta[pos : pos + fan_out])
        pos += fan_out
    return weights, biases


def _forward(theta, sizes, x):
    weights, biases = _unpack(theta, sizes)
    acts = [x]
    pre = []
    a = x
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < len(weights) - 1 else z
        acts.append(a)
    return acts, pre


def _xent(logits, y):
    m = logits.max(axis=1, keepdims=True)
    shifted = logits - m
    lse = np.log(np.exp(shifted).sum(axis=1)) + m[:, 0]
    return float(np.mean(lse - logits[np.arange(len(y)), y]))


def mlp_loss(theta: np.ndarray, sizes, x: np.ndarray, y: np.ndarray) -> float:
    acts, _ = _forward(theta, sizes, x)
    return _xent(acts[-1], y)


def mlp_loss_grad(theta: np.ndarray, sizes, x: np.ndarray, y: np.ndarray):
    weights, biases = _unpack(theta, sizes)
    acts, pre = _forward(theta, sizes, x)
    logits = acts[-1]
    n = x.shape[0]

    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    probs = e / e.sum(axis=1, keepdims=True)
    loss = _xent(logits, y)

    grad = np.zeros_like(theta)
    gw, gb = _unpack(grad, sizes)  # views into grad

    dz = probs.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    for i in range(len(weights) - 1, -1, -1):
        gw[i][...] = acts[i].T @ dz
        gb[i][...] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ weights[i].T) * (pre[i - 1] > 0.0)
    return loss, grad
