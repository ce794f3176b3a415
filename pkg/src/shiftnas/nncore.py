"""Dense-network numeric kernel: forward/backward passes, loss, and SGD.

Everything operates on float64 numpy arrays with batches in rows. Gradients
are analytic; the test suite checks them against central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

LAYER_KINDS = ("dense", "identity")
ACTIVATIONS = ("relu", "tanh", "none")


@dataclass(frozen=True)
class LayerSpec:
    """Shape and activation of one layer in a choice chain."""

    kind: str
    in_dim: int
    out_dim: int
    activation: str = "none"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeError(f"non-positive layer dims {self.in_dim}x{self.out_dim}")
        if self.kind == "identity":
            if self.in_dim != self.out_dim:
                raise ShapeError(
                    f"identity layer needs in_dim == out_dim, got {self.in_dim} != {self.out_dim}"
                )
            if self.activation != "none":
                raise ShapeError("identity layer cannot carry an activation")

    @property
    def weight_elements(self) -> int:
        """Number of weight-matrix entries (biases excluded); 0 for identity."""
        return 0 if self.kind == "identity" else self.in_dim * self.out_dim


@dataclass
class DenseParams:
    """Weight matrix (in_dim x out_dim) and bias row for one dense layer."""

    W: np.ndarray
    b: np.ndarray

    def copy(self) -> "DenseParams":
        return DenseParams(self.W.copy(), self.b.copy())


def glorot_dense(in_dim: int, out_dim: int, rng: np.random.Generator) -> DenseParams:
    """Fresh dense params: uniform in +/- sqrt(6/(fan_in+fan_out)), zero bias."""
    scale = np.sqrt(6.0 / (in_dim + out_dim))
    W = rng.uniform(-scale, scale, size=(in_dim, out_dim))
    b = np.zeros(out_dim, dtype=np.float64)
    return DenseParams(W, b)


def _check_input(spec: LayerSpec, x: np.ndarray) -> None:
    if x.ndim != 2:
        raise ShapeError(f"expected 2-d input, got shape {x.shape}")
    if x.shape[1] != spec.in_dim:
        raise ShapeError(
            f"input has {x.shape[1]} columns but layer expects in_dim={spec.in_dim}"
        )


def _check_params(spec: LayerSpec, params: DenseParams | None) -> None:
    if spec.kind == "identity":
        if params is not None:
            raise ShapeError("identity layer takes no parameters")
        return
    if params is None:
        raise ShapeError("dense layer requires parameters")
    if params.W.shape != (spec.in_dim, spec.out_dim):
        raise ShapeError(
            f"weight shape {params.W.shape} does not match spec "
            f"({spec.in_dim}, {spec.out_dim})"
        )
    if params.b.shape != (spec.out_dim,):
        raise ShapeError(
            f"bias shape {params.b.shape} does not match out_dim={spec.out_dim}"
        )


def layer_forward(spec: LayerSpec, params: DenseParams | None, x: np.ndarray):
    """Run one layer forward.

    Returns (y, cache); the cache carries what the backward pass needs.
    Dense: y = act(x @ W + b). Identity: y = x, cache None.
    """
    _check_input(spec, x)
    _check_params(spec, params)
    if spec.kind == "identity":
        return x, None
    z = x @ params.W + params.b
    if spec.activation == "relu":
        y = np.maximum(z, 0.0)
    elif spec.activation == "tanh":
        y = np.tanh(z)
    else:
        y = z
    return y, (x, z)


def layer_backward(spec: LayerSpec, params: DenseParams | None, cache, grad_out: np.ndarray):
    """Backpropagate one layer.

    Given dL/dy, returns (dL/dx, dL/dparams). Identity passes the gradient
    through unchanged and has no parameter gradients (None).
    """
    _check_params(spec, params)
    if grad_out.ndim != 2 or grad_out.shape[1] != spec.out_dim:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match out_dim={spec.out_dim}"
        )
    if spec.kind == "identity":
        return grad_out, None
    x, z = cache
    if grad_out.shape[0] != x.shape[0]:
        raise ShapeError(
            f"grad_out batch {grad_out.shape[0]} does not match cached batch {x.shape[0]}"
        )
    if spec.activation == "relu":
        dz = grad_out * (z > 0.0)
    elif spec.activation == "tanh":
        t = np.tanh(z)
        dz = grad_out * (1.0 - t * t)
    else:
        dz = grad_out
    grad_W = x.T @ dz
    grad_b = dz.sum(axis=0)
    grad_in = dz @ params.W.T
    return grad_in, DenseParams(grad_W, grad_b)


def chain_forward(specs, params, x: np.ndarray):
    """Forward through an ordered layer chain; returns (y, per-layer caches)."""
    caches = []
    y = x
    for spec, p in zip(specs, params):
        y, cache = layer_forward(spec, p, y)
        caches.append(cache)
    return y, caches


def chain_backward(specs, params, caches, grad_out: np.ndarray):
    """Backward through a layer chain; returns (dL/dx, per-layer param grads)."""
    grads: list[DenseParams | None] = [None] * len(specs)
    g = grad_out
    for i in range(len(specs) - 1, -1, -1):
        g, grads[i] = layer_backward(specs[i], params[i], caches[i], g)
    return g, grads


def softmax_cross_entropy(logits: np.ndarray, labels):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Stabilized by row-max subtraction. Returns (loss, grad_logits) with the
    gradient already divided by the batch size.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-d, got shape {logits.shape}")
    n, k = logits.shape
    if n == 0:
        raise ShapeError("empty batch")
    if labels.shape != (n,):
        raise ShapeError(f"{n} logit rows but {labels.shape} labels")
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeError(f"label out of range for {k} classes")
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    loss = -log_probs[np.arange(n), labels].mean()
    grad = exp / denom
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return float(loss), grad


def sgd_step(params: DenseParams, grads: DenseParams, lr: float) -> DenseParams:
    """One plain SGD step: p - lr * g, returned as new params."""
    if params.W.shape != grads.W.shape or params.b.shape != grads.b.shape:
        raise ShapeError(
            f"param shapes {params.W.shape}/{params.b.shape} do not match "
            f"grad shapes {grads.W.shape}/{grads.b.shape}"
        )
    return DenseParams(params.W - lr * grads.W, params.b - lr * grads.b)


def accuracy(logits: np.ndarray, labels) -> float:
    """Fraction of rows whose argmax matches the label."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.shape[0] == 0:
        raise ShapeError("empty batch")
    return float((logits.argmax(axis=1) == labels).mean())
