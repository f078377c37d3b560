"""Feed-forward softmax classifier with hand-written backprop.

Hidden layers use ReLU, the output layer is linear (logits); all math is
float64 and goes through :mod:`hiernoise.kernels`, so the same model code
runs on either backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .rng import Rng


class CacheMismatchError(ValueError):
    """Backward called with a cache from a different model or input."""


@dataclass
class MlpClassifier:
    """Layer weights/biases for dims [d_in, hidden..., num_classes]."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        if any(d < 1 for d in dims):
            raise ValueError(f"layer dims must be positive, got {dims}")
        self.layer_dims = dims
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i], dims[i + 1]) or b.shape != (dims[i + 1],):
                raise ValueError(f"layer {i} parameter shapes do not chain {dims}")

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpClassifier":
        return MlpClassifier(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class LayerGrads:
    dweights: list[np.ndarray]
    dbiases: list[np.ndarray]


@dataclass
class ForwardCache:
    layer_dims: tuple[int, ...]
    activations: list[np.ndarray]   # inputs to each layer (activations[0] is x)
    preacts: list[np.ndarray]       # pre-ReLU values of the hidden layers


def init_model(layer_dims, seed: int) -> MlpClassifier:
    """He-scaled normal weights (std = sqrt(2/fan_in)), zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    rng = Rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        std = np.sqrt(2.0 / fan_in)
        w = rng.normals(fan_in * fan_out).reshape(fan_in, fan_out) * std
        weights.append(np.ascontiguousarray(w))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpClassifier(dims, weights, biases)


def mlp_forward(model: MlpClassifier, x) -> tuple[np.ndarray, ForwardCache]:
    x = kernels.as_matrix(x)
    if x.shape[1] != model.input_dim:
        raise kernels.ShapeMismatchError(
            f"input has {x.shape[1]} features, model expects {model.input_dim}"
        )
    activations = [x]
    preacts = []
    h = x
    last = model.num_layers - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = kernels.linear(h, w, b)
        if l == last:
            return z, ForwardCache(model.layer_dims, activations, preacts)
        preacts.append(z)
        h = kernels.relu(z)
        activations.append(h)
    raise AssertionError("unreachable")


def mlp_backward(model: MlpClassifier, cache: ForwardCache, dlogits) -> LayerGrads:
    """Parameter gradients given the upstream gradient w.r.t. the logits."""
    if cache.layer_dims != model.layer_dims:
        raise CacheMismatchError(
            f"cache built for dims {cache.layer_dims}, model has {model.layer_dims}"
        )
    dlogits = kernels.as_matrix(dlogits)
    n = cache.activations[0].shape[0]
    if dlogits.shape != (n, model.num_classes):
        raise CacheMismatchError(
            f"dlogits shape {dlogits.shape} does not match ({n}, {model.num_classes})"
        )
    dws: list[np.ndarray] = [None] * model.num_layers
    dbs: list[np.ndarray] = [None] * model.num_layers
    delta = dlogits
    for l in range(model.num_layers - 1, -1, -1):
        dws[l] = kernels.matmul_tn(cache.activations[l], delta)
        dbs[l] = kernels.colsum(delta)
        if l > 0:
            delta = kernels.relu_backward(
                kernels.matmul_nt(delta, model.weights[l]), cache.preacts[l - 1]
            )
    return LayerGrads(dws, dbs)


def predict_logits(model: MlpClassifier, x) -> np.ndarray:
    logits, _ = mlp_forward(model, x)
    return logits


def predict_labels(model: MlpClassifier, x) -> np.ndarray:
    """Argmax class per row; ties break to the lowest index."""
    return np.argmax(predict_logits(model, x), axis=1).astype(np.int64)
