"""Fully connected ReLU network: representation, evaluation, JSON round trip.

Convention: weights are stored out_dim x in_dim and applied as W x + b on
column vectors. ReLU sits between consecutive layers and never after the
last one, so ``forward`` returns raw logits.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, UsageError
from .linalg import as_matrix, as_vector


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # out_dim x in_dim
    bias: np.ndarray     # out_dim

    def __post_init__(self):
        object.__setattr__(self, "weights", as_matrix(self.weights))
        object.__setattr__(self, "bias", as_vector(self.bias))
        if self.bias.size != self.weights.shape[0]:
            raise UsageError(
                f"bias length {self.bias.size} != rows {self.weights.shape[0]}")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class MlpNetwork:
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise UsageError("network must have at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].out_dim != layers[i + 1].in_dim:
                raise UsageError(
                    f"layer {i} output dim {layers[i].out_dim} incompatible "
                    f"with layer {i + 1} input dim {layers[i + 1].in_dim}")
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def __eq__(self, other):
        if not isinstance(other, MlpNetwork):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers))


def forward(net: MlpNetwork, x) -> np.ndarray:
    """Evaluate the network on a single input vector; returns logits."""
    x = as_vector(x)
    if x.size != net.in_dim:
        raise UsageError(f"input length {x.size} != network input dim {net.in_dim}")
    h = x
    for layer in net.layers[:-1]:
        h = np.maximum(layer.weights @ h + layer.bias, 0.0)
    last = net.layers[-1]
    return last.weights @ h + last.bias


def forward_batch(net: MlpNetwork, X) -> np.ndarray:
    """Evaluate the network on a batch (n x in_dim); returns n x out_dim logits."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise UsageError(f"batch shape {X.shape} incompatible with input dim {net.in_dim}")
    H = X
    for layer in net.layers[:-1]:
        H = np.maximum(H @ layer.weights.T + layer.bias, 0.0)
    last = net.layers[-1]
    return H @ last.weights.T + last.bias


def pair_margin(net: MlpNetwork, x, i: int, j: int) -> float:
    """Logit difference f_i(x) - f_j(x)."""
    if i == j:
        raise UsageError("class indices must differ")
    out = forward(net, x)
    if not (0 <= i < out.size and 0 <= j < out.size):
        raise UsageError(f"class index out of range for output dim {out.size}")
    return float(out[i] - out[j])


def save_network(net: MlpNetwork, path) -> None:
    doc = {
        "layers": [
            {"weights": layer.weights.tolist(), "bias": layer.bias.tolist()}
            for layer in net.layers
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_network(path) -> MlpNetwork:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict) or "layers" not in doc:
        raise ParseError(f"{path}: missing top-level 'layers' key")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ParseError(f"{path}: 'layers' must be a nonempty array")
    layers = []
    for idx, entry in enumerate(raw_layers):
        if not isinstance(entry, dict) or "weights" not in entry or "bias" not in entry:
            raise ParseError(f"{path}: layer {idx}: expected object with "
                             "'weights' and 'bias'")
        try:
            W = np.array(entry["weights"], dtype=np.float64)
            b = np.array(entry["bias"], dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise ParseError(f"{path}: layer {idx}: non-numeric data: {e}") from e
        if W.ndim != 2:
            raise ParseError(f"{path}: layer {idx}: weights must be a matrix "
                             f"(got ndim {W.ndim})")
        if b.ndim != 1 or b.size != W.shape[0]:
            raise ParseError(
                f"{path}: layer {idx}: bias length {b.size} != rows {W.shape[0]}")
        try:
            layers.append(Layer(W, b))
        except UsageError as e:
            raise ParseError(f"{path}: layer {idx}: {e}") from e
    try:
        return MlpNetwork(tuple(layers))
    except UsageError as e:
        raise ParseError(f"{path}: {e}") from e
