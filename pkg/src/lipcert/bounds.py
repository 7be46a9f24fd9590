"""Lipschitz upper bounds for ReLU networks.

Three methods:
  * atomic: product of per-layer induced norms, any p, any depth;
  * paired-exact: exact maximum over all hidden activation patterns of
    the L-inf norm of W2 diag(s) W1, two-layer nets only;
  * paired-relaxed: cheap upper bound on paired-exact by pushing absolute
    values through the product.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, UsageError
from .linalg import PNorm, as_matrix, induced_norm, vec_norm
from .model import MlpNetwork

DEFAULT_ENUM_LIMIT = 20


@dataclass(frozen=True)
class LipschitzBound:
    value: float
    method: str            # "atomic" | "paired-exact" | "paired-relaxed"
    p: PNorm
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.value < 0:
            raise UsageError("a Lipschitz bound cannot be negative")
        if self.method not in ("atomic", "paired-exact", "paired-relaxed"):
            raise UsageError(f"unknown bound method {self.method!r}")
        if self.method != "atomic" and self.p is not PNorm.PINF:
            raise UsageError("paired-layer bounds are defined for p = inf only")


def atomic_bound(net: MlpNetwork, p: PNorm) -> LipschitzBound:
    """Product of induced norms over all layers: a global Lipschitz constant."""
    value = 1.0
    for layer in net.layers:
        value *= induced_norm(layer.weights, p)
    return LipschitzBound(value=value, method="atomic", p=p,
                          meta={"layers": len(net.layers)})


def atomic_pair_bound(net: MlpNetwork, p: PNorm, i: int, j: int) -> float:
    """Lipschitz constant of the logit difference f_i - f_j.

    Product of the hidden layers' induced norms times the dual norm of the
    difference of the two final-layer rows.
    """
    if i == j:
        raise UsageError("class indices must differ")
    last = net.layers[-1]
    if not (0 <= i < last.out_dim and 0 <= j < last.out_dim):
        raise UsageError(f"class index out of range for output dim {last.out_dim}")
    value = 1.0
    for layer in net.layers[:-1]:
        value *= induced_norm(layer.weights, p)
    diff = last.weights[i] - last.weights[j]
    if np.any(diff):
        value *= vec_norm(diff, p.dual)
    else:
        value = 0.0
    return value


def _max_row_l1(M: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1)))


def paired_exact(W1, W2, i: int | None = None, j: int | None = None,
                 limit: int = DEFAULT_ENUM_LIMIT) -> LipschitzBound:
    """Exact paired-layer bound by enumerating all 2^d activation patterns.

    For (i, j) given, W2 is first reduced to the single row
    row_i(W2) - row_j(W2), certifying the logit difference. Enumeration
    walks a Gray code so each step updates the accumulated matrix with one
    hidden unit's rank-one contribution. Ties in the maximum are broken
    toward the smallest pattern integer (bit u = unit u).
    """
    W1 = as_matrix(W1)
    W2 = as_matrix(W2)
    if W2.shape[1] != W1.shape[0]:
        raise UsageError(
            f"shape mismatch: W2 is {W2.shape}, W1 is {W1.shape}")
    if (i is None) != (j is None):
        raise UsageError("give both class indices or neither")
    if i is not None:
        if i == j:
            raise UsageError("class indices must differ")
        if not (0 <= i < W2.shape[0] and 0 <= j < W2.shape[0]):
            raise UsageError(f"class index out of range for {W2.shape[0]} outputs")
        W2 = (W2[i] - W2[j])[None, :]

    d = W1.shape[0]
    if d > limit:
        raise CapacityError(
            f"hidden dimension {d} exceeds enumeration limit {limit}; "
            "use paired_relaxed instead")

    # rank-one contribution of each hidden unit
    contrib = [np.outer(W2[:, u], W1[u, :]) for u in range(d)]
    S = np.zeros((W2.shape[0], W1.shape[1]))
    best = 0.0          # pattern 0 gives the zero matrix
    best_pattern = 0
    pattern = 0
    for k in range(1, 1 << d):
        bit = (k & -k).bit_length() - 1   # unit flipped by this Gray-code step
        pattern ^= 1 << bit
        if pattern & (1 << bit):
            S += contrib[bit]
        else:
            S -= contrib[bit]
        norm = _max_row_l1(S)
        if norm > best or (norm == best and pattern < best_pattern):
            best = norm
            best_pattern = pattern
    bits = [(best_pattern >> u) & 1 for u in range(d)]
    return LipschitzBound(value=best, method="paired-exact", p=PNorm.PINF,
                          meta={"patterns": 1 << d, "argmax_pattern": bits})


def paired_relaxed(W1, W2) -> LipschitzBound:
    """Upper bound on paired_exact: max over output rows of
    sum_u |W2[r,u]| * |row_u(W1)|_1."""
    W1 = as_matrix(W1)
    W2 = as_matrix(W2)
    if W2.shape[1] != W1.shape[0]:
        raise UsageError(
            f"shape mismatch: W2 is {W2.shape}, W1 is {W1.shape}")
    row_l1 = np.sum(np.abs(W1), axis=1)
    value = float(np.max(np.abs(W2) @ row_l1))
    return LipschitzBound(value=value, method="paired-relaxed", p=PNorm.PINF,
                          meta={})


def two_layer_weights(net: MlpNetwork):
    """Extract (W1, W2) from a two-layer network, for paired-layer bounds."""
    if len(net.layers) != 2:
        raise UsageError("paired-layer bounds require exactly two layers")
    return net.layers[0].weights, net.layers[1].weights
