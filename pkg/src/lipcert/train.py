"""Mini-batch SGD with an atomic Lipschitz-product penalty.

Objective: softmax cross-entropy plus lambda * prod_i |W_i|_p. The penalty
(sub)gradient follows the product rule; per-norm subgradients are:
  inf: sign pattern of the max-L1 row (ties -> lowest row index);
  1:   sign pattern of the max-L1 column;
  2:   u v^T from power iteration, warm-started across steps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import atomic_bound
from .errors import TrainingError, UsageError
from .linalg import PNorm, induced_norm, power_iteration
from .model import Layer, MlpNetwork
from .propcert import LabeledDataset


@dataclass(frozen=True)
class TrainConfig:
    hidden_dims: tuple
    p: PNorm = PNorm.PINF
    penalty_weight: float = 0.0
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.penalty_weight < 0:
            raise UsageError("penalty weight must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be >= 1")


def init_params(in_dim: int, hidden_dims, out_dim: int, seed: int,
                init_scale: float = 1.0):
    """Uniform(-s, s)/sqrt(fan_in) weights, zero biases."""
    rng = np.random.default_rng(seed)
    dims = [in_dim, *hidden_dims, out_dim]
    Ws, bs = [], []
    for i in range(len(dims) - 1):
        W = rng.uniform(-init_scale, init_scale,
                        size=(dims[i + 1], dims[i])) / np.sqrt(dims[i])
        Ws.append(W)
        bs.append(np.zeros(dims[i + 1]))
    return Ws, bs


def norm_subgradient(W: np.ndarray, p: PNorm, warm=None):
    """(norm value, subgradient matrix, warm-start state) for |W|_p."""
    if p is PNorm.PINF:
        row = int(np.argmax(np.sum(np.abs(W), axis=1)))
        G = np.zeros_like(W)
        G[row] = np.sign(W[row])
        return float(np.sum(np.abs(W[row]))), G, None
    if p is PNorm.P1:
        col = int(np.argmax(np.sum(np.abs(W), axis=0)))
        G = np.zeros_like(W)
        G[:, col] = np.sign(W[:, col])
        return float(np.sum(np.abs(W[:, col]))), G, None
    sigma, u, v = power_iteration(W, v0=warm)
    return sigma, np.outer(u, v), v


def objective_and_grad(Ws, bs, X, y, p: PNorm, penalty_weight: float,
                       warm=None):
    """Full-objective value and gradients on a batch.

    Returns (total loss, data loss, penalty product, gradients for Ws,
    gradients for bs, warm-start states).
    """
    B = X.shape[0]
    n = len(Ws)
    warm = list(warm) if warm is not None else [None] * n

    # forward with cached activations
    acts = [X]
    H = X
    for i in range(n - 1):
        H = np.maximum(H @ Ws[i].T + bs[i], 0.0)
        acts.append(H)
    Z = H @ Ws[-1].T + bs[-1]

    # softmax cross-entropy
    Zs = Z - Z.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(Zs), axis=1))
    data_loss = float(np.mean(lse - Zs[np.arange(B), y]))
    P = np.exp(Zs - lse[:, None])
    dZ = P.copy()
    dZ[np.arange(B), y] -= 1.0
    dZ /= B

    gWs = [None] * n
    gbs = [None] * n
    delta = dZ
    for i in range(n - 1, -1, -1):
        gWs[i] = delta.T @ acts[i]
        gbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ Ws[i]) * (acts[i] > 0.0)

    # penalty: lambda * prod_i |W_i|_p, product rule
    norms = []
    subgrads = []
    for i in range(n):
        nv, G, w = norm_subgradient(Ws[i], p, warm[i])
        norms.append(nv)
        subgrads.append(G)
        warm[i] = w
    prod = float(np.prod(norms))
    if penalty_weight > 0.0:
        for i in range(n):
            rest = 1.0
            for j in range(n):
                if j != i:
                    rest *= norms[j]
            gWs[i] = gWs[i] + penalty_weight * rest * subgrads[i]
    total = data_loss + penalty_weight * prod
    return total, data_loss, prod, gWs, gbs, warm


def _to_network(Ws, bs) -> MlpNetwork:
    return MlpNetwork(tuple(Layer(W.copy(), b.copy()) for W, b in zip(Ws, bs)))


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    penalty: float
    bound: float
    accuracy: float


def train_penalized(data: LabeledDataset, cfg: TrainConfig):
    """Train an MLP on the dataset; returns (network, history).

    Deterministic given cfg.seed. Raises TrainingError (carrying the stable
    prefix of the history) if the loss leaves the finite range.
    """
    classes = data.classes
    if classes.size < 2:
        raise UsageError("training needs at least two classes")
    C = int(classes.max()) + 1
    y = data.labels.astype(np.int64)
    X = data.points

    Ws, bs = init_params(data.dim, cfg.hidden_dims, C, cfg.seed, cfg.init_scale)
    rng = np.random.default_rng(cfg.seed + 1)
    warm = [None] * len(Ws)
    history: list[EpochRecord] = []

    for epoch in range(cfg.epochs):
        order = rng.permutation(data.n)
        batch_losses = []
        for lo in range(0, data.n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            total, _, _, gWs, gbs, warm = objective_and_grad(
                Ws, bs, X[idx], y[idx], cfg.p, cfg.penalty_weight, warm)
            if not np.isfinite(total):
                raise TrainingError(
                    f"loss diverged in epoch {epoch}",
                    last_stable_epoch=epoch - 1, history=history)
            batch_losses.append(total)
            for i in range(len(Ws)):
                Ws[i] -= cfg.learning_rate * gWs[i]
                bs[i] -= cfg.learning_rate * gbs[i]
        net = _to_network(Ws, bs)
        bound = atomic_bound(net, cfg.p).value
        H = X
        for i in range(len(Ws) - 1):
            H = np.maximum(H @ Ws[i].T + bs[i], 0.0)
        logits = H @ Ws[-1].T + bs[-1]
        acc = float(np.mean(np.argmax(logits, axis=1) == y))
        history.append(EpochRecord(
            epoch=epoch,
            loss=float(np.mean(batch_losses)),
            penalty=cfg.penalty_weight * bound,
            bound=bound,
            accuracy=acc))
    return _to_network(Ws, bs), history
