"""Per-example certified radii and certified-accuracy curves.

An example with correct prediction y is certified against perturbations of
p-norm strictly below min_j (f_y(x) - f_j(x)) / k_yj, where k_yj bounds the
Lipschitz constant of the logit difference. ``attack_check`` stress-tests
the certificate with random perturbations inside the radius.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bounds import atomic_pair_bound, paired_exact, two_layer_weights
from .errors import UsageError
from .linalg import PNorm
from .model import MlpNetwork, forward, forward_batch
from .propcert import LabeledDataset, sample_in_ball


def build_pair_bounds(net: MlpNetwork, p: PNorm, method: str = "atomic",
                      limit: int = 20) -> np.ndarray:
    """Matrix of k_ij Lipschitz bounds for every ordered class pair.

    method "atomic" works for any network and p; "paired-exact" needs a
    two-layer network and p = inf.
    """
    C = net.out_dim
    K = np.zeros((C, C))
    if method == "atomic":
        for i in range(C):
            for j in range(i + 1, C):
                K[i, j] = K[j, i] = atomic_pair_bound(net, p, i, j)
    elif method == "paired-exact":
        if p is not PNorm.PINF:
            raise UsageError("paired-exact bounds require p = inf")
        W1, W2 = two_layer_weights(net)
        for i in range(C):
            for j in range(i + 1, C):
                K[i, j] = K[j, i] = paired_exact(W1, W2, i, j, limit=limit).value
    else:
        raise UsageError(f"unknown bound method {method!r}")
    return K


def certified_radius(net: MlpNetwork, x, y: int, pair_bounds) -> float:
    """Certified radius of example x with true class y; 0 if misclassified."""
    K = np.asarray(pair_bounds, dtype=np.float64)
    logits = forward(net, x)
    C = logits.size
    if K.shape != (C, C):
        raise UsageError(f"pair_bounds shape {K.shape} != ({C}, {C})")
    if not (0 <= y < C):
        raise UsageError(f"class {y} out of range for output dim {C}")
    off = ~np.eye(C, dtype=bool)
    if np.any(K[off] <= 0.0):
        raise UsageError("pair bounds must be positive for all class pairs")
    if int(np.argmax(logits)) != y:
        return 0.0
    others = [j for j in range(C) if j != y]
    return float(min((logits[y] - logits[j]) / K[y, j] for j in others))


@dataclass(frozen=True)
class CertificationReport:
    per_example: list                 # (index, predicted, correct, radius)
    curve: list                       # (epsilon, certified_accuracy)
    bound_method: str
    p: PNorm

    @property
    def clean_accuracy(self) -> float:
        return sum(1 for e in self.per_example if e[2]) / len(self.per_example)


def certified_accuracy_curve(net: MlpNetwork, data: LabeledDataset, eps_grid,
                             pair_bounds, bound_method: str = "atomic",
                             p: PNorm = PNorm.PINF) -> CertificationReport:
    """Fraction of examples with certified radius strictly above each epsilon."""
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if eps_grid.size == 0:
        raise UsageError("epsilon grid must be nonempty")
    if np.any(np.diff(eps_grid) < 0):
        raise UsageError("epsilon grid must be sorted ascending")
    per_example = []
    radii = np.zeros(data.n)
    for i in range(data.n):
        logits = forward(net, data.points[i])
        pred = int(np.argmax(logits))
        correct = pred == int(data.labels[i])
        r = certified_radius(net, data.points[i], int(data.labels[i]), pair_bounds)
        radii[i] = r
        per_example.append((i, pred, correct, r))
    curve = [(float(e), float(np.mean(radii > e))) for e in eps_grid]
    return CertificationReport(per_example=per_example, curve=curve,
                               bound_method=bound_method, p=p)


@dataclass(frozen=True)
class AttackResult:
    violated: bool
    witness: np.ndarray | None = None
    trials: int = 0


def attack_check(net: MlpNetwork, x, y: int, radius: float, trials: int,
                 seed: int, p: PNorm = PNorm.PINF) -> AttackResult:
    """Randomly probe the ball of the given radius for decision flips.

    Samples uniformly inside the p-ball at radius * (1 - 1e-6); for p = inf
    it also probes random all-corner sign patterns, the extreme points of
    the cube. For a correctly certified radius no probe may flip the argmax.
    """
    if radius < 0:
        raise UsageError("radius must be nonnegative")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    if radius == 0.0:
        return AttackResult(violated=False, witness=None, trials=0)
    x = np.asarray(x, dtype=np.float64)
    base_pred = int(np.argmax(forward(net, x)))
    rng = np.random.default_rng(seed)
    r = radius * (1.0 - 1e-6)
    dim = x.size
    if p is PNorm.PINF:
        n_corner = trials // 2
        deltas = np.vstack([
            sample_in_ball(rng, trials - n_corner, dim, r, p),
            rng.choice([-1.0, 1.0], size=(n_corner, dim)) * r,
        ])
    else:
        deltas = sample_in_ball(rng, trials, dim, r, p)
    preds = np.argmax(forward_batch(net, x[None, :] + deltas), axis=1)
    bad = np.nonzero(preds != base_pred)[0]
    if bad.size:
        return AttackResult(violated=True, witness=deltas[bad[0]],
                            trials=len(deltas))
    return AttackResult(violated=False, witness=None, trials=len(deltas))
