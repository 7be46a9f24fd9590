"""Constructive nearest-neighbor certified classifier and separation stats.

The classifier scores a query against its nearest in-class and out-of-class
training points with a three-case hinge that is 2/c-Lipschitz by
construction; any point within c/2 of a training example keeps that
example's label under every perturbation smaller than c/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import IntegrityError, UsageError
from .linalg import PNorm

_CDIST_METRIC = {PNorm.P1: "cityblock", PNorm.P2: "euclidean",
                 PNorm.PINF: "chebyshev"}


@dataclass(frozen=True)
class LabeledDataset:
    points: np.ndarray   # n x d
    labels: np.ndarray   # n, integer class ids

    def __post_init__(self):
        X = np.asarray(self.points, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] == 0:
            raise UsageError(f"points must be a nonempty n x d array, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise UsageError("dataset contains non-finite features")
        if y.shape != (X.shape[0],):
            raise UsageError(
                f"labels shape {y.shape} does not match {X.shape[0]} points")
        if not np.issubdtype(y.dtype, np.integer):
            yi = y.astype(np.int64)
            if not np.array_equal(yi, y):
                raise UsageError("labels must be integers")
            y = yi
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subsample(self, n: int, seed: int) -> "LabeledDataset":
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.n, size=min(n, self.n), replace=False)
        return LabeledDataset(self.points[idx], self.labels[idx])


@dataclass(frozen=True)
class SeparationStats:
    p: PNorm
    per_example_nn_dist: np.ndarray
    percentile: float
    percentile_c: float


def _require_two_classes(data: LabeledDataset):
    if data.classes.size < 2:
        raise UsageError("separation statistics need at least two classes")


def nearest_out_of_class_distances(data: LabeledDataset, p: PNorm,
                                   chunk: int = 512) -> np.ndarray:
    """Exact distance from every example to its nearest out-of-class example."""
    _require_two_classes(data)
    metric = _CDIST_METRIC[p]
    X, y = data.points, data.labels
    out = np.empty(data.n)
    for cls in data.classes:
        mask = y == cls
        A = X[mask]
        B = X[~mask]
        mins = np.full(A.shape[0], np.inf)
        for lo in range(0, A.shape[0], chunk):
            block = cdist(A[lo:lo + chunk], B, metric=metric)
            mins[lo:lo + chunk] = block.min(axis=1)
        out[mask] = mins
    return out


def separation_stats(data: LabeledDataset, p: PNorm,
                     percentile: float = 95.0) -> SeparationStats:
    """Nearest out-of-class distance per example, summarized so that
    ``percentile`` percent of examples sit at least ``percentile_c`` away.

    The summary is the lower-interpolation (100 - percentile)-th order
    statistic of the distances.
    """
    if not 0.0 < percentile < 100.0:
        raise UsageError("percentile must be in (0, 100)")
    dists = nearest_out_of_class_distances(data, p)
    sorted_d = np.sort(dists)
    rank = max(1, math.ceil((100.0 - percentile) / 100.0 * data.n))
    c = float(sorted_d[rank - 1])
    return SeparationStats(p=p, per_example_nn_dist=dists,
                           percentile=percentile, percentile_c=c)


def min_cross_class_distance(data: LabeledDataset, p: PNorm) -> float:
    """Exact minimum distance over all pairs of differently labeled examples."""
    d = float(np.min(nearest_out_of_class_distances(data, p)))
    if d == 0.0:
        raise IntegrityError(
            "dataset contains identical points with different labels")
    return d


def _check_c(data: LabeledDataset, c: float, p: PNorm):
    if not c > 0.0:
        raise UsageError("c must be positive")
    if not c < min_cross_class_distance(data, p):
        raise UsageError("c must be strictly below the minimum cross-class distance")


def _class_distances(data: LabeledDataset, Q: np.ndarray, p: PNorm):
    """n_queries x n_classes matrix of distances to the nearest point of each
    class, plus the class id order."""
    metric = _CDIST_METRIC[p]
    classes = data.classes
    D = np.empty((Q.shape[0], classes.size))
    for k, cls in enumerate(classes):
        D[:, k] = cdist(Q, data.points[data.labels == cls], metric=metric).min(axis=1)
    return D, classes


def _scores_from_distances(D: np.ndarray, c: float) -> np.ndarray:
    """One-vs-all three-case scores for every (query, target-class) pair.

    D[q, k] is the distance to the nearest class-k point; the nearest
    out-of-class distance is the min over the other columns.
    """
    n, C = D.shape
    scores = np.zeros((n, C))
    for k in range(C):
        d_plus = D[:, k]
        d_minus = np.min(np.delete(D, k, axis=1), axis=1)
        inside_plus = d_plus < c / 2.0
        inside_minus = d_minus < c / 2.0
        scores[inside_plus, k] = 1.0 - (2.0 / c) * d_plus[inside_plus]
        rest = ~inside_plus & inside_minus
        scores[rest, k] = -1.0 + (2.0 / c) * d_minus[rest]
    return scores


def prop1_score(data: LabeledDataset, c: float, p: PNorm,
                target_class: int, x) -> float:
    """One-vs-all score of x for target_class; in [-1, 1]."""
    _check_c(data, c, p)
    if target_class not in data.classes:
        raise UsageError(f"class {target_class} not present in the dataset")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    D, classes = _class_distances(data, x, p)
    k = int(np.where(classes == target_class)[0][0])
    return float(_scores_from_distances(D, c)[0, k])


@dataclass(frozen=True)
class ClassifyResult:
    label: int
    margin: float
    no_certificate: bool


def _classify_batch_unchecked(data: LabeledDataset, c: float, p: PNorm, Q):
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != data.dim:
        raise UsageError(f"query batch shape {Q.shape} incompatible with dim {data.dim}")
    D, classes = _class_distances(data, Q, p)
    scores = _scores_from_distances(D, c)
    best = np.argmax(scores, axis=1)          # ties resolve to smallest index
    order = np.sort(scores, axis=1)
    margins = order[:, -1] - order[:, -2]
    no_cert = np.all(scores == 0.0, axis=1)
    return classes[best], margins, no_cert


def prop1_classify_batch(data: LabeledDataset, c: float, p: PNorm, Q):
    """Classify a batch of queries; returns (labels, margins, no_certificate)."""
    _check_c(data, c, p)
    return _classify_batch_unchecked(data, c, p, Q)


def prop1_classify(data: LabeledDataset, c: float, p: PNorm, x) -> ClassifyResult:
    labels, margins, no_cert = prop1_classify_batch(
        data, c, p, np.asarray(x, dtype=np.float64).reshape(1, -1))
    return ClassifyResult(label=int(labels[0]), margin=float(margins[0]),
                          no_certificate=bool(no_cert[0]))


def sample_in_ball(rng, n: int, dim: int, radius: float, p: PNorm) -> np.ndarray:
    """n perturbations drawn uniformly from the p-ball of the given radius."""
    if p is PNorm.PINF:
        return rng.uniform(-radius, radius, size=(n, dim))
    if p is PNorm.P2:
        g = rng.standard_normal((n, dim))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
        return g * r
    # L1 ball: exponential-sign direction, then radial scaling
    e = rng.exponential(size=(n, dim)) * rng.choice([-1.0, 1.0], size=(n, dim))
    e /= np.sum(np.abs(e), axis=1, keepdims=True)
    r = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
    return e * r


@dataclass(frozen=True)
class CertifyTrainingReport:
    c: float
    p: PNorm
    trials: int
    radius: float
    checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def prop1_certify_training(data: LabeledDataset, c: float, p: PNorm,
                           trials: int, seed: int,
                           radius: float | None = None) -> CertifyTrainingReport:
    """Empirically confirm that every training point keeps its label under
    random perturbations of p-norm below c/2.

    ``radius`` defaults to the certified c/2 * (1 - 1e-9); a larger radius is
    allowed for out-of-contract probing, in which case violations are
    reported rather than forbidden.
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    _check_c(data, c, p)
    if radius is None:
        radius = c / 2.0 * (1.0 - 1e-9)
    rng = np.random.default_rng(seed)
    violations = []
    for i in range(data.n):
        deltas = sample_in_ball(rng, trials, data.dim, radius, p)
        labels, _, _ = _classify_batch_unchecked(data, c, p, data.points[i] + deltas)
        bad = np.nonzero(labels != data.labels[i])[0]
        for b in bad:
            violations.append((i, int(data.labels[i]), int(labels[b]),
                               deltas[b].copy()))
    return CertifyTrainingReport(c=c, p=p, trials=trials, radius=radius,
                                 checked=data.n * trials, violations=violations)
