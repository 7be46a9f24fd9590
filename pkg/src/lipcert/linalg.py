"""Dense vector/matrix helpers and induced operator norms.

All norms are restricted to p in {1, 2, inf}. The L-inf induced norm of a
matrix is the largest L1 row norm, the L1 induced norm is the largest L1
column norm, and the L2 induced norm (spectral norm) is estimated by seeded
power iteration.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import NumericError, UsageError


class PNorm(Enum):
    P1 = "1"
    P2 = "2"
    PINF = "inf"

    @classmethod
    def parse(cls, text: str) -> "PNorm":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise UsageError(f"unknown norm {text!r}: expected 1, 2 or inf")

    @property
    def dual(self) -> "PNorm":
        return {PNorm.P1: PNorm.PINF, PNorm.P2: PNorm.P2, PNorm.PINF: PNorm.P1}[self]

    def __str__(self) -> str:
        return self.value


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise UsageError(f"expected a nonempty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise UsageError("vector contains non-finite entries")
    return v


def as_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.size == 0:
        raise UsageError(f"expected a nonempty 2-D matrix, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise UsageError("matrix contains non-finite entries")
    return W


def vec_norm(v, p: PNorm) -> float:
    """L1, L2 or L-inf norm of a vector."""
    v = as_vector(v)
    if p is PNorm.P1:
        return float(np.sum(np.abs(v)))
    if p is PNorm.P2:
        return float(np.linalg.norm(v))
    return float(np.max(np.abs(v)))


def induced_norm(W, p: PNorm) -> float:
    """Operator norm of W induced by the vector p-norm.

    inf: max row L1; 1: max column L1; 2: largest singular value.
    """
    W = as_matrix(W)
    if p is PNorm.PINF:
        return float(np.max(np.sum(np.abs(W), axis=1)))
    if p is PNorm.P1:
        return float(np.max(np.sum(np.abs(W), axis=0)))
    sigma, _, _ = power_iteration(W)
    return sigma


def power_iteration(W, max_iters: int = 1000, tol: float = 1e-10,
                    seed: int = 0, v0=None):
    """Estimate the largest singular value of W.

    Iterates v <- normalize(W^T W v) from a seeded random start (or ``v0``
    as a warm start) and reports sigma = |W v|_2 once successive estimates
    differ by less than ``tol`` relative to sigma (a scale-invariant rule:
    the estimate is exactly homogeneous in scalings of W).

    Returns (sigma, u, v) with u, v unit vectors satisfying W v ~ sigma u.
    Raises NumericError (carrying the best estimate) on non-convergence.
    """
    W = as_matrix(W)
    if max_iters < 1:
        raise UsageError("max_iters must be >= 1")
    if tol <= 0:
        raise UsageError("tol must be > 0")
    m, n = W.shape

    if v0 is not None:
        v = as_vector(v0)
        if v.shape != (n,):
            raise UsageError(f"warm-start vector has length {v.size}, expected {n}")
    else:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(n)
    v = v / np.linalg.norm(v)

    sigma = float(np.linalg.norm(W @ v))
    if sigma == 0.0 and not np.any(W):
        # zero matrix: sigma is exactly 0, any unit vectors will do
        u = np.zeros(m)
        u[0] = 1.0
        return 0.0, u, v

    for _ in range(max_iters):
        z = W.T @ (W @ v)
        zn = np.linalg.norm(z)
        if zn == 0.0:
            # v landed in the null space; restart deterministically
            rng = np.random.default_rng(seed + 1)
            v = rng.standard_normal(n)
            v = v / np.linalg.norm(v)
            continue
        v = z / zn
        new_sigma = float(np.linalg.norm(W @ v))
        if abs(new_sigma - sigma) < tol * max(new_sigma, np.finfo(float).tiny):
            sigma = new_sigma
            break
        sigma = new_sigma
    else:
        raise NumericError(
            f"power iteration did not converge in {max_iters} iterations "
            f"(best estimate {sigma})", best=sigma)

    Wv = W @ v
    nrm = np.linalg.norm(Wv)
    if nrm == 0.0:
        u = np.zeros(m)
        u[0] = 1.0
    else:
        u = Wv / nrm
    return sigma, u, v
