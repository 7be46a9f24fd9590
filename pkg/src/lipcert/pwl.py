"""Exact 1-D piecewise-linear analysis of ReLU networks.

A scalar-output network restricted to a line t -> f(w0*t + b0) is piecewise
linear with finitely many breakpoints. This module extracts that restriction
exactly, computes the total variation and intrinsic variability of its
derivative, and provides the linear-combination / ReLU primitives the
variability inequalities are phrased in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import atomic_bound
from .errors import UsageError
from .linalg import PNorm, as_vector
from .model import MlpNetwork

MERGE_TOL = 1e-12


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear function on all of R.

    ``breakpoints`` are strictly increasing; ``slopes`` has one more entry
    (left-to-right segments, including the two unbounded end segments).
    ``anchor`` = (t0, value at t0) pins the function value.
    """
    breakpoints: np.ndarray
    slopes: np.ndarray
    anchor_t: float = 0.0
    anchor_value: float = 0.0

    def __post_init__(self):
        bp = np.atleast_1d(np.asarray(self.breakpoints, dtype=np.float64))
        sl = np.atleast_1d(np.asarray(self.slopes, dtype=np.float64))
        if bp.size == 0:
            bp = bp.reshape(0)
        if sl.size != bp.size + 1:
            raise UsageError(
                f"need {bp.size + 1} slopes for {bp.size} breakpoints, got {sl.size}")
        if bp.size > 1 and np.min(np.diff(bp)) <= MERGE_TOL:
            raise UsageError("breakpoints must be strictly increasing "
                             f"with gap > {MERGE_TOL}")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(sl))
                and np.isfinite(self.anchor_t) and np.isfinite(self.anchor_value)):
            raise UsageError("non-finite data in piecewise-linear function")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", sl)
        object.__setattr__(self, "_knot_values", self._compute_knot_values())

    def _compute_knot_values(self):
        bp, sl = self.breakpoints, self.slopes
        if bp.size == 0:
            return np.zeros(0)
        # integrate left to right assuming v[0] = 0, then shift to the anchor
        w = np.concatenate(([0.0], np.cumsum(sl[1:-1] * np.diff(bp))))
        idx = int(np.searchsorted(bp, self.anchor_t, side="right"))
        ref_t = bp[idx - 1] if idx > 0 else bp[0]
        ref_w = w[idx - 1] if idx > 0 else w[0]
        anchor_w = ref_w + sl[idx] * (self.anchor_t - ref_t)
        return w + (self.anchor_value - anchor_w)

    @property
    def knot_values(self) -> np.ndarray:
        return self._knot_values

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        bp, sl, kv = self.breakpoints, self.slopes, self._knot_values
        if bp.size == 0:
            return self.anchor_value + sl[0] * (t - self.anchor_t)
        idx = np.searchsorted(bp, t, side="right")
        ref_idx = np.clip(idx - 1, 0, bp.size - 1)
        return kv[ref_idx] + sl[idx] * (t - bp[ref_idx])

    def slope_at(self, t: float) -> float:
        """Slope of the segment containing t (right-continuous at breakpoints)."""
        idx = int(np.searchsorted(self.breakpoints, t, side="right"))
        return float(self.slopes[idx])


def _prune_zero_jumps(knots, values, slopes):
    """Drop knots where the slope does not change at all."""
    if len(knots) == 0:
        return knots, values, slopes
    keep = slopes[1:] != slopes[:-1]
    if np.all(keep):
        return knots, values, slopes
    knots = knots[keep]
    values = values[keep]
    slopes = np.concatenate(([slopes[0]], slopes[1:][keep]))
    return knots, values, slopes


def _from_knots(knots, values, slopes) -> PiecewiseLinearFn:
    knots = np.asarray(knots, float)
    values = np.asarray(values, float)
    slopes = np.asarray(slopes, float)
    anchor_t, anchor_v = float(knots[0]), float(values[0])
    knots, values, slopes = _prune_zero_jumps(knots, values, slopes)
    if len(knots) == 0:
        return PiecewiseLinearFn(np.zeros(0), slopes[:1], anchor_t, anchor_v)
    return PiecewiseLinearFn(knots, slopes, anchor_t, anchor_v)


def total_variation(pwl: PiecewiseLinearFn) -> float:
    """Total variation of the derivative: sum of adjacent slope jumps."""
    s = pwl.slopes
    return float(np.sum(np.abs(np.diff(s))))


def intrinsic_variability(pwl: PiecewiseLinearFn) -> float:
    """Total variation of the derivative plus both limiting slope magnitudes."""
    s = pwl.slopes
    return total_variation(pwl) + abs(float(s[0])) + abs(float(s[-1]))


def _merge_points(points, base=None):
    """Sort and deduplicate candidate breakpoints; points within MERGE_TOL of
    a base knot (or of each other) collapse onto it."""
    pts = np.sort(np.asarray(points, dtype=np.float64) + 0.0)  # -0.0 -> 0.0
    if base is not None and len(base) > 0:
        # drop candidates that coincide with existing knots
        idx = np.searchsorted(base, pts)
        near = np.zeros(len(pts), dtype=bool)
        for shift in (0, 1):
            k = np.clip(idx - 1 + shift, 0, len(base) - 1)
            near |= np.abs(pts - base[k]) <= MERGE_TOL
        pts = pts[~near]
        merged = np.sort(np.concatenate([base, pts]))
    else:
        merged = pts
    if len(merged) > 1:
        keep = np.concatenate(([True], np.diff(merged) > MERGE_TOL))
        merged = merged[keep]
    return merged


def pwl_combine(coeffs, fns) -> PiecewiseLinearFn:
    """Exact linear combination sum_i coeffs[i] * fns[i]."""
    coeffs = list(coeffs)
    fns = list(fns)
    if not fns or len(coeffs) != len(fns):
        raise UsageError("need equally many coefficients and functions, at least one")
    all_bp = np.concatenate([f.breakpoints for f in fns]) if fns else np.zeros(0)
    knots = _merge_points(all_bp) if all_bp.size else np.zeros(0)
    if knots.size == 0:
        slope = sum(c * f.slopes[0] for c, f in zip(coeffs, fns))
        value = sum(c * float(f(0.0)) for c, f in zip(coeffs, fns))
        return PiecewiseLinearFn(np.zeros(0), np.array([slope]), 0.0, value)
    # representative point inside each open segment
    reps = np.concatenate(([knots[0] - 1.0],
                           (knots[:-1] + knots[1:]) / 2.0 if knots.size > 1 else [],
                           [knots[-1] + 1.0]))
    slopes = np.zeros(knots.size + 1)
    values = np.zeros(knots.size)
    for c, f in zip(coeffs, fns):
        slopes += c * np.array([f.slope_at(t) for t in reps])
        values += c * np.asarray(f(knots), dtype=np.float64)
    return _from_knots(knots, values, slopes)


def pwl_relu(f: PiecewiseLinearFn) -> PiecewiseLinearFn:
    """Exact pointwise max(f, 0), with new breakpoints at zero crossings."""
    bp, sl, kv = f.breakpoints, f.slopes, f.knot_values
    crossings = []
    if bp.size == 0:
        c = float(f(0.0))
        s = float(sl[0])
        if s == 0.0:
            return PiecewiseLinearFn(np.zeros(0), np.array([0.0]), 0.0,
                                     max(c, 0.0))
        # a non-constant line crosses zero exactly once; the negative side clamps
        r = -c / s
        slopes = np.array([0.0, s]) if s > 0 else np.array([s, 0.0])
        return _from_knots(np.array([r]), np.array([0.0]), slopes)
    # left unbounded segment
    if sl[0] != 0.0 and kv[0] / sl[0] > 0.0:
        r = bp[0] - kv[0] / sl[0]
        if bp[0] - r > MERGE_TOL:
            crossings.append(r)
    # interior segments: strict sign change between adjacent knot values
    for k in range(bp.size - 1):
        va, vb = kv[k], kv[k + 1]
        if (va > 0.0 > vb) or (va < 0.0 < vb):
            r = bp[k] + va * (bp[k + 1] - bp[k]) / (va - vb)
            if r - bp[k] > MERGE_TOL and bp[k + 1] - r > MERGE_TOL:
                crossings.append(r)
    # right unbounded segment
    if sl[-1] != 0.0 and kv[-1] / sl[-1] < 0.0:
        r = bp[-1] - kv[-1] / sl[-1]
        if r - bp[-1] > MERGE_TOL:
            crossings.append(r)
    knots = _merge_points(crossings, base=bp)
    reps = np.concatenate(([knots[0] - 1.0],
                           (knots[:-1] + knots[1:]) / 2.0 if knots.size > 1 else [],
                           [knots[-1] + 1.0]))
    f_reps = np.asarray(f(reps), dtype=np.float64)
    slopes = np.where(f_reps > 0.0,
                      np.array([f.slope_at(t) for t in reps]), 0.0)
    values = np.maximum(np.asarray(f(knots), dtype=np.float64), 0.0)
    return _from_knots(knots, values, slopes)


# ---------------------------------------------------------------------------
# direct slice extraction (independent of pwl_combine / pwl_relu)
# ---------------------------------------------------------------------------

def extract_slice(net: MlpNetwork, w0, b0=None) -> PiecewiseLinearFn:
    """Exact piecewise-linear representation of t -> f(w0*t + b0).

    Propagates a shared breakpoint partition through the layers, inserting
    breakpoints where a hidden unit's pre-activation crosses zero. Requires a
    scalar-output network.
    """
    w0 = as_vector(w0)
    if b0 is None:
        b0 = np.zeros(net.in_dim)
    b0 = as_vector(b0)
    if net.out_dim != 1:
        raise UsageError(f"slice extraction needs a scalar output, got {net.out_dim}")
    if w0.size != net.in_dim or b0.size != net.in_dim:
        raise UsageError("direction/offset length must equal the network input dim")

    # layer-0 affine restriction: unit u is a_u * t + c_u
    first = net.layers[0]
    a = first.weights @ w0                      # per-unit slope
    c = first.weights @ b0 + first.bias         # per-unit value at t = 0

    knots = np.zeros(0)                         # shared partition
    vals = np.zeros((0, a.size))                # unit values at knots
    slopes = a[None, :].copy()                  # per-segment unit slopes
    ref_vals = c.copy()                         # unit values at t = 0 (used when no knots)

    def eval_units(ts):
        """Evaluate the current layer's (pre-ReLU) units at times ts."""
        ts = np.asarray(ts, dtype=np.float64)
        if knots.size == 0:
            return ref_vals[None, :] + np.outer(ts, slopes[0])
        idx = np.searchsorted(knots, ts, side="right")
        ref_idx = np.clip(idx - 1, 0, knots.size - 1)
        return vals[ref_idx] + slopes[idx] * (ts - knots[ref_idx])[:, None]

    n_layers = len(net.layers)
    for li in range(1, n_layers):
        # ReLU: find each unit's zero crossings and refine the partition
        crossings = []
        if knots.size == 0:
            nz = slopes[0] != 0.0
            crossings.extend((-ref_vals[nz] / slopes[0][nz]).tolist())
        else:
            for u in range(vals.shape[1]):
                v = vals[:, u]
                if slopes[0, u] != 0.0 and v[0] / slopes[0, u] > 0.0:
                    r = knots[0] - v[0] / slopes[0, u]
                    if knots[0] - r > MERGE_TOL:
                        crossings.append(r)
                for k in range(knots.size - 1):
                    va, vb = v[k], v[k + 1]
                    if (va > 0.0 > vb) or (va < 0.0 < vb):
                        r = knots[k] + va * (knots[k + 1] - knots[k]) / (va - vb)
                        if (r - knots[k] > MERGE_TOL
                                and knots[k + 1] - r > MERGE_TOL):
                            crossings.append(r)
                if slopes[-1, u] != 0.0 and v[-1] / slopes[-1, u] < 0.0:
                    r = knots[-1] - v[-1] / slopes[-1, u]
                    if r - knots[-1] > MERGE_TOL:
                        crossings.append(r)
        new_knots = _merge_points(crossings, base=knots)
        if new_knots.size:
            reps = np.concatenate((
                [new_knots[0] - 1.0],
                (new_knots[:-1] + new_knots[1:]) / 2.0 if new_knots.size > 1 else [],
                [new_knots[-1] + 1.0]))
            pre_reps = eval_units(reps)
            # original segment slope at each representative point
            if knots.size == 0:
                seg_slopes = np.repeat(slopes, len(reps), axis=0)
            else:
                seg_slopes = slopes[np.searchsorted(knots, reps, side="right")]
            new_vals = np.maximum(eval_units(new_knots), 0.0)
            new_slopes = np.where(pre_reps > 0.0, seg_slopes, 0.0)
            knots, vals, slopes = new_knots, new_vals, new_slopes
            ref_vals = None
        else:
            # no crossings anywhere: clamp globally-nonpositive units
            pos = eval_units(np.array([0.0]))[0] > 0.0
            slopes = np.where(pos[None, :], slopes, 0.0)
            ref_vals = np.maximum(ref_vals, 0.0) if ref_vals is not None else None
            if knots.size:
                vals = np.maximum(vals, 0.0)
        # next affine layer
        layer = net.layers[li]
        slopes = slopes @ layer.weights.T
        if knots.size:
            vals = vals @ layer.weights.T + layer.bias
        else:
            ref_vals = ref_vals @ layer.weights.T + layer.bias

    if knots.size == 0:
        return PiecewiseLinearFn(np.zeros(0), np.array([float(slopes[0, 0])]),
                                 0.0, float(ref_vals[0]))
    return _from_knots(knots, vals[:, 0], slopes[:, 0])


@dataclass(frozen=True)
class VariabilityReport:
    total_variation: float
    intrinsic_variability: float
    bound_2k: float
    slack: float
    satisfied: bool


def check_theorem1(net: MlpNetwork, w0, b0=None) -> VariabilityReport:
    """Check I(slice derivative) <= 2 * atomic L-inf bound along direction w0.

    w0 must have unit L-inf norm (within 1e-12; exact normalization applied).
    """
    w0 = as_vector(w0)
    nrm = float(np.max(np.abs(w0)))
    if abs(nrm - 1.0) > 1e-12:
        raise UsageError(f"direction must have unit L-inf norm, got {nrm}")
    w0 = w0 / nrm
    pwl = extract_slice(net, w0, b0)
    v = total_variation(pwl)
    i = intrinsic_variability(pwl)
    k = atomic_bound(net, PNorm.PINF).value
    slack = 2.0 * k - i
    return VariabilityReport(total_variation=v, intrinsic_variability=i,
                             bound_2k=2.0 * k, slack=slack,
                             satisfied=i <= 2.0 * k + 1e-9)


def random_unit_inf_direction(dim: int, rng) -> np.ndarray:
    """Random direction with L-inf norm exactly 1."""
    v = rng.uniform(-1.0, 1.0, size=dim)
    m = np.max(np.abs(v))
    if m == 0.0:
        v[0] = 1.0
        m = 1.0
    return v / m
