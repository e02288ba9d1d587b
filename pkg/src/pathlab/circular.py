"""Circular (directional) statistics helpers.

Phases are stored unwrapped on the real line everywhere else in the
package; wrapping happens only inside these functions.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), TWO_PI)


def circular_distance(a, b):
    """Smallest angular distance between two angles, in [0, pi].

    Accepts scalars or broadcastable arrays; inputs may be unwrapped.
    """
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, TWO_PI) - np.pi
    return np.abs(d)


def circular_mean(angles, weights=None) -> float:
    """Direction of the (weighted) resultant vector, in (-pi, pi].

    Returns 0.0 when the resultant vanishes (mean undefined).
    """
    angles = np.asarray(angles, dtype=float)
    w = np.ones_like(angles) if weights is None else np.asarray(weights, dtype=float)
    r = np.sum(w * np.exp(1j * angles))
    if r == 0:
        return 0.0
    return float(np.angle(r))


def resultant_length(angles) -> float:
    """Mean resultant length R in [0, 1]; 1 means all angles coincide."""
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        return 1.0
    return float(np.abs(np.exp(1j * angles).sum()) / angles.size)


def circular_variance(angles) -> float:
    """1 - R, in [0, 1]."""
    return 1.0 - resultant_length(angles)


def pairwise_distance_sum(angles) -> float:
    """Sum of circular distances over all unordered pairs.

    Uses the sorted-prefix decomposition, O(k log k): with sorted wrapped
    angles, d(i,j) = theta_j - theta_i unless that gap exceeds pi, in which
    case the pair contributes 2*pi minus the gap.
    """
    th = np.sort(np.mod(np.asarray(angles, dtype=float), TWO_PI))
    k = th.size
    if k < 2:
        return 0.0
    pref = np.concatenate(([0.0], np.cumsum(th)))
    total = 0.0
    # sum over ordered gaps theta_j - theta_i for j > i
    idx = np.arange(k)
    total += float(np.sum(th * idx) - pref[:-1].sum())
    # correct pairs whose gap exceeds pi: those get 2*pi - 2*gap added
    # for each i, the j with th_j > th_i + pi form a suffix
    js = np.searchsorted(th, th + np.pi, side="right")
    counts = k - js
    gap_sums = (pref[k] - pref[js]) - th * counts
    total += float(np.sum(counts * TWO_PI - 2.0 * gap_sums))
    return total


def pairwise_smooth_sum(angles) -> float:
    """Sum of (1 - cos(delta)) over all unordered pairs, via the resultant.

    Identity: sum_{i<j} cos(a_i - a_j) = (|sum_j e^{i a_j}|^2 - k) / 2.
    """
    angles = np.asarray(angles, dtype=float)
    k = angles.size
    if k < 2:
        return 0.0
    r2 = float(np.abs(np.exp(1j * angles).sum()) ** 2)
    n_pairs = k * (k - 1) / 2.0
    return float(n_pairs - (r2 - k) / 2.0)


def max_pairwise_distance(angles) -> float:
    """Largest circular distance over all unordered pairs, in [0, pi].

    If the angles fit in a closed arc no longer than pi (equivalently the
    largest gap between consecutive sorted angles is >= pi), the answer is
    that arc length; otherwise falls back to the quadratic scan.
    """
    th = np.sort(np.mod(np.asarray(angles, dtype=float), TWO_PI))
    k = th.size
    if k < 2:
        return 0.0
    gaps = np.diff(np.concatenate((th, [th[0] + TWO_PI])))
    arc = TWO_PI - float(gaps.max())
    if arc <= np.pi:
        return arc
    d = circular_distance(th[:, None], th[None, :])
    return float(d.max())
