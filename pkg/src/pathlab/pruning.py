"""Greedy removal of mutually cancelling path contributions.

Contributions arriving at one cell with nearly opposite phases and matching
magnitudes cancel in the path sum; dropping such pairs leaves the sum
unchanged up to the reported residual bound (the exact magnitude of each
removed pair's sum, accumulated).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .circular import circular_distance
from .errors import ValidationError


@dataclass(frozen=True)
class PruneResult:
    kept: Tuple[Tuple[float, float], ...]
    kept_indices: Tuple[int, ...]
    removed_pairs: Tuple[Tuple[int, int, float], ...]  # (i, j, |pair sum|)
    residual_bound: float

    @property
    def n_removed(self) -> int:
        return 2 * len(self.removed_pairs)


def prune_cancelling_pairs(contributions: Sequence[Tuple[float, float]],
                           eps_phase: float, eps_mag: float) -> PruneResult:
    """Greedily pair near-antipodal contributions and drop both.

    Scans contributions in phase order; each unmatched entry is paired with
    the unmatched entry closest to its antipode (ties to the lower index)
    when their phase difference lies within eps_phase of pi and their
    magnitudes agree within eps_mag relative. |sum removed| <= the returned
    residual bound.
    """
    if not 0 < eps_phase < np.pi:
        raise ValidationError(f"eps_phase must lie in (0, pi), got {eps_phase}")
    if eps_mag < 0:
        raise ValidationError(f"eps_mag must be >= 0, got {eps_mag}")
    phases = np.array([c[0] for c in contributions], dtype=float)
    mags = np.array([c[1] for c in contributions], dtype=float)
    n = len(phases)
    if np.any(mags < 0):
        raise ValidationError("contribution magnitudes must be >= 0")

    wrapped = np.mod(phases, 2 * np.pi)
    scan_order = np.lexsort((np.arange(n), wrapped))
    matched = np.zeros(n, dtype=bool)
    removed: List[Tuple[int, int, float]] = []
    bound = 0.0
    for a in scan_order:
        if matched[a]:
            continue
        free = ~matched
        free[a] = False
        if not free.any():
            break
        cand = np.flatnonzero(free)
        d = circular_distance(wrapped[cand], wrapped[a] + np.pi)
        best = d.min()
        b = int(cand[np.flatnonzero(d == best)[0]])  # ties: lowest index
        if best > eps_phase:
            continue
        scale = max(mags[a], mags[b])
        if abs(mags[a] - mags[b]) > eps_mag * scale:
            continue
        matched[a] = matched[b] = True
        residual = abs(mags[a] * np.exp(1j * phases[a])
                       + mags[b] * np.exp(1j * phases[b]))
        i, j = (int(a), b) if a < b else (b, int(a))
        removed.append((i, j, float(residual)))
        bound += float(residual)

    kept_idx = tuple(int(i) for i in range(n) if not matched[i])
    kept = tuple((float(phases[i]), float(mags[i])) for i in kept_idx)
    return PruneResult(kept, kept_idx, tuple(removed), bound)
