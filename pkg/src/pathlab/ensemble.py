"""Trajectory ensembles, intersection events, decoherence measures,
coherent-subset selection, and wave-function reconstruction.

An intersection event is co-occupancy of one lattice cell at one time
slice by two or more members. The decoherence of an ensemble adds up
phase mismatches over all unordered member pairs at every event: the raw
measure uses circular distance, the smooth surrogate uses 1 - cos and has
the same zero set but stays differentiable at antipodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np

from .circular import (circular_distance, circular_mean, max_pairwise_distance,
                       pairwise_distance_sum, pairwise_smooth_sum,
                       resultant_length)
from .errors import ValidationError
from .lattice import PhasedTrajectory, SpaceTimeGrid, WaveFunctionField


@dataclass(frozen=True)
class Ensemble:
    grid: SpaceTimeGrid
    members: Tuple[PhasedTrajectory, ...]
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        ids = [m.id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValidationError("ensemble member ids must be unique")
        for m in self.members:
            if len(m.trajectory.positions) != self.grid.n_t + 1:
                raise ValidationError(
                    f"member {m.id} has {len(m.trajectory.positions)} slices, "
                    f"grid wants {self.grid.n_t + 1}")

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def position_matrix(self) -> np.ndarray:
        """(N, n_t + 1) member positions; empty ensembles give shape (0, n_t + 1)."""
        if not self.members:
            return np.empty((0, self.grid.n_t + 1), dtype=np.int64)
        return np.stack([m.trajectory.positions for m in self.members])

    @cached_property
    def phase_matrix(self) -> np.ndarray:
        if not self.members:
            return np.empty((0, self.grid.n_t + 1))
        return np.stack([m.phases for m in self.members])

    def with_global_phase(self, offset: float) -> "Ensemble":
        """Gauge move: add one constant to every member's phase profile."""
        return Ensemble(self.grid,
                        tuple(m.with_phase_offset(offset) for m in self.members),
                        dict(self.provenance))


@dataclass(frozen=True)
class IntersectionEvent:
    time_index: int
    cell: int
    participants: Tuple[Tuple[int, float], ...]  # (member id, phase at event)

    def phases(self) -> np.ndarray:
        return np.array([p for _, p in self.participants])


@dataclass(frozen=True)
class DecoherenceReport:
    events: Tuple[IntersectionEvent, ...]
    raw_measure: float
    smooth_measure: float
    per_event_raw: np.ndarray
    per_event_smooth: np.ndarray
    per_event_variance: np.ndarray  # circular variance, auxiliary metadata

    @property
    def n_events(self) -> int:
        return len(self.events)


def _slice_groups(ensemble: Ensemble, k: int):
    """Yield (cell, member_indices) for cells holding >= 2 members at slice k."""
    pos = ensemble.position_matrix[:, k]
    if pos.size == 0:
        return
    order = np.argsort(pos, kind="stable")
    sorted_pos = pos[order]
    boundaries = np.flatnonzero(np.diff(sorted_pos)) + 1
    for grp in np.split(order, boundaries):
        if grp.size >= 2:
            yield int(pos[grp[0]]), grp


def detect_intersections(ensemble: Ensemble,
                         time_index: Optional[int] = None):
    """All intersection events, ordered by (time_index, cell).

    Restrict to one slice with time_index.
    """
    phases = ensemble.phase_matrix
    ids = np.array([m.id for m in ensemble.members], dtype=np.int64) \
        if ensemble.members else np.empty(0, dtype=np.int64)
    slices = range(ensemble.grid.n_t + 1) if time_index is None else [time_index]
    events = []
    for k in slices:
        for cell, grp in _slice_groups(ensemble, k):
            grp = grp[np.argsort(ids[grp])]
            participants = tuple((int(ids[i]), float(phases[i, k])) for i in grp)
            events.append(IntersectionEvent(k, cell, participants))
    return events


def decoherence_measure(ensemble: Ensemble,
                        time_index: Optional[int] = None) -> DecoherenceReport:
    """Raw and smooth phase-mismatch totals over all intersection events."""
    events = detect_intersections(ensemble, time_index)
    raw = np.empty(len(events))
    smooth = np.empty(len(events))
    variance = np.empty(len(events))
    for j, ev in enumerate(events):
        ph = ev.phases()
        raw[j] = pairwise_distance_sum(ph)
        smooth[j] = pairwise_smooth_sum(ph)
        variance[j] = 1.0 - resultant_length(ph)
    return DecoherenceReport(tuple(events), float(raw.sum()), float(smooth.sum()),
                             raw, smooth, variance)


def is_coherent(ensemble: Ensemble, eps: float) -> bool:
    """True iff every pairwise circular phase distance at every event <= eps."""
    if not eps > 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    if len(ensemble) < 2:
        return True
    phases = ensemble.phase_matrix
    for k in range(ensemble.grid.n_t + 1):
        for _, grp in _slice_groups(ensemble, k):
            if max_pairwise_distance(phases[grp, k]) > eps:
                return False
    return True


def reconstruct_wavefunction(ensemble: Ensemble, time_index: int,
                             min_count: int = 20):
    """Field estimate from member density and local phases at one slice.

    Magnitude per cell is sqrt(occupancy / (N dx)); phase is the circular
    mean of member phases there. Returns (field, confidence mask); cells
    with occupancy below min_count are masked (empty cells stay at 0).
    """
    if len(ensemble) == 0:
        raise ValidationError("cannot reconstruct from an empty ensemble")
    grid = ensemble.grid
    if not 0 <= time_index <= grid.n_t:
        raise ValidationError(f"time_index {time_index} outside 0..{grid.n_t}")
    pos = ensemble.position_matrix[:, time_index]
    ph = ensemble.phase_matrix[:, time_index]
    counts = np.bincount(pos, minlength=grid.n_x)
    re = np.bincount(pos, weights=np.cos(ph), minlength=grid.n_x)
    im = np.bincount(pos, weights=np.sin(ph), minlength=grid.n_x)
    magnitude = np.sqrt(counts / (len(ensemble) * grid.dx))
    mean_phase = np.where(counts > 0, np.arctan2(im, re), 0.0)
    psi = magnitude * np.exp(1j * mean_phase)
    mask = counts >= min_count
    return WaveFunctionField(grid, time_index, psi), mask


def select_coherent_ensemble(psi_target: WaveFunctionField, paths: Ensemble,
                             eps: float, mag_floor_rel: float = 1e-4) -> Ensemble:
    """Keep members whose final phase is circularly within eps of the
    target's phase at their arrival cell.

    Arrival cells where |target| is below mag_floor_rel * max|target| carry
    no usable phase and their members are dropped. eps >= pi keeps every
    member (any phase is within pi), so selection is the identity there.
    The output is coherent at every final-slice event with tolerance 2 eps.
    """
    if not eps > 0:
        raise ValidationError(f"eps must be > 0, got {eps}")
    if psi_target.grid != paths.grid:
        raise ValidationError("target field and ensemble live on different grids")
    if psi_target.time_index != paths.grid.n_t:
        raise ValidationError(
            f"target is at slice {psi_target.time_index}, paths end at "
            f"{paths.grid.n_t}")
    provenance = dict(paths.provenance)
    if eps >= np.pi:
        provenance["selection"] = {"epsilon": float(eps), "identity": True,
                                   "kept": len(paths), "empty": len(paths) == 0}
        return Ensemble(paths.grid, paths.members, provenance)
    if len(paths) == 0:
        provenance["selection"] = {"epsilon": float(eps), "kept": 0, "empty": True}
        return Ensemble(paths.grid, (), provenance)
    arrivals = paths.position_matrix[:, -1]
    final_phases = paths.phase_matrix[:, -1]
    mag = np.abs(psi_target.amplitudes)
    target = np.angle(psi_target.amplitudes)
    floor = mag_floor_rel * mag.max()
    keep = (mag[arrivals] >= floor) \
        & (circular_distance(final_phases, target[arrivals]) <= eps)
    members = tuple(m for m, k in zip(paths.members, keep) if k)
    provenance["selection"] = {
        "epsilon": float(eps),
        "mag_floor_rel": float(mag_floor_rel),
        "kept": len(members),
        "of": len(paths),
        "empty": len(members) == 0,
    }
    return Ensemble(paths.grid, members, provenance)
