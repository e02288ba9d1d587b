"""Space-time lattice, trajectories, and wave-function fields.

Everything lives on a shared 1D-space x time grid: cell centers
x_i = x_min + (i + 0.5) * dx, time slices t_k = t_start + k * dt.
All value types are immutable after construction and safe to share
across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ValidationError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar and particle mass, both strictly positive (natural units by default)."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and np.isfinite(self.hbar)):
            raise ValidationError(f"hbar must be finite and > 0, got {self.hbar}")
        if not (self.mass > 0 and np.isfinite(self.mass)):
            raise ValidationError(f"mass must be finite and > 0, got {self.mass}")


@dataclass(frozen=True)
class SpaceTimeGrid:
    x_min: float
    x_max: float
    n_x: int
    t_start: float
    t_end: float
    n_t: int

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_t

    def cell_centers(self) -> np.ndarray:
        return _frozen(self.x_min + (np.arange(self.n_x) + 0.5) * self.dx)

    def cell_center(self, i: int) -> float:
        return self.x_min + (i + 0.5) * self.dx

    def index_of(self, x: float) -> int:
        """Cell index containing position x (clipped to the grid)."""
        i = int(np.floor((x - self.x_min) / self.dx))
        return min(max(i, 0), self.n_x - 1)

    def time_at(self, k: int) -> float:
        return self.t_start + k * self.dt

    def step_midpoint_time(self, k: int) -> float:
        """Midpoint time of step k, used to evaluate time-windowed potentials."""
        return self.t_start + (k + 0.5) * self.dt


def make_grid(x_min: float, x_max: float, n_x: int,
              t_start: float, t_end: float, n_t: int) -> SpaceTimeGrid:
    """Validate and build a SpaceTimeGrid; dx and dt are derived."""
    if not all(np.isfinite(v) for v in (x_min, x_max, t_start, t_end)):
        raise ValidationError("grid extents must be finite")
    if x_max <= x_min:
        raise ValidationError(f"x_max ({x_max}) must exceed x_min ({x_min})")
    if t_end <= t_start:
        raise ValidationError(f"t_end ({t_end}) must exceed t_start ({t_start})")
    if n_x < 2:
        raise ValidationError(f"n_x must be >= 2, got {n_x}")
    if n_t < 1:
        raise ValidationError(f"n_t must be >= 1, got {n_t}")
    return SpaceTimeGrid(float(x_min), float(x_max), int(n_x),
                         float(t_start), float(t_end), int(n_t))


@dataclass(frozen=True)
class Trajectory:
    """A lattice path: one cell index per time slice (n_t + 1 entries)."""

    id: int
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64)
        object.__setattr__(self, "positions", _frozen(pos))

    def validate_on(self, grid: SpaceTimeGrid, max_hop: int | None = None) -> None:
        pos = self.positions
        if len(pos) != grid.n_t + 1:
            raise ValidationError(
                f"trajectory {self.id} has {len(pos)} slices, grid wants {grid.n_t + 1}")
        if pos.min() < 0 or pos.max() >= grid.n_x:
            raise ValidationError(f"trajectory {self.id} leaves the grid")
        hop = int(np.max(np.abs(np.diff(pos)))) if len(pos) > 1 else 0
        limit = grid.n_x if max_hop is None else max_hop
        if hop > limit:
            raise ValidationError(
                f"trajectory {self.id} hops {hop} cells, max_hop is {limit}")


@dataclass(frozen=True)
class PhasedTrajectory:
    """A trajectory with its cumulative action phase per slice.

    phases[k] is the unwrapped phase at slice k; phases[0] is the initial
    phase offset and increments equal per-step action over hbar.
    """

    trajectory: Trajectory
    phases: np.ndarray
    amplitude_weight: complex = 1.0 + 0.0j

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=np.float64)
        if len(ph) != len(self.trajectory.positions):
            raise ValidationError(
                f"trajectory {self.trajectory.id}: {len(ph)} phases for "
                f"{len(self.trajectory.positions)} slices")
        if not np.all(np.isfinite(ph)):
            raise ValidationError(f"trajectory {self.trajectory.id}: non-finite phases")
        if not np.isfinite(abs(self.amplitude_weight)):
            raise ValidationError(f"trajectory {self.trajectory.id}: non-finite weight")
        object.__setattr__(self, "phases", _frozen(ph))
        object.__setattr__(self, "amplitude_weight", complex(self.amplitude_weight))

    @property
    def id(self) -> int:
        return self.trajectory.id

    def with_phase_offset(self, offset: float) -> "PhasedTrajectory":
        """Shift the whole phase profile by a constant (gauge move)."""
        return PhasedTrajectory(self.trajectory, self.phases + offset,
                                self.amplitude_weight)


@dataclass(frozen=True)
class WaveFunctionField:
    """Complex amplitudes on one spatial slice of the grid."""

    grid: SpaceTimeGrid
    time_index: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != (self.grid.n_x,):
            raise ValidationError(
                f"field has {amp.shape} amplitudes, grid wants ({self.grid.n_x},)")
        if not np.all(np.isfinite(amp.view(np.float64))):
            raise ValidationError("field amplitudes must be finite")
        object.__setattr__(self, "amplitudes", _frozen(amp))

    def normalized(self) -> "WaveFunctionField":
        n2 = norm_squared(self)
        if n2 <= 0:
            raise ValidationError("cannot normalize a zero field")
        return WaveFunctionField(self.grid, self.time_index,
                                 self.amplitudes / np.sqrt(n2))


def norm_squared(psi: WaveFunctionField) -> float:
    """Sum of |amplitude|^2 * dx over all cells."""
    return float(np.sum(np.abs(psi.amplitudes) ** 2) * psi.grid.dx)


def l2_distance(a: WaveFunctionField, b: WaveFunctionField) -> float:
    """L2 distance between two fields on the same grid."""
    if a.grid != b.grid:
        raise ValidationError("fields live on different grids")
    return float(np.sqrt(np.sum(np.abs(a.amplitudes - b.amplitudes) ** 2) * a.grid.dx))


def gaussian_packet(grid: SpaceTimeGrid, constants: PhysicalConstants,
                    x0: float = 0.0, sigma0: float = 1.0, p0: float = 0.0,
                    time_index: int = 0) -> WaveFunctionField:
    """Normalized Gaussian wave packet exp(-(x-x0)^2/(4 sigma0^2) + i p0 (x-x0)/hbar).

    |psi|^2 has standard deviation sigma0 before lattice normalization.
    """
    if sigma0 <= 0:
        raise ValidationError(f"sigma0 must be > 0, got {sigma0}")
    x = grid.cell_centers()
    psi = np.exp(-((x - x0) ** 2) / (4 * sigma0 ** 2)
                 + 1j * p0 * (x - x0) / constants.hbar)
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return WaveFunctionField(grid, time_index, psi)
