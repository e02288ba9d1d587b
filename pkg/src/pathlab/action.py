"""Discrete classical action, phase profiles, and stationary-action paths.

Per-step action for the segment between slices k and k+1:

    s_k = (m/2) * ((x_{k+1} - x_k) / dt)^2 * dt - V((x_k + x_{k+1}) / 2, t_mid) * dt

with velocity from forward differences of cell centers and the potential
evaluated at the segment midpoint (linear interpolation for tabulated
profiles). Phases are s_k / hbar, accumulated unwrapped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConvergenceError, ValidationError
from .lattice import PhasedTrajectory, PhysicalConstants, SpaceTimeGrid, Trajectory

FREE = "free"
HARMONIC = "harmonic"
BARRIER = "barrier"


@dataclass(frozen=True)
class LagrangianSpec:
    """Kinetic-minus-potential functional defining the action.

    Potential kinds:
      free                 V = 0
      harmonic(omega)      V = (1/2) m omega^2 x^2
      barrier(values, window)  tabulated profile on cell centers, active for
                           times in [window[0], window[1]); +inf entries are
                           hard (absorbing) walls, NaN is rejected.
    """

    constants: PhysicalConstants
    kind: str = FREE
    omega: float = 0.0
    barrier_values: Optional[np.ndarray] = None
    barrier_window: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.kind not in (FREE, HARMONIC, BARRIER):
            raise ValidationError(f"unknown potential kind {self.kind!r}")
        if self.kind == HARMONIC and not self.omega > 0:
            raise ValidationError(f"harmonic omega must be > 0, got {self.omega}")
        if self.kind == BARRIER:
            if self.barrier_values is None or self.barrier_window is None:
                raise ValidationError("barrier potential needs values and window")
            vals = np.asarray(self.barrier_values, dtype=float)
            if np.any(np.isnan(vals)):
                raise ValidationError("barrier values must not be NaN")
            vals = np.ascontiguousarray(vals)
            vals.setflags(write=False)
            object.__setattr__(self, "barrier_values", vals)
            t0, t1 = self.barrier_window
            if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
                raise ValidationError(f"bad barrier window {self.barrier_window}")
            object.__setattr__(self, "barrier_window", (float(t0), float(t1)))

    @classmethod
    def free(cls, constants: PhysicalConstants) -> "LagrangianSpec":
        return cls(constants)

    @classmethod
    def harmonic(cls, constants: PhysicalConstants, omega: float) -> "LagrangianSpec":
        return cls(constants, kind=HARMONIC, omega=omega)

    @classmethod
    def barrier(cls, constants: PhysicalConstants, values,
                window: Tuple[float, float]) -> "LagrangianSpec":
        return cls(constants, kind=BARRIER, barrier_values=values,
                   barrier_window=window)

    def window_active(self, t: float) -> bool:
        if self.kind != BARRIER:
            return self.kind == HARMONIC
        t0, t1 = self.barrier_window
        return t0 <= t < t1

    def potential_on_grid(self, grid: SpaceTimeGrid, t: float) -> Optional[np.ndarray]:
        """Cell-center potential values at time t, or None where identically zero."""
        if self.kind == FREE:
            return None
        if self.kind == HARMONIC:
            x = grid.cell_centers()
            return 0.5 * self.constants.mass * self.omega ** 2 * x ** 2
        if len(self.barrier_values) != grid.n_x:
            raise ValidationError(
                f"barrier profile has {len(self.barrier_values)} values, "
                f"grid has {grid.n_x} cells")
        return self.barrier_values if self.window_active(t) else None

    def potential_at(self, x, t: float, grid: SpaceTimeGrid):
        """Potential at arbitrary positions x (scalar or array) at time t.

        Tabulated profiles are interpolated linearly between cell centers
        and held constant beyond the outermost centers.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == FREE:
            return np.zeros_like(x)
        if self.kind == HARMONIC:
            return 0.5 * self.constants.mass * self.omega ** 2 * x ** 2
        if not self.window_active(t):
            return np.zeros_like(x)
        vals = self.potential_on_grid(grid, t)
        # fractional cell coordinate of x relative to cell centers
        f = (x - grid.x_min) / grid.dx - 0.5
        f = np.clip(f, 0.0, grid.n_x - 1.0)
        lo = np.floor(f).astype(int)
        hi = np.minimum(lo + 1, grid.n_x - 1)
        w = f - lo
        return (1.0 - w) * vals[lo] + w * vals[hi]


@dataclass(frozen=True)
class ActionValue:
    total: float
    per_step: np.ndarray

    def __post_init__(self):
        ps = np.ascontiguousarray(np.asarray(self.per_step, dtype=float))
        ps.setflags(write=False)
        object.__setattr__(self, "per_step", ps)


def step_actions(positions: np.ndarray, lag: LagrangianSpec,
                 grid: SpaceTimeGrid) -> np.ndarray:
    """Per-step actions for one path or a batch of paths.

    positions: (..., n_t + 1) integer cell indices. Returns (..., n_t).
    """
    pos = np.asarray(positions)
    if pos.shape[-1] != grid.n_t + 1:
        raise ValidationError(
            f"positions have {pos.shape[-1]} slices, grid wants {grid.n_t + 1}")
    x = grid.cell_centers()[pos]
    dt = grid.dt
    m = lag.constants.mass
    vel = (x[..., 1:] - x[..., :-1]) / dt
    kinetic = 0.5 * m * vel ** 2 * dt
    if lag.kind == FREE:
        return kinetic
    mid = 0.5 * (x[..., 1:] + x[..., :-1])
    pot = np.empty_like(kinetic)
    for k in range(grid.n_t):
        pot[..., k] = lag.potential_at(mid[..., k], grid.step_midpoint_time(k), grid)
    return kinetic - pot * dt


def discrete_action(traj: Trajectory, lag: LagrangianSpec,
                    grid: SpaceTimeGrid) -> ActionValue:
    """Discrete action of a trajectory, with its per-step decomposition."""
    traj.validate_on(grid)
    per = step_actions(traj.positions, lag, grid)
    return ActionValue(float(per.sum()), per)


def phase_profile(traj: Trajectory, lag: LagrangianSpec, grid: SpaceTimeGrid,
                  initial_phase: float = 0.0) -> PhasedTrajectory:
    """Attach the cumulative phase S_k / hbar (plus an initial offset)."""
    act = discrete_action(traj, lag, grid)
    if not np.all(np.isfinite(act.per_step)):
        raise ValidationError(
            f"trajectory {traj.id} visits an infinite-potential cell; "
            "its phase profile is undefined")
    phases = np.empty(grid.n_t + 1)
    phases[0] = initial_phase
    phases[1:] = initial_phase + np.cumsum(act.per_step) / lag.constants.hbar
    return PhasedTrajectory(traj, phases)


def _segment_action(xa, xb, t_mid, lag: LagrangianSpec, grid: SpaceTimeGrid) -> float:
    dt = grid.dt
    m = lag.constants.mass
    kin = 0.5 * m * ((xb - xa) / dt) ** 2 * dt
    pot = float(lag.potential_at(np.asarray(0.5 * (xa + xb)), t_mid, grid))
    return float(kin) - pot * dt


def rounding_bound(lag: LagrangianSpec, grid: SpaceTimeGrid) -> float:
    """Action resolution of one-cell moves: m dx^2 / (2 dt)."""
    return lag.constants.mass * grid.dx ** 2 / (2 * grid.dt)


def stationary_path(x_a: int, x_b: int, lag: LagrangianSpec, grid: SpaceTimeGrid,
                    max_iter: int = 200, tol: float = 1e-10,
                    traj_id: int = 0) -> Trajectory:
    """Stationary-action lattice path between two cells.

    Coordinate-wise minimization of the discrete action over interior slice
    positions (continuous relaxation), then rounding to the nearest cell
    (ties toward x_a) and a greedy one-cell polish so that no single-slice
    move strictly decreases the action.
    """
    for name, v in (("x_a", x_a), ("x_b", x_b)):
        if not 0 <= v < grid.n_x:
            raise ValidationError(f"{name}={v} outside grid with n_x={grid.n_x}")
    n_t = grid.n_t
    lo = grid.cell_center(0)
    hi = grid.cell_center(grid.n_x - 1)
    xa = grid.cell_center(x_a)
    xb = grid.cell_center(x_b)
    y = np.linspace(xa, xb, n_t + 1)

    scale = max(hi - lo, 1.0)
    converged = n_t <= 1
    for _ in range(max_iter):
        if n_t <= 1:
            break
        biggest = 0.0
        for k in range(1, n_t):
            tm_prev = grid.step_midpoint_time(k - 1)
            tm_next = grid.step_midpoint_time(k)
            ya, yc = y[k - 1], y[k + 1]

            def local(v):
                return (_segment_action(ya, v, tm_prev, lag, grid)
                        + _segment_action(v, yc, tm_next, lag, grid))

            res = minimize_scalar(local, bounds=(lo, hi), method="bounded",
                                  options={"xatol": tol * scale * 1e-2})
            biggest = max(biggest, abs(res.x - y[k]))
            y[k] = res.x
        if biggest < tol * scale:
            converged = True
            break

    # round to cells, ties toward x_a
    idx = np.empty(n_t + 1, dtype=np.int64)
    for k in range(n_t + 1):
        f = (y[k] - grid.x_min) / grid.dx - 0.5
        lo_i = int(np.floor(f))
        cand = [c for c in (lo_i, lo_i + 1) if 0 <= c < grid.n_x]
        dists = [abs(f - c) for c in cand]
        best = min(dists)
        tied = [c for c, d in zip(cand, dists) if d - best < 1e-12]
        idx[k] = min(tied, key=lambda c: abs(c - x_a))
    idx[0], idx[n_t] = x_a, x_b

    _greedy_polish(idx, lag, grid)
    traj = Trajectory(traj_id, idx)
    if not converged:
        raise ConvergenceError(
            f"stationary_path did not converge within {max_iter} sweeps", best=traj)
    return traj


def _greedy_polish(idx: np.ndarray, lag: LagrangianSpec, grid: SpaceTimeGrid) -> None:
    """Take single-slice one-cell moves while they strictly lower the action."""
    n_t = grid.n_t
    if n_t <= 1:
        return
    x = grid.cell_centers()

    def local_cost(k, cell):
        c = _segment_action(x[idx[k - 1]], x[cell], grid.step_midpoint_time(k - 1),
                            lag, grid)
        if k < n_t:
            c += _segment_action(x[cell], x[idx[k + 1]], grid.step_midpoint_time(k),
                                 lag, grid)
        return c

    budget = 20 * grid.n_t * grid.n_x
    improved = True
    while improved and budget > 0:
        improved = False
        for k in range(1, n_t):
            here = local_cost(k, idx[k])
            for cand in (idx[k] - 1, idx[k] + 1):
                if 0 <= cand < grid.n_x and local_cost(k, cand) < here:
                    idx[k] = cand
                    here = local_cost(k, cand)
                    improved = True
                    budget -= 1
