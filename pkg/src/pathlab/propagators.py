"""Wave-function evolution: lattice path sum, Crank-Nicolson, free kernel,
and imaginary-time diffusion.

The path-sum transfer matrix is the one-step kernel of the lattice sum over
trajectories: repeated application equals the sum over all lattice paths of
the per-segment amplitudes (dynamic programming). The kinetic factor is the
exact Dirichlet sine-mode propagator, which is the action-phase Fresnel
kernel band-limited to the lattice and corrected for the box boundary; the
raw unprojected Fresnel matrix amplifies aliased momenta exponentially and
is unusable beyond a few steps (see decisions log). Potential phases are
applied symmetrically around the kinetic factor (Strang splitting); +inf
potential cells carry zero amplitude (hard absorbing walls).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .action import LagrangianSpec, FREE
from .errors import NumericFailureError, ValidationError
from .lattice import PhysicalConstants, SpaceTimeGrid, WaveFunctionField, norm_squared

log = logging.getLogger(__name__)

_kinetic_cache: dict = {}


@dataclass(frozen=True)
class PropagatorMatrix:
    """One-step n_x by n_x kernel with a method tag."""

    entries: np.ndarray
    method: str
    step_index: int = 0

    def __post_init__(self):
        e = np.ascontiguousarray(np.asarray(self.entries, dtype=np.complex128))
        if not np.all(np.isfinite(e.view(np.float64))):
            raise ValidationError("propagator entries must be finite")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.entries @ psi


def _kinetic_step(grid: SpaceTimeGrid, constants: PhysicalConstants) -> np.ndarray:
    """Exact one-step kinetic propagator in the Dirichlet sine basis.

    Modes sin(pi n (i+1) / (N+1)) vanish half a cell outside the edge
    cells, matching the Crank-Nicolson closure.
    """
    key = (grid.n_x, grid.dx, grid.dt, constants.hbar, constants.mass)
    got = _kinetic_cache.get(key)
    if got is not None:
        return got
    n_x, dx, dt = grid.n_x, grid.dx, grid.dt
    n = np.arange(1, n_x + 1)
    i = np.arange(n_x)
    basis = np.sqrt(2.0 / (n_x + 1)) * np.sin(np.pi * np.outer(n, i + 1) / (n_x + 1))
    k = np.pi * n / ((n_x + 1) * dx)
    phase = np.exp(-1j * constants.hbar * k ** 2 * dt / (2 * constants.mass))
    kin = (basis.T * phase) @ basis
    log.debug("kinetic step kernel built: n_x=%d dx=%g dt=%g "
              "(band-limited Dirichlet correction of the Fresnel kernel)",
              n_x, dx, dt)
    _kinetic_cache[key] = kin
    return kin


def transfer_matrix(lag: LagrangianSpec, grid: SpaceTimeGrid,
                    step_index: int = 0) -> PropagatorMatrix:
    """Path-sum transfer matrix for one time step."""
    kin = _kinetic_step(grid, lag.constants)
    v = lag.potential_on_grid(grid, grid.step_midpoint_time(step_index))
    if v is None:
        return PropagatorMatrix(kin, "pathsum", step_index)
    hard = ~np.isfinite(v)
    half = np.where(hard, 0.0,
                    np.exp(-1j * np.where(hard, 0.0, v) * grid.dt
                           / (2 * lag.constants.hbar)))
    return PropagatorMatrix(half[:, None] * kin * half[None, :],
                            "pathsum", step_index)


def _check_finite(psi: np.ndarray, method: str, step: int) -> None:
    if not np.all(np.isfinite(psi.view(np.float64))):
        raise NumericFailureError(
            f"{method} produced non-finite amplitudes at step {step}")


def pathsum_propagate(psi0: WaveFunctionField, lag: LagrangianSpec,
                      grid: SpaceTimeGrid) -> WaveFunctionField:
    """Propagate psi0 to the final slice by n_t transfer-matrix applications."""
    if psi0.grid != grid:
        raise ValidationError("psi0 grid does not match the propagation grid")
    psi = psi0.amplitudes.copy()
    cache: dict = {}
    for step in range(grid.n_t):
        v = lag.potential_on_grid(grid, grid.step_midpoint_time(step))
        key = None if v is None else v.tobytes()
        mat = cache.get(key)
        if mat is None:
            mat = transfer_matrix(lag, grid, step)
            cache[key] = mat
        psi = mat.apply(psi)
        _check_finite(psi, "pathsum", step)
    return WaveFunctionField(grid, grid.n_t, psi)


def _cn_banded(grid: SpaceTimeGrid, constants: PhysicalConstants,
               v: np.ndarray | None, imaginary: bool):
    """Banded Crank-Nicolson matrices (A psi' = B psi) for one step.

    +inf potential cells are decoupled (identity rows, severed couplings)
    and their amplitudes are zeroed around each step by the caller.
    """
    n = grid.n_x
    vv = np.zeros(n) if v is None else np.asarray(v, dtype=float)
    hard = ~np.isfinite(vv)
    vv = np.where(hard, 0.0, vv)
    off = -constants.hbar ** 2 / (2 * constants.mass * grid.dx ** 2)
    diag = constants.hbar ** 2 / (constants.mass * grid.dx ** 2) + vv
    coef = (grid.dt / (2 * constants.hbar)) if imaginary \
        else (1j * grid.dt / (2 * constants.hbar))
    A = np.zeros((3, n), dtype=np.complex128)
    B = np.zeros((3, n), dtype=np.complex128)
    A[1] = 1.0 + coef * diag
    B[1] = 1.0 - coef * diag
    A[0, 1:] = coef * off
    B[0, 1:] = -coef * off
    A[2, :-1] = coef * off
    B[2, :-1] = -coef * off
    if hard.any():
        idx = np.where(hard)[0]
        for ab in (A, B):
            ab[1, idx] = 1.0
            sup = idx[idx + 1 < n]       # row i couples to col i+1 via ab[0, i+1]
            sub = idx[idx - 1 >= 0]      # row i couples to col i-1 via ab[2, i-1]
            ab[0, sup + 1] = 0.0
            ab[2, sub - 1] = 0.0
            ab[0, idx[idx >= 1]] = 0.0   # col i couples into row i-1 via ab[0, i]
            ab[2, idx[idx <= n - 2]] = 0.0  # col i couples into row i+1 via ab[2, i]
    return A, B, hard


def _cn_run(psi0: WaveFunctionField, lag: LagrangianSpec, grid: SpaceTimeGrid,
            imaginary: bool, renormalize: bool) -> WaveFunctionField:
    if psi0.grid != grid:
        raise ValidationError("psi0 grid does not match the propagation grid")
    method = "imaginary-time" if imaginary else "crank-nicolson"
    psi = psi0.amplitudes.astype(np.complex128).copy()
    cache: dict = {}
    for step in range(grid.n_t):
        v = lag.potential_on_grid(grid, grid.step_midpoint_time(step))
        key = None if v is None else v.tobytes()
        got = cache.get(key)
        if got is None:
            got = _cn_banded(grid, lag.constants, v, imaginary)
            cache[key] = got
        A, B, hard = got
        if hard.any():
            psi[hard] = 0.0
        rhs = B[1] * psi
        rhs[:-1] += B[0, 1:] * psi[1:]
        rhs[1:] += B[2, :-1] * psi[:-1]
        try:
            psi = solve_banded((1, 1), A, rhs)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericFailureError(
                f"{method} linear solve failed at step {step}: {exc}") from exc
        if hard.any():
            psi[hard] = 0.0
        _check_finite(psi, method, step)
        if renormalize:
            n2 = np.sum(np.abs(psi) ** 2) * grid.dx
            if n2 <= 0:
                raise NumericFailureError(
                    f"{method} lost all amplitude at step {step}")
            psi /= np.sqrt(n2)
    return WaveFunctionField(grid, grid.n_t, psi)


def schrodinger_propagate(psi0: WaveFunctionField, lag: LagrangianSpec,
                          grid: SpaceTimeGrid) -> WaveFunctionField:
    """Crank-Nicolson reference evolution; unitary to round-off for finite
    real potentials (hard walls absorb)."""
    return _cn_run(psi0, lag, grid, imaginary=False, renormalize=False)


def imaginary_time_propagate(psi0: WaveFunctionField, lag: LagrangianSpec,
                             grid: SpaceTimeGrid) -> WaveFunctionField:
    """Wick-rotated diffusion with per-step renormalization.

    Repeated application relaxes toward the potential's ground state.
    """
    return _cn_run(psi0, lag, grid, imaginary=True, renormalize=True)


def free_kernel_propagate(psi0: WaveFunctionField, grid: SpaceTimeGrid,
                          constants: PhysicalConstants,
                          lag: LagrangianSpec | None = None) -> WaveFunctionField:
    """Single-step convolution with the closed-form free kernel over the
    whole interval; third independent oracle for free runs."""
    if lag is not None and lag.kind != FREE:
        raise ValidationError("free_kernel_propagate requires a free potential")
    if psi0.grid != grid:
        raise ValidationError("psi0 grid does not match the propagation grid")
    T = grid.t_end - grid.t_start
    m, hbar = constants.mass, constants.hbar
    # kernel from index differences so it is exactly Toeplitz
    d = (np.arange(grid.n_x)[:, None] - np.arange(grid.n_x)[None, :]) * grid.dx
    kernel = np.sqrt(m / (2j * np.pi * hbar * T)) \
        * np.exp(1j * m * d ** 2 / (2 * hbar * T)) * grid.dx
    psi = kernel @ psi0.amplitudes
    _check_finite(psi, "free-kernel", 0)
    return WaveFunctionField(grid, grid.n_t, psi)


def norm_drift(psi0: WaveFunctionField, psi1: WaveFunctionField) -> float:
    """Relative norm-squared drift between two fields."""
    n0 = norm_squared(psi0)
    if n0 == 0:
        return 0.0
    return abs(norm_squared(psi1) - n0) / n0
