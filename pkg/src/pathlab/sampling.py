"""Seeded random-walk trajectory sampling.

Paths are generated in fixed-size chunks; chunk c draws from its own
generator seeded by SeedSequence([seed, c]), so the assembled ensemble is
bit-identical no matter how many workers process the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .action import LagrangianSpec, step_actions
from .ensemble import Ensemble
from .errors import ValidationError
from .lattice import PhasedTrajectory, SpaceTimeGrid, Trajectory, WaveFunctionField

CHUNK_SIZE = 1024


@dataclass(frozen=True)
class EndpointSpec:
    """Endpoint constraints for sampled paths.

    start: None draws from the source; an int pins the start cell.
    end:   None leaves arrival free; an int pins it; a WaveFunctionField
           draws arrivals from that field's |psi|^2 (bridged walk).
    """

    start: Optional[int] = None
    end: Union[None, int, WaveFunctionField] = None


def _cell_distribution(field: WaveFunctionField) -> np.ndarray:
    p = np.abs(field.amplitudes) ** 2
    total = p.sum()
    if total <= 0:
        raise ValidationError("cannot sample endpoints from a zero field")
    return p / total


def _sample_chunk(rng, m, grid, start_spec, end_spec, p_start, p_end,
                  sigma_cells, max_hop, draw_init):
    n_t, n_x = grid.n_t, grid.n_x
    pos = np.empty((m, n_t + 1), dtype=np.int64)
    if p_start is not None:
        pos[:, 0] = rng.choice(n_x, size=m, p=p_start)
    else:
        pos[:, 0] = start_spec
    ends = None
    if p_end is not None:
        ends = rng.choice(n_x, size=m, p=p_end)
    elif isinstance(end_spec, (int, np.integer)):
        ends = np.full(m, int(end_spec), dtype=np.int64)
    init = rng.uniform(0.0, 2.0 * np.pi, size=m) if draw_init else None

    if ends is not None:
        bad = np.abs(ends - pos[:, 0]) > n_t * max_hop
        if bad.any():
            raise ValidationError(
                f"endpoint displacement exceeds n_t*max_hop = {n_t * max_hop} "
                f"for {int(bad.sum())} paths; raise max_hop")
        for k in range(n_t - 1):
            remaining = n_t - k
            mu = (ends - pos[:, k]) / remaining
            hop = np.rint(rng.normal(mu, sigma_cells)).astype(np.int64)
            np.clip(hop, -max_hop, max_hop, out=hop)
            nxt = np.clip(pos[:, k] + hop, 0, n_x - 1)
            reach = (remaining - 1) * max_hop
            nxt = np.clip(nxt, ends - reach, ends + reach)
            pos[:, k + 1] = nxt
        pos[:, n_t] = ends
    else:
        for k in range(n_t):
            hop = np.rint(rng.normal(0.0, sigma_cells, size=m)).astype(np.int64)
            np.clip(hop, -max_hop, max_hop, out=hop)
            pos[:, k + 1] = np.clip(pos[:, k] + hop, 0, n_x - 1)
    return pos, init


def sample_paths(source: Union[WaveFunctionField, int], n: int, seed: int, *,
                 lag: LagrangianSpec, grid: SpaceTimeGrid,
                 endpoints: Optional[EndpointSpec] = None,
                 step_scale: float = 1.0,
                 initial_phase: Optional[float] = None,
                 max_hop: Optional[int] = None,
                 n_workers: int = 1) -> Ensemble:
    """Sample n phased trajectories; identical inputs give identical output.

    Start cells come from |source|^2 (or a pinned cell), hops are rounded
    Gaussians with std step_scale * sqrt(hbar dt / m) / dx cells, optionally
    steered toward a fixed or field-sampled arrival. Initial phases default
    to an incoherent uniform draw per path; pass a float for a common offset.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1 paths, got {n}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")
    if step_scale <= 0:
        raise ValidationError(f"step_scale must be > 0, got {step_scale}")
    endpoints = endpoints or EndpointSpec()
    max_hop = grid.n_x if max_hop is None else int(max_hop)
    if max_hop < 1:
        raise ValidationError(f"max_hop must be >= 1, got {max_hop}")

    if endpoints.start is not None:
        start_spec = int(endpoints.start)
        p_start = None
    elif isinstance(source, WaveFunctionField):
        start_spec = None
        p_start = _cell_distribution(source)
    else:
        start_spec = int(source)
        p_start = None
    if start_spec is not None and not 0 <= start_spec < grid.n_x:
        raise ValidationError(f"start cell {start_spec} outside grid")

    end_spec = endpoints.end
    p_end = _cell_distribution(end_spec) if isinstance(end_spec, WaveFunctionField) \
        else None
    if isinstance(end_spec, (int, np.integer)):
        if not 0 <= int(end_spec) < grid.n_x:
            raise ValidationError(f"end cell {end_spec} outside grid")
        if start_spec is not None and abs(int(end_spec) - start_spec) > grid.n_t * max_hop:
            raise ValidationError(
                f"required displacement {abs(int(end_spec) - start_spec)} exceeds "
                f"n_t*max_hop = {grid.n_t * max_hop}")

    sigma_cells = step_scale * np.sqrt(lag.constants.hbar * grid.dt
                                       / lag.constants.mass) / grid.dx
    draw_init = initial_phase is None
    chunks = [(c, min(CHUNK_SIZE, n - c * CHUNK_SIZE))
              for c in range((n + CHUNK_SIZE - 1) // CHUNK_SIZE)]

    def run_chunk(arg):
        c, m = arg
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        return _sample_chunk(rng, m, grid, start_spec, end_spec, p_start, p_end,
                             sigma_cells, max_hop, draw_init)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(run_chunk, chunks))
    else:
        results = [run_chunk(ch) for ch in chunks]

    members = []
    next_id = 0
    for (c, m), (pos, init) in zip(chunks, results):
        per_step = step_actions(pos, lag, grid)
        if not np.all(np.isfinite(per_step)):
            raise ValidationError(
                "sampled paths cross an infinite-potential cell; "
                "hard-wall sampling is not supported")
        phases = np.empty((m, grid.n_t + 1))
        phases[:, 0] = init if draw_init else initial_phase
        phases[:, 1:] = phases[:, :1] + np.cumsum(per_step, axis=1) / lag.constants.hbar
        for r in range(m):
            members.append(PhasedTrajectory(Trajectory(next_id, pos[r]), phases[r]))
            next_id += 1

    provenance = {
        "sampler": "gaussian_bridge",
        "seed": int(seed),
        "n": int(n),
        "chunk_size": CHUNK_SIZE,
        "step_scale": float(step_scale),
        "sigma_cells": float(sigma_cells),
        "max_hop": int(max_hop),
        "start": "field" if p_start is not None else int(start_spec),
        "end": ("field" if p_end is not None
                else ("free" if end_spec is None else int(end_spec))),
        "initial_phase": "uniform" if draw_init else float(initial_phase),
    }
    return Ensemble(grid, tuple(members), provenance)
