"""Coherence relaxation: gradient descent on the smooth decoherence measure
over one constant phase offset per member.

Per-slice phase edits would break the action/phase invariant of a
trajectory; a constant offset only moves its free initial phase, so the
accessible dynamics is descent in the offset vector. Backtracking line
search guarantees a non-increasing measure history.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ensemble import Ensemble, _slice_groups
from .errors import ValidationError


@dataclass(frozen=True)
class LineSearchSpec:
    initial_step: float = 1.0
    shrink: float = 0.5
    grow: float = 1.5
    armijo: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class RelaxationResult:
    ensemble: Ensemble
    history: np.ndarray          # smooth measure at start and after each accepted step
    offsets: np.ndarray
    converged: bool
    n_steps: int
    grad_inf_norm: float


def _event_rows(ensemble: Ensemble):
    """Flatten intersection events into (event id, member index, base phase) rows."""
    ev_member, ev_phase, ev_id = [], [], []
    phases = ensemble.phase_matrix
    e = 0
    for k in range(ensemble.grid.n_t + 1):
        for _, grp in _slice_groups(ensemble, k):
            ev_member.append(grp)
            ev_phase.append(phases[grp, k])
            ev_id.append(np.full(grp.size, e))
            e += 1
    if not ev_member:
        return (np.empty(0, np.int64), np.empty(0), np.empty(0, np.int64), 0)
    return (np.concatenate(ev_member), np.concatenate(ev_phase),
            np.concatenate(ev_id), e)


def relax_coherence(ensemble: Ensemble, max_steps: int = 500,
                    step_rule: Optional[LineSearchSpec] = None,
                    grad_tol: float = 1e-6) -> RelaxationResult:
    """Descend the smooth decoherence measure over per-member phase offsets.

    Stops when the gradient infinity norm drops below grad_tol or after
    max_steps accepted steps; a failed line search returns the best iterate
    with converged=False.
    """
    if max_steps < 0:
        raise ValidationError(f"max_steps must be >= 0, got {max_steps}")
    rule = step_rule or LineSearchSpec()
    n = len(ensemble)
    mem, base_phase, ev, n_events = _event_rows(ensemble)
    counts = np.bincount(ev, minlength=n_events).astype(float)
    pair_total = float(np.sum(counts * (counts - 1) / 2.0))

    def measure_and_resultants(theta):
        z = np.exp(1j * (base_phase + theta[mem]))
        r = np.zeros(n_events, dtype=np.complex128)
        np.add.at(r, ev, z)
        # sum over pairs of (1 - cos) via the event resultants
        smooth = pair_total - float((np.abs(r) ** 2 - counts).sum()) / 2.0
        return smooth, z, r

    def gradient(theta, z, r):
        g = np.zeros(n)
        np.add.at(g, mem, np.imag(z * np.conj(r[ev])))
        return g

    theta = np.zeros(n)
    if n_events == 0 or n == 0:
        return RelaxationResult(ensemble, np.array([0.0]), theta, True, 0, 0.0)

    f, z, r = measure_and_resultants(theta)
    history = [f]
    step = rule.initial_step
    converged = False
    n_steps = 0
    g = gradient(theta, z, r)
    for _ in range(max_steps):
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm < grad_tol:
            converged = True
            break
        g2 = float(np.dot(g, g))
        accepted = False
        t = step
        for _ in range(rule.max_backtracks):
            cand = theta - t * g
            fc, zc, rc = measure_and_resultants(cand)
            if fc <= f - rule.armijo * t * g2:
                theta, f, z, r = cand, fc, zc, rc
                history.append(f)
                step = t * rule.grow
                accepted = True
                n_steps += 1
                break
            t *= rule.shrink
        if not accepted:
            break
        g = gradient(theta, z, r)
    else:
        converged = float(np.max(np.abs(g))) < grad_tol if g.size else True

    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if not converged and gnorm < grad_tol:
        converged = True
    relaxed = Ensemble(
        ensemble.grid,
        tuple(m.with_phase_offset(float(th))
              for m, th in zip(ensemble.members, theta)),
        {**ensemble.provenance,
         "relaxation": {"steps": n_steps, "converged": bool(converged),
                        "grad_inf_norm": gnorm}},
    )
    return RelaxationResult(relaxed, np.asarray(history), theta,
                            bool(converged), n_steps, gnorm)
