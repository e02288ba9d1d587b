"""Experiment drivers: the double-slit run and the oracle-comparison
pipeline, plus arrival-histogram and fringe analysis.

The double slit is a time-windowed barrier (wall with two gaps) on the 1D
lattice; the screen is the final time slice. Each shot is one independent
arrival sampled from |psi_screen|^2 dx, the paper-style one-by-one regime:
detections are particle-like, the aggregate is wave-like.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks
from scipy.stats import chi2 as chi2_dist

from .action import BARRIER, FREE, LagrangianSpec
from .config import ExperimentConfig
from .ensemble import (Ensemble, decoherence_measure, reconstruct_wavefunction,
                       select_coherent_ensemble)
from .errors import ValidationError
from .lattice import SpaceTimeGrid, WaveFunctionField, norm_squared
from .propagators import (free_kernel_propagate, imaginary_time_propagate,
                          pathsum_propagate, schrodinger_propagate)
from .sampling import EndpointSpec, sample_paths

SHOT_STREAM = 2_000_003  # rng stream tag for screen arrivals


def propagate_by_method(psi0: WaveFunctionField, lag: LagrangianSpec,
                        grid: SpaceTimeGrid, method: str) -> WaveFunctionField:
    if method == "cn":
        return schrodinger_propagate(psi0, lag, grid)
    if method == "pathsum":
        return pathsum_propagate(psi0, lag, grid)
    if method == "free-kernel":
        return free_kernel_propagate(psi0, grid, lag.constants, lag)
    if method == "imaginary":
        return imaginary_time_propagate(psi0, lag, grid)
    raise ValidationError(f"unknown method {method!r}")


@dataclass(frozen=True)
class ArrivalHistogram:
    grid: SpaceTimeGrid
    counts: np.ndarray
    shots: int
    provenance: Dict

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        if c.shape != (self.grid.n_x,):
            raise ValidationError("histogram counts must cover every screen cell")
        if c.min() < 0 or int(c.sum()) != self.shots:
            raise ValidationError("histogram counts must be >= 0 and sum to shots")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def bin_edges(self) -> np.ndarray:
        g = self.grid
        return g.x_min + np.arange(g.n_x + 1) * g.dx


@dataclass(frozen=True)
class FringeReport:
    visibility: float
    centroid: float
    region: Tuple[float, float]
    peaks: Tuple[float, ...]
    spacing_measured: float
    spacing_predicted: float
    intensity_max: float
    intensity_min: float


@dataclass(frozen=True)
class DoubleSlitResult:
    psi_screen: WaveFunctionField
    histogram: ArrivalHistogram
    fringes: FringeReport


def screen_distribution(psi: WaveFunctionField) -> np.ndarray:
    p = np.abs(psi.amplitudes) ** 2 * psi.grid.dx
    total = p.sum()
    if total <= 0:
        raise ValidationError("screen field carries no probability")
    return p / total


def sample_arrivals(psi: WaveFunctionField, shots: int, seed: int) -> np.ndarray:
    """Per-cell detection counts for `shots` independent arrivals."""
    if shots < 1:
        raise ValidationError(f"shots must be >= 1, got {shots}")
    p = screen_distribution(psi)
    rng = np.random.default_rng(np.random.SeedSequence([seed, SHOT_STREAM]))
    cells = rng.choice(psi.grid.n_x, size=shots, p=p)
    return np.bincount(cells, minlength=psi.grid.n_x)


def _refine_extremum(x: np.ndarray, y: np.ndarray, i: int) -> float:
    """Parabolic sub-cell refinement of a local extremum position."""
    if 0 < i < len(y) - 1:
        denom = y[i - 1] - 2 * y[i] + y[i + 1]
        if denom != 0:
            return float(x[i] + 0.5 * (y[i - 1] - y[i + 1]) / denom * (x[1] - x[0]))
    return float(x[i])


def fringe_analysis(psi: WaveFunctionField, d_slits: float, t_after: float,
                    constants, region_mult: float = 0.6) -> FringeReport:
    """Visibility, peaks, and fringe spacing of the screen profile.

    The sanity envelope for the spacing is lambda L / d with
    lambda = 2 pi hbar / p_eff, which for free flight after the barrier
    collapses to 2 pi hbar t_after / (m d). Visibility is measured over
    centroid +- region_mult * predicted spacing; the measured spacing is
    the distance between the two minima flanking the central maximum
    (minima are pinned by the interference zeros, so this stays robust
    against ripple on the fringe lobes).
    """
    if d_slits <= 0 or t_after <= 0:
        raise ValidationError("need positive slit separation and post-barrier time")
    x = psi.grid.cell_centers()
    intensity = np.abs(psi.amplitudes) ** 2
    total = intensity.sum()
    if total <= 0:
        raise ValidationError("screen field carries no probability")
    centroid = float(np.sum(x * intensity) / total)
    predicted = 2 * np.pi * constants.hbar * t_after / (constants.mass * d_slits)

    half = region_mult * predicted
    sel = (x >= centroid - half) & (x <= centroid + half)
    if sel.sum() < 5:
        raise ValidationError("central fringe region spans fewer than 5 cells; "
                              "refine the grid or widen fringe_region_mult")
    i_max = float(intensity[sel].max())
    i_min = float(intensity[sel].min())
    visibility = (i_max - i_min) / (i_max + i_min)

    # peaks over a wider window, for the report
    wide = (x >= centroid - 1.6 * predicted) & (x <= centroid + 1.6 * predicted)
    xi, yi = x[wide], intensity[wide]
    pk, _ = find_peaks(yi, prominence=0.05 * intensity.max())
    peaks = tuple(_refine_extremum(xi, yi, int(i)) for i in pk)

    spacing = float("nan")
    minima = []
    for sign in (-1.0, 1.0):
        lo = centroid + sign * 0.15 * predicted
        hi = centroid + sign * 0.85 * predicted
        lo, hi = min(lo, hi), max(lo, hi)
        m = (x >= lo) & (x <= hi)
        if m.sum() >= 3:
            xm, ym = x[m], intensity[m]
            minima.append(_refine_extremum(xm, ym, int(np.argmin(ym))))
    if len(minima) == 2:
        spacing = float(minima[1] - minima[0])

    return FringeReport(float(visibility), centroid,
                        (centroid - half, centroid + half), peaks,
                        spacing, float(predicted), i_max, i_min)


def histogram_gof(hist: ArrivalHistogram, psi: WaveFunctionField,
                  min_expected: float = 5.0) -> Tuple[float, int, float]:
    """Chi-square goodness of fit of arrival counts against |psi|^2 dx.

    Cells with expected count below min_expected are pooled into one bin.
    Returns (chi2, degrees of freedom, p-value).
    """
    p = screen_distribution(psi)
    expected = hist.shots * p
    big = expected >= min_expected
    obs = list(hist.counts[big].astype(float))
    exp = list(expected[big])
    if not np.all(big):
        obs.append(float(hist.counts[~big].sum()))
        exp.append(float(expected[~big].sum()))
    obs = np.array(obs)
    exp = np.array(exp)
    exp *= obs.sum() / exp.sum()
    chi2 = float(np.sum((obs - exp) ** 2 / exp))
    dof = len(obs) - 1
    pvalue = float(chi2_dist.sf(chi2, dof))
    return chi2, dof, pvalue


def run_double_slit(cfg: ExperimentConfig) -> DoubleSlitResult:
    """Propagate through the slit window, then sample one-by-one arrivals."""
    if cfg.kind != BARRIER:
        raise ValidationError("run_double_slit needs potential.kind = barrier")
    if cfg.method not in ("cn", "pathsum"):
        raise ValidationError(
            f"double slit needs method cn or pathsum, got {cfg.method!r}")
    grid = cfg.grid()
    lag = cfg.lagrangian(grid)
    psi0 = cfg.packet(grid)
    psi_screen = propagate_by_method(psi0, lag, grid, cfg.method)
    counts = sample_arrivals(psi_screen, cfg.shots, cfg.seed)
    hist = ArrivalHistogram(grid, counts, cfg.shots, {
        "seed": cfg.seed, "config_sha256": cfg.sha256, "method": cfg.method,
    })
    d = abs(cfg.slit_centers[1] - cfg.slit_centers[0])
    t_after = cfg.t_end - cfg.window_t_end
    fringes = fringe_analysis(psi_screen, d, t_after, cfg.constants(),
                              cfg.fringe_region_mult)
    return DoubleSlitResult(psi_screen, hist, fringes)


def _aligned_masked_error(recon: WaveFunctionField, mask: np.ndarray,
                          ref: WaveFunctionField) -> float:
    """Relative L2 mismatch on unmasked cells, after removing the global
    phase (the reconstruction only determines the field up to one)."""
    if not mask.any():
        return float("inf")
    a = recon.amplitudes[mask]
    b = ref.amplitudes[mask]
    overlap = np.sum(np.conj(a) * b)
    if overlap != 0:
        a = a * np.exp(1j * np.angle(overlap))
    denom = np.sqrt(np.sum(np.abs(b) ** 2))
    if denom == 0:
        return float("inf")
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2)) / denom)


def run_oracle_comparison(cfg: ExperimentConfig) -> Dict:
    """Method triangle plus the sample/select/reconstruct pipeline.

    Returns a JSON-ready report with pairwise L2 errors, decoherence
    before/after selection, and pass/fail against the config tolerances.
    """
    grid = cfg.grid()
    lag = cfg.lagrangian(grid)
    psi0 = cfg.packet(grid)

    psi_ps = pathsum_propagate(psi0, lag, grid)
    psi_cn = schrodinger_propagate(psi0, lag, grid)
    dx = grid.dx

    def l2(a, b):
        return float(np.sqrt(np.sum(np.abs(a.amplitudes - b.amplitudes) ** 2) * dx))

    errors = {"pathsum_vs_cn": l2(psi_ps, psi_cn)}
    if lag.kind == FREE:
        psi_fk = free_kernel_propagate(psi0, grid, lag.constants, lag)
        errors["pathsum_vs_kernel"] = l2(psi_ps, psi_fk)
        errors["cn_vs_kernel"] = l2(psi_cn, psi_fk)

    end = psi_ps if cfg.endpoints == "bridge" else None
    paths = sample_paths(psi0, cfg.n_paths, cfg.seed, lag=lag, grid=grid,
                         endpoints=EndpointSpec(end=end),
                         step_scale=cfg.step_scale, max_hop=cfg.max_hop,
                         n_workers=cfg.workers)
    selection = select_coherent_ensemble(psi_ps, paths, cfg.epsilon,
                                         cfg.mag_floor_rel)
    raw_before = decoherence_measure(paths, time_index=grid.n_t).raw_measure
    raw_after = decoherence_measure(selection, time_index=grid.n_t).raw_measure

    if len(selection) > 0:
        recon, mask = reconstruct_wavefunction(selection, grid.n_t, cfg.min_count)
        recon_error = _aligned_masked_error(recon, mask, psi_ps)
        unmasked_cells = int(mask.sum())
    else:
        recon_error = float("inf")
        unmasked_cells = 0

    checks = {
        "oracle_triangle": all(e <= cfg.tol_method_l2 for e in errors.values()),
        "reconstruction": recon_error <= cfg.tol_reconstruction_l2,
        "decoherence_reduced": raw_after < raw_before,
    }
    return {
        "config_sha256": cfg.sha256,
        "seed": cfg.seed,
        "grid": {"n_x": grid.n_x, "n_t": grid.n_t, "dx": grid.dx, "dt": grid.dt},
        "potential": cfg.kind,
        "method_l2_errors": errors,
        "tolerance_method_l2": cfg.tol_method_l2,
        "norms": {"pathsum": norm_squared(psi_ps), "cn": norm_squared(psi_cn)},
        "ensemble": {
            "n_paths": cfg.n_paths,
            "n_selected": len(selection),
            "epsilon": cfg.epsilon,
            "min_count": cfg.min_count,
            "unmasked_cells": unmasked_cells,
            "reconstruction_l2": recon_error,
            "tolerance_reconstruction_l2": cfg.tol_reconstruction_l2,
            "decoherence_final_slice": {"raw_before": raw_before,
                                        "raw_after": raw_after},
        },
        "checks": checks,
        "pass": all(checks.values()),
    }
