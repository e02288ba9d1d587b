"""Experiment configuration: a flat INI file with sections
grid, constants, potential, packet, run. Unknown sections or keys are
errors; silent typos in physics configs are the classic failure mode.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .action import BARRIER, FREE, HARMONIC, LagrangianSpec
from .errors import ValidationError
from .lattice import (PhysicalConstants, SpaceTimeGrid, WaveFunctionField,
                      gaussian_packet, make_grid)

METHODS = ("cn", "pathsum", "free-kernel", "imaginary")
ENDPOINT_MODES = ("bridge", "free")

_SCHEMA = {
    "grid": {"x_min", "x_max", "n_x", "t_start", "t_end", "n_t"},
    "constants": {"hbar", "mass"},
    "potential": {"kind", "omega", "wall_value", "slit_centers",
                  "slit_half_widths", "window_t_start", "window_t_end"},
    "packet": {"x0", "sigma0", "p0"},
    "run": {"method", "seed", "n_paths", "shots", "epsilon", "min_count",
            "mag_floor_rel", "tol_method_l2", "tol_reconstruction_l2",
            "eps_phase", "eps_mag", "relax_max_steps", "endpoints",
            "step_scale", "max_hop", "workers", "fringe_region_mult"},
}

MIN_WALL_VALUE = 1e3


@dataclass(frozen=True)
class ExperimentConfig:
    # grid
    x_min: float
    x_max: float
    n_x: int
    t_start: float
    t_end: float
    n_t: int
    # constants
    hbar: float = 1.0
    mass: float = 1.0
    # potential
    kind: str = FREE
    omega: float = 0.0
    wall_value: float = np.inf
    slit_centers: Tuple[float, ...] = ()
    slit_half_widths: Tuple[float, ...] = ()
    window_t_start: float = 0.0
    window_t_end: float = 0.0
    # packet
    x0: float = 0.0
    sigma0: float = 1.0
    p0: float = 0.0
    # run
    method: str = "cn"
    seed: int = 0
    n_paths: int = 10000
    shots: int = 100000
    epsilon: float = float(np.pi / 8)
    min_count: int = 20
    mag_floor_rel: float = 1e-4
    tol_method_l2: float = 1e-2
    tol_reconstruction_l2: float = 0.10
    eps_phase: float = 0.15
    eps_mag: float = 0.10
    relax_max_steps: int = 500
    endpoints: str = "bridge"
    step_scale: float = 1.0
    max_hop: Optional[int] = None
    workers: int = 1
    fringe_region_mult: float = 0.6
    # provenance
    sha256: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(
                f"run.method must be one of {METHODS}, got {self.method!r}")
        if self.endpoints not in ENDPOINT_MODES:
            raise ValidationError(
                f"run.endpoints must be one of {ENDPOINT_MODES}, got {self.endpoints!r}")
        if self.seed < 0:
            raise ValidationError(f"run.seed must be >= 0, got {self.seed}")
        if self.shots < 1:
            raise ValidationError(f"run.shots must be >= 1, got {self.shots}")
        if self.n_paths < 1:
            raise ValidationError(f"run.n_paths must be >= 1, got {self.n_paths}")
        for name in ("epsilon", "tol_method_l2", "tol_reconstruction_l2",
                     "eps_phase", "eps_mag", "step_scale", "fringe_region_mult"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"run.{name} must be > 0")
        if self.min_count < 1:
            raise ValidationError(f"run.min_count must be >= 1, got {self.min_count}")
        if self.sigma0 <= 0:
            raise ValidationError(f"packet.sigma0 must be > 0, got {self.sigma0}")
        if self.kind == BARRIER:
            self._validate_barrier()

    def _validate_barrier(self):
        if np.isnan(self.wall_value) or self.wall_value < MIN_WALL_VALUE:
            raise ValidationError(
                f"potential.wall_value must be >= {MIN_WALL_VALUE:g} (inf makes a "
                f"hard absorbing wall), got {self.wall_value}")
        if len(self.slit_centers) != 2 or len(self.slit_half_widths) != 2:
            raise ValidationError(
                "potential.slit_centers and slit_half_widths need exactly 2 entries")
        for hw in self.slit_half_widths:
            if hw < 0:
                raise ValidationError("slit half-widths must be >= 0")
        intervals = sorted((c - hw, c + hw) for c, hw
                           in zip(self.slit_centers, self.slit_half_widths))
        if intervals[0][1] > intervals[1][0]:
            raise ValidationError("slit intervals must be disjoint")
        for lo, hi in intervals:
            if lo < self.x_min or hi > self.x_max:
                raise ValidationError("slit intervals must lie inside the grid")
        if not (self.t_start <= self.window_t_start < self.window_t_end
                <= self.t_end):
            raise ValidationError(
                "barrier window must satisfy t_start <= window_t_start < "
                "window_t_end <= t_end")

    # builders -----------------------------------------------------------

    def grid(self) -> SpaceTimeGrid:
        return make_grid(self.x_min, self.x_max, self.n_x,
                         self.t_start, self.t_end, self.n_t)

    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(self.hbar, self.mass)

    def barrier_profile(self, grid: SpaceTimeGrid) -> np.ndarray:
        x = grid.cell_centers()
        v = np.full(grid.n_x, self.wall_value)
        for c, hw in zip(self.slit_centers, self.slit_half_widths):
            if hw > 0:
                v[np.abs(x - c) <= hw] = 0.0
        return v

    def lagrangian(self, grid: SpaceTimeGrid) -> LagrangianSpec:
        consts = self.constants()
        if self.kind == FREE:
            return LagrangianSpec.free(consts)
        if self.kind == HARMONIC:
            return LagrangianSpec.harmonic(consts, self.omega)
        return LagrangianSpec.barrier(consts, self.barrier_profile(grid),
                                      (self.window_t_start, self.window_t_end))

    def packet(self, grid: SpaceTimeGrid) -> WaveFunctionField:
        return gaussian_packet(grid, self.constants(), self.x0, self.sigma0, self.p0)


def _floats_list(raw: str) -> Tuple[float, ...]:
    return tuple(float(tok) for tok in raw.replace(",", " ").split())


def parse_config_text(text: str, sha256: str = "") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"bad config syntax: {exc}") from exc

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ValidationError(f"unknown config section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ValidationError(f"unknown key {key!r} in section [{section}]")
    for required in ("grid", "potential"):
        if required not in cp:
            raise ValidationError(f"config needs a [{required}] section")

    def get(section, key, conv, default=None, required=False):
        if cp.has_option(section, key):
            raw = cp.get(section, key)
            try:
                return conv(raw)
            except (TypeError, ValueError) as exc:
                raise ValidationError(
                    f"bad value for {section}.{key}: {raw!r}") from exc
        if required:
            raise ValidationError(f"config is missing {section}.{key}")
        return default

    kind = get("potential", "kind", str, required=True).strip().lower()
    if kind not in (FREE, HARMONIC, BARRIER):
        raise ValidationError(f"potential.kind must be free|harmonic|barrier, "
                              f"got {kind!r}")
    if kind == HARMONIC and not cp.has_option("potential", "omega"):
        raise ValidationError("harmonic potential needs potential.omega")
    if kind == BARRIER:
        for key in ("wall_value", "slit_centers", "slit_half_widths",
                    "window_t_start", "window_t_end"):
            if not cp.has_option("potential", key):
                raise ValidationError(f"barrier potential needs potential.{key}")

    max_hop_raw = get("run", "max_hop", str, default=None)
    return ExperimentConfig(
        x_min=get("grid", "x_min", float, required=True),
        x_max=get("grid", "x_max", float, required=True),
        n_x=get("grid", "n_x", int, required=True),
        t_start=get("grid", "t_start", float, required=True),
        t_end=get("grid", "t_end", float, required=True),
        n_t=get("grid", "n_t", int, required=True),
        hbar=get("constants", "hbar", float, 1.0),
        mass=get("constants", "mass", float, 1.0),
        kind=kind,
        omega=get("potential", "omega", float, 0.0),
        wall_value=get("potential", "wall_value", float, np.inf),
        slit_centers=get("potential", "slit_centers", _floats_list, ()),
        slit_half_widths=get("potential", "slit_half_widths", _floats_list, ()),
        window_t_start=get("potential", "window_t_start", float, 0.0),
        window_t_end=get("potential", "window_t_end", float, 0.0),
        x0=get("packet", "x0", float, 0.0),
        sigma0=get("packet", "sigma0", float, 1.0),
        p0=get("packet", "p0", float, 0.0),
        method=get("run", "method", str, "cn").strip().lower(),
        seed=get("run", "seed", int, 0),
        n_paths=get("run", "n_paths", int, 10000),
        shots=get("run", "shots", int, 100000),
        epsilon=get("run", "epsilon", float, float(np.pi / 8)),
        min_count=get("run", "min_count", int, 20),
        mag_floor_rel=get("run", "mag_floor_rel", float, 1e-4),
        tol_method_l2=get("run", "tol_method_l2", float, 1e-2),
        tol_reconstruction_l2=get("run", "tol_reconstruction_l2", float, 0.10),
        eps_phase=get("run", "eps_phase", float, 0.15),
        eps_mag=get("run", "eps_mag", float, 0.10),
        relax_max_steps=get("run", "relax_max_steps", int, 500),
        endpoints=get("run", "endpoints", str, "bridge").strip().lower(),
        step_scale=get("run", "step_scale", float, 1.0),
        max_hop=None if max_hop_raw in (None, "", "none") else int(max_hop_raw),
        workers=get("run", "workers", int, 1),
        fringe_region_mult=get("run", "fringe_region_mult", float, 0.6),
        sha256=sha256,
    )


def load_config(path) -> ExperimentConfig:
    data = Path(path).read_bytes()
    return parse_config_text(data.decode("utf-8"),
                             hashlib.sha256(data).hexdigest())
