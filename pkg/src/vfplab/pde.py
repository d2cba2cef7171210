"""Finite-volume solver for the kinetic mean-field equation on a phase-space box.

d_t f + v d_x f + (F_f(x) - x) d_v f = gamma d_v(v f + d_v f),
F_f(x) = -lam * int dK/dx(x - y) f(y, w) dy dw,
on [-Lx, Lx] x [-Lv, Lv] with zero-flux walls.  Transport and force advection
use first-order conservative upwinding; the velocity Fokker-Planck operator
uses exponentially fitted interface weights that annihilate the grid
Maxwellian exactly.  The mean-field force is frozen at the start of each step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, NonConvergenceError, SchemeError
from .model import ModelParams, mean_field_force, smallness_holds
from .output import write_csv, write_json

Array = np.ndarray

__all__ = [
    "GridConfig",
    "PhaseGrid",
    "gaussian_grid",
    "grid_from_density",
    "x_marginal",
    "cfl_bound",
    "vfp_step",
    "run_vfp",
    "stationary_fixed_point",
    "grid_to_csv",
    "grid_to_binary",
]

SPLITTINGS = ("lie", "strang")


@dataclass(frozen=True)
class GridConfig:
    """Phase-space box, resolution, time step, and splitting order."""

    Lx: float = 8.0
    Lv: float = 8.0
    nx: int = 128
    nv: int = 128
    dt: float = 1e-3
    cfl_safety: float = 0.5
    splitting: str = "strang"

    def __post_init__(self):
        if not (self.Lx > 0 and self.Lv > 0):
            raise ConfigurationError("Lx and Lv must be positive")
        if self.nx < 4 or self.nv < 4:
            raise ConfigurationError("nx and nv must be at least 4")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive and finite, got {self.dt}")
        if not (0 < self.cfl_safety <= 1):
            raise ConfigurationError("cfl_safety must lie in (0, 1]")
        if self.splitting not in SPLITTINGS:
            raise ConfigurationError(f"splitting must be one of {SPLITTINGS}")


@dataclass
class PhaseGrid:
    """Cell-averaged density on a uniform phase-space grid; data[i, j] ~ f(x_i, v_j)."""

    Lx: float
    Lv: float
    nx: int
    nv: int
    data: Array
    t: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.nx, self.nv):
            raise ValueError(f"data must have shape ({self.nx}, {self.nv})")
        if not np.isfinite(self.data).all():
            raise SchemeError(f"non-finite grid density at t={self.t:g}")
        if self.data.min() < 0.0:
            raise SchemeError(f"negative grid density at t={self.t:g}")
        m = self.mass()
        if abs(m - 1.0) > 1e-10:
            raise ValueError(f"grid mass must be 1 within 1e-10, got {m!r}")

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def dv(self) -> float:
        return 2.0 * self.Lv / self.nv

    @property
    def x_centers(self) -> Array:
        return -self.Lx + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v_centers(self) -> Array:
        return -self.Lv + (np.arange(self.nv) + 0.5) * self.dv

    def mass(self) -> float:
        return float(self.data.sum() * self.dx * self.dv)

    def cell_area(self) -> float:
        return self.dx * self.dv


def grid_from_density(cfg: GridConfig, density, t: float = 0.0) -> PhaseGrid:
    """Sample ``density(x, v)`` at cell centers and normalize to unit mass."""
    x = -cfg.Lx + (np.arange(cfg.nx) + 0.5) * (2.0 * cfg.Lx / cfg.nx)
    v = -cfg.Lv + (np.arange(cfg.nv) + 0.5) * (2.0 * cfg.Lv / cfg.nv)
    data = np.asarray(density(x[:, None], v[None, :]), dtype=float)
    data = np.maximum(data, 0.0)
    total = data.sum() * (2.0 * cfg.Lx / cfg.nx) * (2.0 * cfg.Lv / cfg.nv)
    if not total > 0:
        raise ValueError("density must have positive mass on the grid")
    return PhaseGrid(Lx=cfg.Lx, Lv=cfg.Lv, nx=cfg.nx, nv=cfg.nv, data=data / total, t=t)


def gaussian_grid(cfg: GridConfig, mean, cov, t: float = 0.0) -> PhaseGrid:
    """Grid representation of a phase-space Gaussian."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    prec = np.linalg.inv(cov)

    def density(x, v):
        cx = x - mean[0]
        cv = v - mean[1]
        q = prec[0, 0] * cx * cx + 2.0 * prec[0, 1] * cx * cv + prec[1, 1] * cv * cv
        return np.exp(-0.5 * q)

    return grid_from_density(cfg, density, t=t)


def x_marginal(grid: PhaseGrid) -> tuple[Array, Array]:
    """Position marginal as weighted samples (cell centers, cell masses)."""
    weights = grid.data.sum(axis=1) * grid.dx * grid.dv
    return grid.x_centers, weights


def _bernoulli(w: Array) -> Array:
    """B(w) = w / (e^w - 1), series-expanded near 0."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    small = np.abs(w) < 1e-5
    ws = w[small]
    out[small] = 1.0 - 0.5 * ws + ws * ws / 12.0
    wl = w[~small]
    out[~small] = wl / np.expm1(wl)
    return out


def cfl_bound(grid: PhaseGrid, params: ModelParams, force: Optional[Array] = None) -> float:
    """Largest stable dt (before the safety factor) for the current state."""
    if force is None:
        force = mean_field_force(params, grid.x_centers, x_marginal(grid))
    speed = np.abs(force - grid.x_centers).max()
    terms = [grid.dx / grid.Lv, grid.dv * grid.dv / (2.0 * params.gamma)]
    if speed > 0:
        terms.append(grid.dv / speed)
    return min(terms)


def _transport_x(data: Array, v: Array, dx: float, dt: float) -> None:
    vp = np.where(v > 0.0, v, 0.0)[None, :]
    vm = np.where(v < 0.0, v, 0.0)[None, :]
    flux = vp * data[:-1, :] + vm * data[1:, :]
    c = dt / dx
    data[:-1, :] -= c * flux
    data[1:, :] += c * flux


def _advect_v(data: Array, speed: Array, dv: float, dt: float) -> None:
    cp = np.where(speed > 0.0, speed, 0.0)[:, None]
    cm = np.where(speed < 0.0, speed, 0.0)[:, None]
    flux = cp * data[:, :-1] + cm * data[:, 1:]
    c = dt / dv
    data[:, :-1] -= c * flux
    data[:, 1:] += c * flux


def _fokker_planck_v(data: Array, bp: Array, bm: Array, dv: float,
                     gamma: float, dt: float) -> None:
    flux = (gamma / dv) * (bm[None, :] * data[:, 1:] - bp[None, :] * data[:, :-1])
    c = dt / dv
    data[:, :-1] += c * flux
    data[:, 1:] -= c * flux


def vfp_step(grid: PhaseGrid, params: ModelParams, cfg: GridConfig) -> PhaseGrid:
    """Advance the density by one step of the configured splitting.

    Raises a configuration error when dt exceeds the CFL budget for the
    frozen force, and a scheme error if positivity degrades beyond clamping.
    """
    if (grid.nx, grid.nv) != (cfg.nx, cfg.nv) or (grid.Lx, grid.Lv) != (cfg.Lx, cfg.Lv):
        raise ConfigurationError("grid geometry does not match the configuration")
    xc, vc = grid.x_centers, grid.v_centers
    force = mean_field_force(params, xc, x_marginal(grid))
    bound = cfg.cfl_safety * cfl_bound(grid, params, force)
    if cfg.dt > bound * (1.0 + 1e-9):
        raise ConfigurationError(
            f"dt={cfg.dt:g} violates the CFL budget {bound:g} at t={grid.t:g}")

    speed = force - xc
    v_edges = 0.5 * (vc[:-1] + vc[1:])
    w = v_edges * grid.dv
    bp, bm = _bernoulli(w), _bernoulli(-w)

    data = grid.data.copy()
    dt = cfg.dt
    if cfg.splitting == "lie":
        _transport_x(data, vc, grid.dx, dt)
        _advect_v(data, speed, grid.dv, dt)
        _fokker_planck_v(data, bp, bm, grid.dv, params.gamma, dt)
    else:
        _transport_x(data, vc, grid.dx, 0.5 * dt)
        _advect_v(data, speed, grid.dv, 0.5 * dt)
        _fokker_planck_v(data, bp, bm, grid.dv, params.gamma, dt)
        _advect_v(data, speed, grid.dv, 0.5 * dt)
        _transport_x(data, vc, grid.dx, 0.5 * dt)

    lowest = data.min()
    if lowest < -1e-13:
        raise SchemeError(f"negative cell {lowest:g} beyond clamp tolerance at t={grid.t:g}")
    if lowest < 0.0:
        np.clip(data, 0.0, None, out=data)
        total = data.sum() * grid.dx * grid.dv
        if abs(total - 1.0) > 1e-12:
            raise SchemeError(f"clamping changed the mass by {total - 1.0:g}")
        data /= total
    return PhaseGrid(Lx=grid.Lx, Lv=grid.Lv, nx=grid.nx, nv=grid.nv,
                     data=data, t=grid.t + dt)


def run_vfp(grid: PhaseGrid, params: ModelParams, cfg: GridConfig, horizon: float,
            sample_dt: Optional[float] = None) -> list[PhaseGrid]:
    """Step to the horizon, returning snapshots every ``sample_dt`` (default 10 dt)."""
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    n_steps = max(1, round(horizon / cfg.dt))
    every = max(1, round((sample_dt if sample_dt else 10.0 * cfg.dt) / cfg.dt))
    snaps = [grid]
    for k in range(n_steps):
        grid = vfp_step(grid, params, cfg)
        if (k + 1) % every == 0 or k + 1 == n_steps:
            snaps.append(grid)
    return snaps


def stationary_fixed_point(params: ModelParams, cfg: GridConfig, omega: float = 0.5,
                           tol: float = 1e-10, max_iter: int = 10000) -> PhaseGrid:
    """Self-consistent steady state by damped fixed-point iteration.

    Iterates rho <- (1-omega) rho + omega * Normalize(exp(-x^2/2 - lam K*rho))
    on the position marginal, then attaches the Maxwellian velocity profile.
    """
    if not smallness_holds(params):
        warnings.warn("smallness condition violated: the fixed point may not be unique",
                      stacklevel=2)
    if not (0 < omega <= 1):
        raise ConfigurationError("omega must lie in (0, 1]")
    dx = 2.0 * cfg.Lx / cfg.nx
    x = -cfg.Lx + (np.arange(cfg.nx) + 0.5) * dx
    kmat = np.asarray(params.kernel.evaluate(x[:, None] - x[None, :]))
    base = -0.5 * x * x

    rho = np.exp(base)
    rho /= rho.sum() * dx
    residual = math.inf
    for _ in range(int(max_iter)):
        conv = kmat @ rho * dx
        target = np.exp(base - params.lam * conv)
        target /= target.sum() * dx
        new = (1.0 - omega) * rho + omega * target
        residual = float(np.abs(new - rho).sum() * dx)
        rho = new
        if residual < tol:
            break
    else:
        raise NonConvergenceError(
            f"fixed point not reached after {max_iter} iterations (residual {residual:g})",
            residual=residual, iterations=int(max_iter))

    dv = 2.0 * cfg.Lv / cfg.nv
    v = -cfg.Lv + (np.arange(cfg.nv) + 0.5) * dv
    maxwell = np.exp(-0.5 * v * v)
    data = rho[:, None] * maxwell[None, :]
    data /= data.sum() * dx * dv
    return PhaseGrid(Lx=cfg.Lx, Lv=cfg.Lv, nx=cfg.nx, nv=cfg.nv, data=data, t=0.0)


def grid_to_csv(grid: PhaseGrid, path: str) -> None:
    """Write one (x, v, f) row per cell."""
    xc, vc = grid.x_centers, grid.v_centers
    rows = ((float(xc[i]), float(vc[j]), float(grid.data[i, j]))
            for i in range(grid.nx) for j in range(grid.nv))
    write_csv(path, ["x", "v", "f"], rows)


def grid_to_binary(grid: PhaseGrid, prefix: str) -> None:
    """Write raw row-major float64 data plus a JSON header describing it."""
    write_json(prefix + ".json", {
        "Lx": grid.Lx, "Lv": grid.Lv, "nx": grid.nx, "nv": grid.nv,
        "t": grid.t, "dtype": "float64", "order": "C",
    })
    with open(prefix + ".bin", "wb") as fh:
        fh.write(np.ascontiguousarray(grid.data).tobytes())
