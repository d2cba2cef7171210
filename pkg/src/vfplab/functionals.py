"""Entropies, free energies, twisted Fisher information, and Wasserstein distances.

All grid quadratures are midpoint sums over cells; logarithms mask cells with
density below 1e-14 so tails cannot poison the integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import ConfigurationError
from .model import ModelParams
from .pde import PhaseGrid, x_marginal

Array = np.ndarray

MASK = 1e-14
MAX_ASSIGNMENT = 4096

__all__ = [
    "MASK",
    "entropy",
    "classical_free_energy",
    "quadratic_free_energy",
    "LocalEquilibrium",
    "local_equilibrium",
    "fisher_information",
    "relative_entropy",
    "l1_distance",
    "w2_empirical",
    "sample_from_grid",
    "w2_grid",
]


def entropy(grid: PhaseGrid) -> float:
    """int f ln f over the grid (negative differential entropy)."""
    f = grid.data
    m = f >= MASK
    return float(np.sum(f[m] * np.log(f[m])) * grid.cell_area())


def _interaction_energy(grid: PhaseGrid, params: ModelParams) -> float:
    """(lam/2) * double integral of K(x - y) against the position marginal.

    The 1/2 makes the total functional non-increasing along the flow for even
    kernels; the double integral only sees the even part of K either way.
    """
    xc, w = x_marginal(grid)
    kmat = np.asarray(params.kernel.evaluate(xc[:, None] - xc[None, :]))
    return 0.5 * params.lam * float(w @ kmat @ w)


def classical_free_energy(grid: PhaseGrid, params: ModelParams) -> float:
    """Entropy + quadratic confinement energy + interaction energy."""
    xc, vc = grid.x_centers, grid.v_centers
    quad = 0.5 * (xc[:, None] ** 2 + vc[None, :] ** 2)
    conf = float(np.sum(quad * grid.data) * grid.cell_area())
    return entropy(grid) + conf + _interaction_energy(grid, params)


def quadratic_free_energy(grid: PhaseGrid, params: ModelParams) -> float:
    """Mean-field free energy of a grid state for the quadratic kernel.

    entropy + int((v^2+x^2)/2 + lam*b*x) f + lam*a*var_x, the grid analogue of
    the Gaussian closed form; decays along the flow for any a, b.
    """
    if params.kernel.kind != "quadratic_linear":
        raise ConfigurationError(
            f"quadratic free energy needs the quadratic_linear kernel, got {params.kernel.name}")
    a, b = params.kernel.coeffs
    xc, vc = grid.x_centers, grid.v_centers
    quad = 0.5 * (xc[:, None] ** 2 + vc[None, :] ** 2)
    conf = float(np.sum(quad * grid.data) * grid.cell_area())
    _, w = x_marginal(grid)
    m_x = float(xc @ w)
    var_x = float((xc - m_x) ** 2 @ w)
    return entropy(grid) + conf + params.lam * (b * m_x + a * var_x)


@dataclass(frozen=True)
class LocalEquilibrium:
    """Self-consistent local Gibbs state exp(-x^2/2 - lam K*f - v^2/2)/Z."""

    data: Array
    log_data: Array
    Z: float


def local_equilibrium(grid: PhaseGrid, params: ModelParams) -> LocalEquilibrium:
    """Local equilibrium attached to the current density; factorizes in (x, v)."""
    xc, vc = grid.x_centers, grid.v_centers
    _, w = x_marginal(grid)
    conv = np.asarray(params.kernel.evaluate(xc[:, None] - xc[None, :])) @ w
    log_unnorm = (-0.5 * xc * xc - params.lam * conv)[:, None] - 0.5 * (vc * vc)[None, :]
    z = float(np.exp(log_unnorm).sum() * grid.cell_area())
    return LocalEquilibrium(data=np.exp(log_unnorm) / z,
                            log_data=log_unnorm - math.log(z), Z=z)


def fisher_information(grid: PhaseGrid, params: ModelParams, A: Array) -> float:
    """int |A grad ln(f / f_hat)|^2 f with centered differences on interior cells.

    Cells participate only when they and their four neighbours carry density
    above the mask, so the log-ratio gradient is always well defined.
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError("A must be a 2x2 matrix")
    f = grid.data
    hat = local_equilibrium(grid, params)
    valid = f >= MASK
    r = np.zeros_like(f)
    r[valid] = np.log(f[valid]) - hat.log_data[valid]

    ok = (valid[1:-1, 1:-1] & valid[2:, 1:-1] & valid[:-2, 1:-1]
          & valid[1:-1, 2:] & valid[1:-1, :-2])
    gx = (r[2:, 1:-1] - r[:-2, 1:-1]) / (2.0 * grid.dx)
    gv = (r[1:-1, 2:] - r[1:-1, :-2]) / (2.0 * grid.dv)
    g1 = A[0, 0] * gx + A[0, 1] * gv
    g2 = A[1, 0] * gx + A[1, 1] * gv
    weight = np.where(ok, f[1:-1, 1:-1], 0.0)
    return float(np.sum((g1 * g1 + g2 * g2) * weight) * grid.cell_area())


def relative_entropy(grid_f: PhaseGrid, grid_g: PhaseGrid) -> float:
    """int f ln(f/g); requires g to be strictly positive on the masked support of f.

    Cells with f below the mask are dropped; g merely small there is fine,
    but g underflowing to zero where f has mass is a genuine support violation.
    """
    if grid_f.data.shape != grid_g.data.shape:
        raise ValueError("grids must share a common shape")
    f, g = grid_f.data, grid_g.data
    m = f >= MASK
    if np.any(g[m] <= 0.0):
        raise ValueError("support violation: g vanishes where f has mass")
    return float(np.sum(f[m] * (np.log(f[m]) - np.log(g[m]))) * grid_f.cell_area())


def l1_distance(grid_f: PhaseGrid, grid_g: PhaseGrid) -> float:
    """L1 distance between two grid densities on the same geometry."""
    if grid_f.data.shape != grid_g.data.shape:
        raise ValueError("grids must share a common shape")
    return float(np.abs(grid_f.data - grid_g.data).sum() * grid_f.cell_area())


def w2_empirical(cloud_a: Array, cloud_b: Array) -> float:
    """Quadratic Wasserstein distance between equal-size point clouds.

    Solves the exact assignment problem on the squared-distance matrix;
    capped at 4096 points to keep the dense cost matrix at desk scale.
    """
    a = np.asarray(cloud_a, dtype=float)
    b = np.asarray(cloud_b, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2 or a.shape != b.shape:
        raise ValueError("clouds must be (n, 2) arrays of equal shape")
    n = a.shape[0]
    if n == 0 or n > MAX_ASSIGNMENT:
        raise ValueError(f"cloud size must lie in [1, {MAX_ASSIGNMENT}], got {n}")
    cost = cdist(a, b, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return math.sqrt(max(float(cost[rows, cols].mean()), 0.0))


def sample_from_grid(grid: PhaseGrid, n: int, seed: int) -> Array:
    """Inverse-CDF samples from the cell masses with uniform within-cell jitter."""
    rng = np.random.default_rng(seed)
    p = grid.data.reshape(-1) * grid.cell_area()
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    flat = np.searchsorted(cdf, rng.random(n), side="right")
    i, j = np.unravel_index(np.minimum(flat, grid.nx * grid.nv - 1), (grid.nx, grid.nv))
    x = grid.x_centers[i] + (rng.random(n) - 0.5) * grid.dx
    v = grid.v_centers[j] + (rng.random(n) - 0.5) * grid.dv
    return np.column_stack([x, v])


def w2_grid(grid_f: PhaseGrid, grid_g: PhaseGrid, n: int = 2048, seed: int = 0) -> float:
    """Wasserstein distance between grid densities via matched sample clouds.

    Monte Carlo accurate to about n^{-1/4}; seeded, hence reproducible.
    """
    return w2_empirical(sample_from_grid(grid_f, n, seed),
                        sample_from_grid(grid_g, n, seed + 1))
