"""Closed-form Gaussian oracles for the quadratic-kernel model.

With K(x) = a x^2 + b x the flow maps Gaussians to Gaussians, the stationary
law is explicit, and the N-particle equilibrium is an explicit Gaussian Gibbs
measure.  This module carries those formulas so grid and particle runs can be
checked against exact references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigurationError, UnconfinedError
from .model import ModelParams

Array = np.ndarray

LOG_2PI = math.log(2.0 * math.pi)

__all__ = [
    "GaussianState",
    "GibbsN",
    "moment_flow",
    "stationary_gaussian",
    "bures_w2",
    "gaussian_kl",
    "free_energy_quadratic",
    "gibbs_measure_N",
    "free_energy_particle_limit",
]


@dataclass(frozen=True)
class GaussianState:
    """Mean (m_x, m_v) and 2x2 covariance of a phase-space Gaussian."""

    mean: Array
    cov: Array

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "cov", np.asarray(self.cov, dtype=float))
        if self.mean.shape != (2,) or self.cov.shape != (2, 2):
            raise ValueError("mean must have shape (2,), cov shape (2, 2)")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(self.cov).min() <= 0.0:
            raise ValueError("covariance must be positive definite")


@dataclass(frozen=True)
class GibbsN:
    """N-particle Gaussian equilibrium: mean and (2N x 2N) precision.

    Coordinates are ordered (x_1..x_N, v_1..v_N); the velocity block of the
    precision is the identity and positions decouple from velocities.
    """

    n: int
    mean: Array
    precision: Array


def _quadratic_coeffs(params: ModelParams) -> tuple[float, float]:
    """Effective (a, b) with the interaction intensity folded in exactly."""
    if params.kernel.kind != "quadratic_linear":
        raise ConfigurationError(
            "closed-form Gaussian formulas need the quadratic_linear (or zero) kernel, "
            f"got {params.kernel.name}")
    a, b = params.kernel.coeffs
    return params.lam * a, params.lam * b


def _confinement(params: ModelParams) -> float:
    """Effective position stiffness 1 + 2*lam*a; must stay positive."""
    a_eff, _ = _quadratic_coeffs(params)
    k = 1.0 + 2.0 * a_eff
    if k <= 0.0:
        raise UnconfinedError(f"1 + 2*lam*a = {k:g} <= 0: no confined Gaussian state")
    return k


def moment_flow(state: GaussianState, params: ModelParams,
                times: Array) -> list[GaussianState]:
    """Exact mean/covariance flow of the quadratic-kernel dynamics.

    m_x' = m_v,  m_v' = -m_x - lam*b - gamma*m_v, and the covariance solves
    S' = B S + S B^T + diag(0, 2 gamma) with B = [[0, 1], [-(1+2 lam a), -gamma]].
    Integrated with a high-order adaptive scheme (local error below 1e-10).
    """
    a_eff, b_eff = _quadratic_coeffs(params)
    k = _confinement(params)
    gamma = params.gamma
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ConfigurationError("times must be a nondecreasing 1-d array of nonnegative floats")

    B = np.array([[0.0, 1.0], [-k, -gamma]])

    def rhs(_t, y):
        m_x, m_v, s_xx, s_xv, s_vv = y
        return [
            m_v,
            -m_x - b_eff - gamma * m_v,
            2.0 * s_xv,
            s_vv - k * s_xx - gamma * s_xv,
            -2.0 * k * s_xv - 2.0 * gamma * s_vv + 2.0 * gamma,
        ]

    y0 = [state.mean[0], state.mean[1], state.cov[0, 0], state.cov[0, 1], state.cov[1, 1]]
    t_end = float(times[-1]) if times[-1] > 0 else 1e-12
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853",
                    t_eval=np.maximum(times, 0.0), rtol=1e-11, atol=1e-13)
    if not sol.success:
        raise RuntimeError(f"moment flow integration failed: {sol.message}")
    out = []
    for m_x, m_v, s_xx, s_xv, s_vv in sol.y.T:
        out.append(GaussianState(mean=[m_x, m_v], cov=[[s_xx, s_xv], [s_xv, s_vv]]))
    return out


def stationary_gaussian(params: ModelParams) -> GaussianState:
    """Fixed point of the moment flow: mean (-lam*b, 0), cov diag(1/(1+2 lam a), 1)."""
    k = _confinement(params)
    _, b_eff = _quadratic_coeffs(params)
    return GaussianState(mean=[-b_eff, 0.0], cov=[[1.0 / k, 0.0], [0.0, 1.0]])


def _sqrtm_psd(S: Array) -> Array:
    evals, evecs = np.linalg.eigh(S)
    return (evecs * np.sqrt(np.maximum(evals, 0.0))) @ evecs.T


def bures_w2(g1: GaussianState, g2: GaussianState) -> float:
    """Quadratic Wasserstein distance between Gaussians (Bures formula)."""
    dm = g1.mean - g2.mean
    r2 = _sqrtm_psd(g2.cov)
    cross = _sqrtm_psd(r2 @ g1.cov @ r2)
    val = float(dm @ dm + np.trace(g1.cov + g2.cov - 2.0 * cross))
    return math.sqrt(max(val, 0.0))


def gaussian_kl(mean1: Array, cov1: Array, mean0: Array, cov0: Array) -> float:
    """Relative entropy KL(N(mean1, cov1) || N(mean0, cov0)) in any dimension."""
    mean1 = np.asarray(mean1, dtype=float)
    mean0 = np.asarray(mean0, dtype=float)
    d = mean1.size
    prec0 = np.linalg.inv(cov0)
    dm = mean1 - mean0
    _, ld0 = np.linalg.slogdet(cov0)
    _, ld1 = np.linalg.slogdet(cov1)
    return 0.5 * (np.trace(prec0 @ cov1) - d + dm @ prec0 @ dm + ld0 - ld1)


def free_energy_quadratic(g: GaussianState, params: ModelParams) -> float:
    """Mean-field free energy of a Gaussian state, quadratic kernel, C = 0 convention.

    entropy + E[(v^2 + x^2)/2 + lam*b*x] + lam*a*var_x.  The interaction term
    carries the 1/2 in front of the double integral that makes the functional
    non-increasing along the flow and the N-particle limit exact.
    """
    a_eff, b_eff = _quadratic_coeffs(params)
    m_x, m_v = g.mean
    s_xx, s_vv = g.cov[0, 0], g.cov[1, 1]
    _, logdet = np.linalg.slogdet(g.cov)
    neg_entropy = -(1.0 + LOG_2PI) - 0.5 * logdet
    second_moment = 0.5 * (m_x * m_x + s_xx + m_v * m_v + s_vv)
    return float(neg_entropy + second_moment + b_eff * m_x + a_eff * s_xx)


def gibbs_measure_N(params: ModelParams, n: int) -> GibbsN:
    """Explicit N-particle Gaussian equilibrium of the quadratic-kernel system.

    Position precision I + (2 lam a/(N-1)) (N I - ones ones^T), position mean
    -lam*b * ones (the precision fixes the all-ones vector), velocity block
    standard normal.
    """
    if n < 2:
        raise ConfigurationError("the particle equilibrium needs N >= 2")
    a_eff, b_eff = _quadratic_coeffs(params)
    bulk = 1.0 + 2.0 * a_eff * n / (n - 1)   # eigenvalue on the mean-zero sector
    if bulk <= 0.0:
        raise UnconfinedError(
            f"position precision eigenvalue 1 + 2*lam*a*N/(N-1) = {bulk:g} <= 0")
    c = 2.0 * a_eff / (n - 1)
    pos = (1.0 + c * n) * np.eye(n) - c * np.ones((n, n))
    precision = np.zeros((2 * n, 2 * n))
    precision[:n, :n] = pos
    precision[n:, n:] = np.eye(n)
    mean = np.concatenate([-b_eff * np.ones(n), np.zeros(n)])
    return GibbsN(n=n, mean=mean, precision=precision)


def free_energy_particle_limit(g: GaussianState, params: ModelParams, n: int) -> float:
    """(1/N) KL(g^{tensor N} || N-particle equilibrium), by the Gaussian KL formula."""
    gibbs = gibbs_measure_N(params, n)
    prec = gibbs.precision
    s_xx, s_xv, s_vv = g.cov[0, 0], g.cov[0, 1], g.cov[1, 1]

    cov1 = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    cov1[idx, idx] = s_xx
    cov1[n + idx, n + idx] = s_vv
    cov1[idx, n + idx] = s_xv
    cov1[n + idx, idx] = s_xv

    mean1 = np.concatenate([np.full(n, g.mean[0]), np.full(n, g.mean[1])])
    dm = mean1 - gibbs.mean

    trace = float(np.sum(prec * cov1))            # tr(prec @ cov1), both symmetric
    quad = float(dm @ (prec @ dm))
    _, logdet_prec = np.linalg.slogdet(prec)
    _, logdet_covg = np.linalg.slogdet(g.cov)
    logdet_cov1 = n * logdet_covg                 # product law is block diagonal per particle
    kl = 0.5 * (trace - 2 * n + quad - logdet_prec - logdet_cov1)
    return kl / n
