"""Acceptance gate: nine end-to-end checks of the package's quantitative claims.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all)
and pins every tolerance explicitly.  The checks cover the contraction
geometry, the certified force-Jacobian bound, pathwise coupling decay at the
smallness boundary, agreement with the Gaussian moment oracle, the free-energy
dichotomy (quadratic Lyapunov function decays, the classical one can rise),
twisted Fisher-information envelopes, the per-particle free-energy limit, the
empirical transport metric, and solver hygiene under mesh refinement.
"""

import math
import time
import warnings

import numpy as np

from vfplab import (GaussianState, GridConfig, ModelParams, SimConfig,
                    builtin_kernel, bures_w2, contraction_experiment,
                    coupling_constants, fisher_information,
                    force_jacobian_norm_bound_check, free_energy_particle_limit,
                    free_energy_quadratic, gaussian_grid, gaussian_kl,
                    l1_distance, moment_flow, norm_equivalence_ratio,
                    quadratic_free_energy, run_vfp, simulate,
                    smallness_threshold, stationary_fixed_point,
                    stationary_gaussian, vfp_step, w2_empirical)
from vfplab.cli import _lyapunov_witness
from vfplab.particles import ParticleState

IDENTITY = np.eye(2)


def verdict(number: int, name: str, ok: bool, detail: str):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {number} ({name}): {status} - {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def sine_params(gamma: float, lam: float) -> ModelParams:
    return ModelParams(gamma=gamma, lam=lam,
                       kernel=builtin_kernel({"type": "sine", "amplitude": 1.0}))


def quad_params(lam: float, a: float, b: float, gamma: float = 1.0) -> ModelParams:
    return ModelParams(gamma=gamma, lam=lam,
                       kernel=builtin_kernel({"type": "quadratic_linear", "a": a, "b": b}))


def grid_first_moments(snap) -> tuple[float, float]:
    w = snap.data * snap.cell_area()
    return float(snap.x_centers @ w.sum(axis=1)), float(snap.v_centers @ w.sum(axis=0))


def test_criterion_1_coupling_constant_identities():
    t0 = time.perf_counter()
    worst_det = worst_ratio = 0.0
    b_in_range = True
    for gamma in np.logspace(math.log10(1 / 16), math.log10(16), 33):
        c = coupling_constants(gamma)
        b_in_range &= 0.5 - 1e-12 <= c.b <= 1.25 + 1e-12
        worst_det = max(worst_det, abs(np.linalg.det(c.M) - c.b))
        worst_ratio = max(worst_ratio, abs(norm_equivalence_ratio(c) - 4.0))
    elapsed = time.perf_counter() - t0
    ok = b_in_range and worst_det < 1e-12 and worst_ratio < 1e-12 and elapsed < 1.0
    verdict(1, "coupling constant identities", ok,
            f"b in [1/2, 5/4]: {b_in_range}, max |det M - b| = {worst_det:.2e}, "
            f"max |ratio - 4| = {worst_ratio:.2e}, {elapsed:.2f}s")


def test_criterion_2_force_jacobian_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20)
    worst_excess = -math.inf
    for _ in range(200):
        amplitude = rng.uniform(0.25, 2.0)
        params = ModelParams(gamma=1.0, lam=1.0,
                             kernel=builtin_kernel({"type": "sine", "amplitude": amplitude}))
        x = rng.normal(scale=3.0, size=8)
        u = rng.normal(size=8)
        u /= np.linalg.norm(u)
        observed, bound = force_jacobian_norm_bound_check(params, x, u)
        worst_excess = max(worst_excess, observed - bound)
    elapsed = time.perf_counter() - t0
    ok = worst_excess <= 1e-6 and elapsed < 5.0
    verdict(2, "force Jacobian bound", ok,
            f"max(|dF u| - 2 sup|K''|) = {worst_excess:.2e} over 200 configs, {elapsed:.2f}s")


def test_criterion_3_pathwise_contraction_at_the_boundary():
    dt = 1e-3
    tol = 1.0 + 10.0 * dt
    details = []
    ok = True
    for gamma in (0.5, 1.0, 2.0):
        params = sine_params(gamma, smallness_threshold(gamma))
        report = contraction_experiment(params, SimConfig(dt=dt, seed=5), 64,
                                        horizon=20.0, replicas=16, sample_dt=0.25)
        ok &= (report.smallness and report.envelope_ok
               and report.worst_ratio_modified <= tol
               and report.worst_ratio_euclid <= tol)
        details.append(f"gamma={gamma:g}: mod {report.worst_ratio_modified:.3f}, "
                       f"euclid {report.worst_ratio_euclid:.3f}")
    verdict(3, "pathwise contraction", ok,
            f"worst envelope ratios (tol {tol:.3f}): " + "; ".join(details))


def test_criterion_4_gaussian_oracle_agreement():
    params = quad_params(lam=1.0, a=0.5, b=1.0)
    g0 = GaussianState(mean=[1.0, 0.0], cov=IDENTITY)

    gcfg = GridConfig(Lx=8.0, Lv=8.0, nx=256, nv=256, dt=5e-4, splitting="strang")
    snaps = run_vfp(gaussian_grid(gcfg, g0.mean, g0.cov), params, gcfg, 2.0,
                    sample_dt=0.25)
    times = np.array([s.t for s in snaps])
    oracle = moment_flow(g0, params, times)
    pde_err = max(max(abs(mx - ref.mean[0]), abs(mv - ref.mean[1]))
                  for snap, ref in zip(snaps, oracle)
                  for mx, mv in [grid_first_moments(snap)])

    n = 10_000
    sim = SimConfig(dt=1e-3, seed=1)
    rng = np.random.default_rng([sim.seed, 424242])
    xv = np.asarray(g0.mean)[:, None] + np.linalg.cholesky(g0.cov) @ rng.standard_normal((2, n))
    traj = simulate(ParticleState(x=xv[0], v=xv[1]), params, sim, 2000, record_every=250)
    oracle_p = moment_flow(g0, params, np.array([s.t for s in traj]))
    particle_err = max(max(abs(s.x.mean() - ref.mean[0]), abs(s.v.mean() - ref.mean[1]))
                       for s, ref in zip(traj, oracle_p))

    ok = pde_err <= 1e-3 and particle_err <= 3.0 / math.sqrt(n)
    verdict(4, "gaussian oracle agreement", ok,
            f"PDE first-moment error {pde_err:.2e} (tol 1e-3), "
            f"particle mean error {particle_err:.3f} (tol {3.0 / math.sqrt(n):.3f})")


def test_criterion_5_free_energy_dichotomy():
    # quadratic free energy decays step by step even though K is not even
    params = quad_params(lam=1 / 16, a=1.0, b=1.0)
    gcfg = GridConfig(Lx=6.0, Lv=6.0, nx=256, nv=256, dt=2.5e-4, splitting="strang")
    grid = gaussian_grid(gcfg, [1.0, 0.0], IDENTITY)
    f_prev = quadratic_free_energy(grid, params)
    max_increase = -math.inf
    for _ in range(round(3.0 / gcfg.dt)):
        grid = vfp_step(grid, params, gcfg)
        f_val = quadratic_free_energy(grid, params)
        max_increase = max(max_increase, f_val - f_prev)
        f_prev = f_val

    # while a search over Gaussian starts finds the classical one increasing
    params_w = quad_params(lam=1.0, a=1.0, b=1.0)
    wcfg = GridConfig(Lx=6.0, Lv=6.0, nx=96, nv=96, dt=1e-3, splitting="strang")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        baseline = stationary_fixed_point(params_w, wcfg)
    witness = _lyapunov_witness(params_w, wcfg, baseline)

    ok = max_increase <= 1e-6 and witness is not None and witness["dEdt_estimate"] > 0.0
    slope = "none found" if witness is None else f"{witness['dEdt_estimate']:.3f}"
    verdict(5, "free energy dichotomy", ok,
            f"max per-step F increase {max_increase:.2e} (tol 1e-6), "
            f"classical dE/dt witness slope {slope}")


def test_criterion_6_fisher_information_envelopes():
    gcfg = GridConfig(Lx=8.0, Lv=8.0, nx=128, nv=128, dt=2e-3, splitting="strang")
    details = []
    ok = True
    for label, params in (("K=0", ModelParams(gamma=1.0, lam=0.0, kernel=builtin_kernel("zero"))),
                          ("sine", sine_params(1.0, 0.125))):
        c = coupling_constants(params.gamma)
        rate_a = c.contraction_rate
        rate_i = min(params.gamma, 1.0 / params.gamma) / 8.0
        snaps = run_vfp(gaussian_grid(gcfg, [1.0, 0.0], IDENTITY), params, gcfg,
                        10.0, sample_dt=0.5)
        ia0 = fisher_information(snaps[0], params, c.A)
        ii0 = fisher_information(snaps[0], params, IDENTITY)
        worst_a = max(fisher_information(s, params, c.A)
                      / (ia0 * math.exp(-rate_a * s.t)) for s in snaps)
        worst_i = max(fisher_information(s, params, IDENTITY)
                      / (4.0 * ii0 * math.exp(-rate_i * s.t)) for s in snaps)
        ok &= worst_a <= 1.1 and worst_i <= 1.1
        details.append(f"{label}: I_A ratio {worst_a:.3f}, I ratio {worst_i:.3f}")
    verdict(6, "fisher information envelopes", ok,
            "worst envelope ratios (tol 1.1): " + "; ".join(details))


def test_criterion_7_free_energy_particle_limit():
    params = quad_params(lam=0.5, a=1.0, b=1.0)
    g1 = GaussianState(mean=[1.0, 0.0], cov=IDENTITY)
    g2 = GaussianState(mean=[-0.5, 0.5], cov=[[1.5, 0.2], [0.2, 0.8]])
    limit_diff = free_energy_quadratic(g1, params) - free_energy_quadratic(g2, params)
    max_gap = 0.0
    gaps_ok = True
    for n in (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024):
        gap = abs(free_energy_particle_limit(g1, params, n)
                  - free_energy_particle_limit(g2, params, n) - limit_diff)
        max_gap = max(max_gap, gap)
        gaps_ok &= gap <= max(1e-9, 1.0 / n)

    params0 = quad_params(lam=0.5, a=0.0, b=1.0)
    mu1 = stationary_gaussian(params0)
    nu = GaussianState(mean=[0.5, -0.3], cov=[[1.2, 0.1], [0.1, 0.9]])
    single = gaussian_kl(nu.mean, nu.cov, mu1.mean, mu1.cov)
    id_err = max(abs(free_energy_particle_limit(nu, params0, n) - single)
                 for n in (2, 17, 128, 1024))

    ok = gaps_ok and id_err < 1e-12
    verdict(7, "free energy particle limit", ok,
            f"max gap to the mean-field difference {max_gap:.2e} (O(1/N) budget), "
            f"a=0 identity error {id_err:.2e} (tol 1e-12)")


def test_criterion_8_transport_metric_sanity():
    n = 2048
    g1 = GaussianState(mean=[0.0, 0.0], cov=IDENTITY)
    g2 = GaussianState(mean=[1.5, -0.5], cov=[[2.0, 0.3], [0.3, 0.7]])
    rng = np.random.default_rng(8)
    cloud1 = np.asarray(g1.mean) + rng.standard_normal((n, 2)) @ np.linalg.cholesky(g1.cov).T
    cloud2 = np.asarray(g2.mean) + rng.standard_normal((n, 2)) @ np.linalg.cholesky(g2.cov).T
    gap = abs(w2_empirical(cloud1, cloud2) - bures_w2(g1, g2))

    shift = cloud1 + np.array([2.0, 0.0])
    translation_err = abs(w2_empirical(cloud1, shift) - 2.0)
    identity_err = w2_empirical(cloud1, cloud1)

    tol = 5.0 * n ** -0.25
    ok = gap <= tol and translation_err < 1e-12 and identity_err < 1e-12
    verdict(8, "transport metric sanity", ok,
            f"|empirical - closed form| = {gap:.3f} (tol {tol:.3f}), "
            f"translation err {translation_err:.1e}, identity err {identity_err:.1e}")


def test_criterion_9_solver_hygiene():
    params = sine_params(1.0, 0.125)
    gcfg = GridConfig(Lx=8.0, Lv=8.0, nx=128, nv=128, dt=1e-3, splitting="strang")
    grid = gaussian_grid(gcfg, [1.0, 0.0], IDENTITY)
    max_drift = 0.0
    min_value = math.inf
    mass_prev = grid.mass()
    for _ in range(200):
        grid = vfp_step(grid, params, gcfg)
        mass = grid.mass()
        max_drift = max(max_drift, abs(mass - mass_prev))
        min_value = min(min_value, float(grid.data.min()))
        mass_prev = mass

    drift = {}
    for nx, dt in ((64, 4e-3), (128, 2e-3)):
        cfg = GridConfig(Lx=8.0, Lv=8.0, nx=nx, nv=nx, dt=dt, splitting="strang")
        fstar = stationary_fixed_point(params, cfg)
        snaps = run_vfp(fstar, params, cfg, 1.0, sample_dt=0.5)
        drift[nx] = max(l1_distance(s, fstar) for s in snaps)
    ratio = drift[64] / drift[128]

    ok = max_drift <= 1e-12 and min_value >= 0.0 and ratio >= 1.8
    verdict(9, "solver hygiene", ok,
            f"mass drift {max_drift:.1e}/step (tol 1e-12), min value {min_value:.1e}, "
            f"refinement ratio {ratio:.2f} (need >= 1.8)")
