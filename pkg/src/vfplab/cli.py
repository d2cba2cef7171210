"""Command-line experiments: contraction, lyapunov, fisher, stationary, oracle, simulate.

Every subcommand reads a JSON config, validates it fully before computing,
and writes CSV/JSON artifacts under an output prefix.  Runs with identical
config and seed produce byte-identical files.

Exit codes: 0 success, 1 configuration error, 2 numerical divergence,
3 envelope violation inside the guaranteed regime.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DivergenceError, VfpError
from .functionals import (classical_free_energy, entropy, fisher_information,
                          quadratic_free_energy, w2_grid)
from .gaussian import GaussianState, bures_w2, free_energy_particle_limit, \
    free_energy_quadratic, gibbs_measure_N, moment_flow, stationary_gaussian
from .model import ModelParams, builtin_kernel, coupling_constants, smallness_holds
from .output import write_csv, write_json
from .particles import ParticleState, SimConfig, contraction_experiment, simulate
from .pde import GridConfig, PhaseGrid, cfl_bound, gaussian_grid, grid_to_binary, \
    grid_to_csv, run_vfp, stationary_fixed_point, vfp_step
from .pde import x_marginal

FISHER_SLACK = 1.1

__all__ = ["main"]


# ---------------------------------------------------------------- config ----

def _require_keys(section: dict, name: str, required: set[str], optional: set[str] = frozenset()):
    if not isinstance(section, dict):
        raise ConfigurationError(f"config section {name!r} must be an object")
    missing = required - set(section)
    unknown = set(section) - required - optional
    if missing:
        raise ConfigurationError(f"config section {name!r} is missing keys {sorted(missing)}")
    if unknown:
        raise ConfigurationError(f"config section {name!r} has unknown keys {sorted(unknown)}")


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("top-level config must be a JSON object")
    return cfg


def parse_model(cfg: dict) -> ModelParams:
    section = cfg.get("model")
    if section is None:
        raise ConfigurationError("config needs a 'model' section")
    _require_keys(section, "model", {"gamma", "lambda", "kernel"})
    return ModelParams(gamma=float(section["gamma"]), lam=float(section["lambda"]),
                       kernel=builtin_kernel(section["kernel"]))


def parse_sim(cfg: dict, seed_override: Optional[int]) -> tuple[SimConfig, int]:
    section = dict(cfg.get("sim", {}))
    _require_keys(section, "sim", set(), {"dt", "integrator", "seed", "n_particles"})
    seed = seed_override if seed_override is not None else int(section.get("seed", 0))
    sim = SimConfig(dt=float(section.get("dt", 1e-3)),
                    integrator=section.get("integrator", "kinetic_splitting"),
                    seed=seed)
    n = int(section.get("n_particles", 64))
    if n < 2:
        raise ConfigurationError(f"n_particles must be >= 2, got {n}")
    return sim, n


def parse_grid(cfg: dict) -> tuple[dict, Optional[float]]:
    """Grid geometry plus the requested dt (None means choose from the CFL budget)."""
    section = dict(cfg.get("grid", {}))
    _require_keys(section, "grid", set(),
                  {"Lx", "Lv", "nx", "nv", "dt", "cfl_safety", "splitting"})
    geometry = {
        "Lx": float(section.get("Lx", 8.0)), "Lv": float(section.get("Lv", 8.0)),
        "nx": int(section.get("nx", 128)), "nv": int(section.get("nv", 128)),
        "cfl_safety": float(section.get("cfl_safety", 0.5)),
        "splitting": section.get("splitting", "strang"),
    }
    dt = section.get("dt", "auto")
    if dt == "auto":
        return geometry, None
    return geometry, float(dt)


def _grid_config(geometry: dict, dt: Optional[float], params: ModelParams,
                 initial: PhaseGrid) -> GridConfig:
    if dt is None:
        dt = 0.9 * geometry["cfl_safety"] * cfl_bound(initial, params)
    return GridConfig(dt=dt, **geometry)


def parse_initial(section, default_mean=(1.0, 0.0)) -> GaussianState:
    if section is None:
        return GaussianState(mean=list(default_mean), cov=[[1.0, 0.0], [0.0, 1.0]])
    _require_keys(section, "initial", set(), {"mean", "cov"})
    mean = section.get("mean", list(default_mean))
    cov = section.get("cov", [[1.0, 0.0], [0.0, 1.0]])
    try:
        return GaussianState(mean=mean, cov=cov)
    except ValueError as exc:
        raise ConfigurationError(f"invalid initial Gaussian: {exc}") from exc


def _experiment(cfg: dict, allowed: set[str]) -> dict:
    section = dict(cfg.get("experiment", {}))
    _require_keys(section, "experiment", set(), allowed)
    return section


def _out_prefix(cfg: dict, args) -> str:
    prefix = args.out if args.out else cfg.get("output")
    if not prefix or not isinstance(prefix, str):
        raise ConfigurationError("an output prefix is required (--out or config 'output')")
    return prefix


# ----------------------------------------------------------- subcommands ----

def cmd_contraction(args) -> int:
    cfg = load_config(args.config)
    params = parse_model(cfg)
    sim, n = parse_sim(cfg, args.seed)
    exp = _experiment(cfg, {"horizon", "replicas", "sample_dt"})
    report = contraction_experiment(
        params, sim, n, horizon=float(exp.get("horizon", 20.0)),
        replicas=int(exp.get("replicas", 4)), sample_dt=exp.get("sample_dt"))
    prefix = _out_prefix(cfg, args)
    write_json(prefix + "_contraction.json", report.to_dict())
    rows = []
    for r in range(report.replicas):
        m0, e0 = report.modified_norm_sq[r, 0], report.euclid_sq[r, 0]
        for s, t in enumerate(report.times):
            decay = math.exp(-report.rate * t)
            rows.append((r, float(t), float(report.modified_norm_sq[r, s]),
                         float(report.euclid_sq[r, s]), float(m0 * decay),
                         float(4.0 * e0 * decay)))
    write_csv(prefix + "_contraction.csv",
              ["replica", "t", "modified_norm_sq", "euclid_sq",
               "envelope_modified", "envelope_euclid"], rows)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if report.smallness and not report.envelope_ok:
        return 3
    return 0


def _probe_slope(grid: PhaseGrid, params: ModelParams, gcfg: GridConfig,
                 n_probe_steps: int) -> float:
    e0 = classical_free_energy(grid, params)
    for _ in range(n_probe_steps):
        grid = vfp_step(grid, params, gcfg)
    return (classical_free_energy(grid, params) - e0) / (n_probe_steps * gcfg.dt)


def _lyapunov_witness(params: ModelParams, gcfg: GridConfig, baseline: PhaseGrid,
                      n_probe_steps: int = 5):
    """Scan Gaussian initial states for an initially increasing classical free energy.

    The probe slope at the stationary state is pure discretization bias (the
    true slope there is zero), so it calibrates the detection threshold: a
    candidate counts only when it clears twice that bias.
    """
    bias = _probe_slope(baseline, params, gcfg, n_probe_steps)
    threshold = max(1e-4, 2.0 * abs(bias))
    candidates = [(m_x, m_v) for m_v in (-0.5, 0.5, -1.0, 1.0, -0.25, 0.25)
                  for m_x in (0.0, 1.0, -1.0)]
    for m_x, m_v in candidates:
        grid = gaussian_grid(gcfg, [m_x, m_v], [[1.0, 0.0], [0.0, 1.0]])
        slope = _probe_slope(grid, params, gcfg, n_probe_steps)
        if slope - bias > threshold:
            return {"mean": [m_x, m_v], "cov": [[1.0, 0.0], [0.0, 1.0]],
                    "dEdt_estimate": slope, "probe_bias": bias}
    return None


def cmd_lyapunov(args) -> int:
    cfg = load_config(args.config)
    params = parse_model(cfg)
    sim, _ = parse_sim(cfg, args.seed)
    geometry, dt = parse_grid(cfg)
    exp = _experiment(cfg, {"horizon", "sample_dt", "initial", "w2_samples",
                            "witness_search"})
    initial_g = parse_initial(exp.get("initial"))
    probe = GridConfig(dt=1.0, **geometry)
    grid0 = gaussian_grid(probe, initial_g.mean, initial_g.cov)
    gcfg = _grid_config(geometry, dt, params, grid0)

    horizon = float(exp.get("horizon", 5.0))
    sample_dt = float(exp.get("sample_dt", 0.25))
    w2_samples = int(exp.get("w2_samples", 2048))
    constants = coupling_constants(params.gamma)
    target = stationary_fixed_point(params, gcfg)
    snaps = run_vfp(grid0, params, gcfg, horizon, sample_dt=sample_dt)

    rows = []
    f_values = []
    quadratic = params.kernel.kind == "quadratic_linear"
    for snap in snaps:
        e_val = classical_free_energy(snap, params)
        f_val = quadratic_free_energy(snap, params) if quadratic else float("nan")
        if quadratic:
            f_values.append(f_val)
        rows.append((float(snap.t), entropy(snap), e_val, f_val,
                     fisher_information(snap, params, np.eye(2)),
                     fisher_information(snap, params, constants.A),
                     w2_grid(snap, target, n=w2_samples, seed=sim.seed),
                     snap.mass()))
    prefix = _out_prefix(cfg, args)
    write_csv(prefix + "_lyapunov.csv",
              ["t", "entropy", "E_classical", "F_quadratic", "fisher_I", "fisher_A",
               "w2_to_stationary", "mass"], rows)

    report = {"kernel": params.kernel.name, "gamma": params.gamma, "lambda": params.lam,
              "smallness": smallness_holds(params), "witness": None}
    if quadratic:
        increments = np.diff(f_values)
        report["max_F_increase"] = float(increments.max()) if increments.size else 0.0
        report["F_monotone"] = bool(increments.size == 0 or increments.max() <= 1e-6)
    if exp.get("witness_search", not params.kernel.is_even):
        report["witness"] = _lyapunov_witness(params, gcfg, target)
    write_json(prefix + "_lyapunov.json", report)
    return 0


def cmd_fisher(args) -> int:
    cfg = load_config(args.config)
    params = parse_model(cfg)
    parse_sim(cfg, args.seed)
    geometry, dt = parse_grid(cfg)
    exp = _experiment(cfg, {"horizon", "sample_dt", "initial", "stationary_start"})
    constants = coupling_constants(params.gamma)
    rate = constants.contraction_rate

    probe = GridConfig(dt=1.0, **geometry)
    if exp.get("stationary_start", False):
        gcfg = _grid_config(geometry, dt, params,
                            gaussian_grid(probe, [0.0, 0.0], np.eye(2)))
        grid0 = stationary_fixed_point(params, gcfg)
    else:
        initial_g = parse_initial(exp.get("initial"))
        grid0 = gaussian_grid(probe, initial_g.mean, initial_g.cov)
        gcfg = _grid_config(geometry, dt, params, grid0)

    horizon = float(exp.get("horizon", 10.0))
    sample_dt = float(exp.get("sample_dt", 0.25))
    snaps = run_vfp(grid0, params, gcfg, horizon, sample_dt=sample_dt)

    i_a0 = fisher_information(snaps[0], params, constants.A)
    i_i0 = fisher_information(snaps[0], params, np.eye(2))
    rows = []
    violated = False
    for snap in snaps:
        i_a = fisher_information(snap, params, constants.A)
        i_i = fisher_information(snap, params, np.eye(2))
        env_a = i_a0 * math.exp(-rate * snap.t)
        env_i = 4.0 * i_i0 * math.exp(-rate * snap.t)
        if i_a > env_a * FISHER_SLACK or i_i > env_i * FISHER_SLACK:
            violated = True
        rows.append((float(snap.t), i_a, i_i, env_a, env_i))
    prefix = _out_prefix(cfg, args)
    write_csv(prefix + "_fisher.csv",
              ["t", "fisher_A", "fisher_I", "envelope_A", "envelope_I"], rows)
    write_json(prefix + "_fisher.json", {
        "rate": rate, "smallness": smallness_holds(params),
        "envelope_ok": not violated, "slack": FISHER_SLACK})
    if violated and smallness_holds(params):
        print("warning: fisher envelope violated inside the guaranteed regime",
              file=sys.stderr)
        return 3
    if not smallness_holds(params):
        print("warning: smallness condition violated: decay is not guaranteed",
              file=sys.stderr)
    return 0


def cmd_stationary(args) -> int:
    cfg = load_config(args.config)
    params = parse_model(cfg)
    geometry, dt = parse_grid(cfg)
    gcfg = GridConfig(dt=dt if dt is not None else 1e-3, **geometry)
    exp = _experiment(cfg, {"omega", "tol", "max_iter"})
    grid = stationary_fixed_point(params, gcfg, omega=float(exp.get("omega", 0.5)),
                                  tol=float(exp.get("tol", 1e-10)),
                                  max_iter=int(exp.get("max_iter", 10000)))
    prefix = _out_prefix(cfg, args)
    grid_to_csv(grid, prefix + "_stationary.csv")
    grid_to_binary(grid, prefix + "_stationary")
    constants = coupling_constants(params.gamma)
    xc, w = x_marginal(grid)
    write_json(prefix + "_stationary_summary.json", {
        "mass": grid.mass(),
        "mean_x": float(xc @ w),
        "fisher_A": fisher_information(grid, params, constants.A),
        "smallness": smallness_holds(params),
    })
    return 0


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    params = parse_model(cfg)
    exp = _experiment(cfg, {"initial", "times", "n_values"})
    initial = parse_initial(exp.get("initial"))
    times = np.asarray(exp.get("times", [0.0, 0.5, 1.0, 2.0, 5.0]), dtype=float)
    n_values = [int(n) for n in exp.get("n_values", [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024])]

    states = moment_flow(initial, params, times)
    target = stationary_gaussian(params)
    flow = [{"t": float(t), "mean": s.mean.tolist(), "cov": s.cov.tolist(),
             "bures_to_stationary": bures_w2(s, target)}
            for t, s in zip(times, states)]
    limit = free_energy_quadratic(initial, params)
    table = [{"n": n, "free_energy": free_energy_particle_limit(initial, params, n),
              "gibbs_mean_x": float(gibbs_measure_N(params, n).mean[0])}
             for n in n_values]
    payload = {
        "stationary_gaussian": {"mean": target.mean.tolist(), "cov": target.cov.tolist()},
        "moment_flow": flow,
        "free_energy_quadratic": limit,
        "free_energy_particle_limit": table,
    }
    prefix = _out_prefix(cfg, args)
    write_json(prefix + "_oracle.json", payload)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    params = parse_model(cfg)
    sim, n = parse_sim(cfg, args.seed)
    exp = _experiment(cfg, {"horizon", "sample_dt", "initial"})
    horizon = float(exp.get("horizon", 1.0))
    sample_dt = float(exp.get("sample_dt", 0.1))
    initial = parse_initial(exp.get("initial"), default_mean=(0.0, 0.0))
    rng = np.random.default_rng([sim.seed, 424242])
    chol = np.linalg.cholesky(initial.cov)
    draws = rng.standard_normal((2, n))
    xv = initial.mean[:, None] + chol @ draws
    state = ParticleState(x=xv[0], v=xv[1])
    n_steps = max(1, round(horizon / sim.dt))
    record_every = max(1, round(sample_dt / sim.dt))
    snaps = simulate(state, params, sim, n_steps, record_every=record_every)
    rows = ((float(s.t), i, float(s.x[i]), float(s.v[i]))
            for s in snaps for i in range(s.n))
    prefix = _out_prefix(cfg, args)
    write_csv(prefix + "_trajectory.csv", ["t", "i", "x", "v"], rows)
    return 0


# ----------------------------------------------------------------- main -----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vfplab",
        description="Experiments on the kinetic mean-field model: coupled-pair "
                    "contraction, free-energy decay, twisted Fisher information, "
                    "steady states, Gaussian oracles, and raw simulation.")
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "contraction": cmd_contraction,
        "lyapunov": cmd_lyapunov,
        "fisher": cmd_fisher,
        "stationary": cmd_stationary,
        "oracle": cmd_oracle,
        "simulate": cmd_simulate,
    }
    for name, handler in handlers.items():
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--out", default=None, help="output file prefix")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.set_defaults(func=handler)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        detail = f" (t={exc.t:g}, max |v|={exc.max_velocity:g})" if exc.t is not None else ""
        print(f"divergence: {exc}{detail}", file=sys.stderr)
        return 2
    except VfpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
