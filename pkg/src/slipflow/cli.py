"""Command line driver for the slip flow control experiments.

Subcommands cover single state solves, the optimal control loop, the
mesh ladder error study, the analytic condition report, the numerical
verification suite, and the load perturbation study.  Exit codes: 0 on
success, 2 for configuration problems, 3 for solver failures, 4 for
failed verification checks.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                       # python < 3.11
    import tomli as tomllib

from .catalog import get_benchmark
from .fem import build_space, interpolate_control
from .friction import estimate_delta1, estimate_lambda0, gamma1_length
from .meshing import build_unit_square
from .optimize import AdmissibleBox, OptConfig, optimize
from .solver import (Operators, SolverConfig, check_existence_condition,
                     check_uniqueness_conditions, dual_norm, energy_bound,
                     energy_check, perturbation_study, solve_state)
from .study import (StudyConfig, run_study, write_errors_csv,
                    write_history_csv, write_perturbation_csv,
                    write_residuals_csv)
from .verify import reports_to_json, run_all
from .vtkio import vertex_control, vertex_velocity, write_vtk


class ConfigError(Exception):
    """Raised for malformed or inconsistent experiment configuration."""


_MODEL_KEYS = ("mu", "alpha", "beta", "kappa", "r", "q")
_SLIP_KEYS = ("a", "b", "rho", "eps_reg")
_COST_KEYS = ("alpha1", "alpha2", "alpha3")
_OPT_KEYS = ("tau", "delta_fd", "eps_opt", "max_iter", "cost_kind")
_SOLVER_KEYS = ("eps_hvi", "max_outer", "max_newton")
_MISC_KEYS = ("example", "mesh_n", "reference_n", "out", "seed", "eta",
              "opt_iters", "f_lower", "f_upper", "perturbation_sizes")
_ALL_KEYS = set(_MODEL_KEYS + _SLIP_KEYS + _COST_KEYS + _OPT_KEYS
                + _SOLVER_KEYS + _MISC_KEYS)


@dataclasses.dataclass
class ExperimentConfig:
    """Fully resolved configuration of one CLI invocation."""

    example: int
    bench: object
    params: object
    law: object
    weights: object
    solver: SolverConfig
    opt: OptConfig
    mesh_sizes: tuple
    reference_n: int
    opt_iters: int
    box: AdmissibleBox | None
    sizes: tuple
    out: str | None
    seed: int


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc


def build_config(args, default_meshes=(8,)) -> ExperimentConfig:
    """Merge CLI flags over config-file values over catalog defaults."""
    data = _load_toml(args.config) if args.config else {}
    unknown = set(data) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    example = args.example if args.example is not None else data.get("example")
    if example is None:
        raise ConfigError("an example id is required (--example or config)")
    try:
        bench = get_benchmark(int(example))
    except KeyError as exc:
        raise ConfigError(f"unknown example id: {example}") from exc

    try:
        params = dataclasses.replace(
            bench.params, **{k: data[k] for k in _MODEL_KEYS if k in data})
        law = dataclasses.replace(
            bench.law, **{k: data[k] for k in _SLIP_KEYS if k in data})
        weights = dataclasses.replace(
            bench.weights, **{k: data[k] for k in _COST_KEYS if k in data})
        solver = SolverConfig(
            eta=data.get("eta", bench.eta),
            **{k: data[k] for k in _SOLVER_KEYS if k in data})
        opt = OptConfig(**{k: data[k] for k in _OPT_KEYS if k in data})
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid parameter value: {exc}") from exc

    mesh_n = args.mesh_n if args.mesh_n else data.get("mesh_n", list(default_meshes))
    mesh_sizes = tuple(int(n) for n in mesh_n)
    if any(n < 1 for n in mesh_sizes):
        raise ConfigError("mesh sizes must be positive integers")
    if list(mesh_sizes) != sorted(set(mesh_sizes)):
        raise ConfigError("mesh sizes must be strictly ascending")

    lower, upper = data.get("f_lower"), data.get("f_upper")
    box = None
    if lower is not None or upper is not None:
        try:
            box = AdmissibleBox(lower=lower, upper=upper)
        except ValueError as exc:
            raise ConfigError(f"invalid control box: {exc}") from exc

    sizes = tuple(data.get("perturbation_sizes", (0.1, 0.05, 0.025, 0.0125)))
    return ExperimentConfig(
        example=int(example), bench=bench, params=params, law=law,
        weights=weights, solver=solver, opt=opt, mesh_sizes=mesh_sizes,
        reference_n=int(data.get("reference_n", 25)),
        opt_iters=int(data.get("opt_iters", 12)), box=box, sizes=sizes,
        out=args.out if args.out else data.get("out"),
        seed=args.seed if args.seed is not None else int(data.get("seed", 0)),
    )


def _ensure_out(cfg_out: str | None) -> str | None:
    if cfg_out:
        os.makedirs(cfg_out, exist_ok=True)
    return cfg_out


def _dump_state_vtk(path: str, space, u, p, f=None) -> None:
    vectors = {"u": vertex_velocity(space, u)}
    if f is not None:
        vectors["f"] = vertex_control(space, f)
    write_vtk(path, space.mesh, vectors=vectors,
              scalars={"p": p[:space.mesh.num_nodes]})


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve_state(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg.out)
    failed = False
    for n in cfg.mesh_sizes:
        space = build_space(build_unit_square(n))
        ops = Operators(space)
        f = interpolate_control(space, cfg.bench.f_init)
        sol = solve_state(space, cfg.params, cfg.law, ops.load_matrix @ f,
                          cfg=cfg.solver, ops=ops)
        status = "converged" if sol.converged else "NOT CONVERGED"
        print(f"example {cfg.example}  n={n:3d}  {status}  "
              f"outer {sol.outer_iterations:4d}  "
              f"|u|_V {sol.diagnostics['velocity_V_norm']:.6e}  "
              f"|p|_L2 {sol.diagnostics['pressure_L2_norm']:.6e}")
        if out:
            write_residuals_csv(
                os.path.join(out, f"residuals_ex{cfg.example}_n{n}.csv"),
                sol.residual_history)
            _dump_state_vtk(
                os.path.join(out, f"state_ex{cfg.example}_n{n}.vtk"),
                space, sol.u, sol.p, f)
        failed = failed or not sol.converged
    return 3 if failed else 0


def cmd_optimize(cfg: ExperimentConfig) -> int:
    out = _ensure_out(cfg.out)
    finest = max(cfg.mesh_sizes)
    for n in cfg.mesh_sizes:
        space = build_space(build_unit_square(n))
        ops = Operators(space)
        res = optimize(space, cfg.params, cfg.law, cfg.weights,
                       cfg.bench.u_target, cfg.bench.p_target,
                       cfg.bench.f_init, opt_cfg=cfg.opt,
                       solver_cfg=cfg.solver, box=cfg.box, ops=ops)
        print(f"example {cfg.example}  n={n:3d}  iterations "
              f"{res.iterations:5d}  converged {res.converged}  "
              f"cost {res.history[0, 1]:.6e} -> {res.history[-1, 1]:.6e}")
        if out:
            write_history_csv(
                os.path.join(out, f"cost_history_ex{cfg.example}_n{n}.csv"),
                res.history)
            if n == finest:
                _dump_state_vtk(
                    os.path.join(out, f"optimal_ex{cfg.example}_n{n}.vtk"),
                    space, res.state.u, res.state.p, res.f)
    return 0


def cmd_convergence_study(cfg: ExperimentConfig) -> int:
    if cfg.reference_n not in cfg.mesh_sizes:
        raise ConfigError(
            f"mesh list {cfg.mesh_sizes} lacks the reference mesh "
            f"n={cfg.reference_n}")
    out = _ensure_out(cfg.out)
    scfg = StudyConfig(mesh_sizes=cfg.mesh_sizes,
                       reference_n=cfg.reference_n,
                       opt_iters=cfg.opt_iters)
    result = run_study(cfg.bench, scfg, opt_cfg=cfg.opt,
                       solver_cfg=cfg.solver, box=cfg.box, verbose=True)
    print(f"relative errors against n={cfg.reference_n} "
          f"(example {cfg.example}):")
    print(f"{'n':>4} {'h':>12} {'u_L2':>12} {'u_V':>12} "
          f"{'p_L2':>12} {'f_L2':>12}")
    for row in result.rows:
        print(f"{int(row[0]):4d} " + " ".join(f"{v:12.4e}" for v in row[1:]))
    if out:
        write_errors_csv(
            os.path.join(out, f"errors_ex{cfg.example}.csv"), result)
        for run in result.runs:
            write_history_csv(
                os.path.join(out,
                             f"cost_history_ex{cfg.example}_n{run.n}.csv"),
                run.history)
    return 0


def cmd_check_conditions(cfg: ExperimentConfig) -> int:
    n = max(cfg.mesh_sizes)
    space = build_space(build_unit_square(n))
    ops = Operators(space)
    spectral = estimate_lambda0(space, ops.A)
    d1 = estimate_delta1(cfg.law)
    exist = check_existence_condition(cfg.params, cfg.law, spectral.lambda0)
    uniq = check_uniqueness_conditions(cfg.params, cfg.law, spectral.lambda0)
    f = interpolate_control(space, cfg.bench.f_init)
    fd = dual_norm(space, ops, ops.load_matrix @ f)
    bound = energy_bound(cfg.params, cfg.law, spectral.lambda0, fd,
                         gamma1_len=gamma1_length(space))
    sol = solve_state(space, cfg.params, cfg.law, ops.load_matrix @ f,
                      cfg=cfg.solver, ops=ops)
    energy = energy_check(space, ops, cfg.params, sol, bound)

    report = {
        "example": cfg.example,
        "mesh_n": n,
        "lambda0": spectral.lambda0,
        "delta1_sampled": d1.value,
        "delta1_envelope": d1.envelope,
        "existence": dataclasses.asdict(exist),
        "uniqueness": dataclasses.asdict(uniq),
        "energy_bound": {"K_f": bound.K_f, "K_tilde": bound.K_tilde,
                         "includes_damping": bound.includes_damping,
                         **energy},
        "state_converged": sol.converged,
    }
    print(f"example {cfg.example}  n={n}")
    print(f"  lambda0          {spectral.lambda0:.6f}")
    print(f"  delta1 sampled   {d1.value:.6e}  envelope {d1.envelope:.6e}")
    print(f"  existence        {'ok' if exist.ok else 'VIOLATED'} "
          f"(k1={exist.k1:.3g} < {exist.threshold:.3g})")
    print(f"  uniqueness       "
          f"{'granted' if uniq.any_ok else 'not established'}")
    print(f"  energy bound     lhs {energy['lhs']:.6e} <= "
          f"K~ {bound.K_tilde:.6e}  "
          f"{'ok' if energy['ok'] else 'VIOLATED'}")
    out = _ensure_out(cfg.out)
    if out:
        with open(os.path.join(out, f"conditions_ex{cfg.example}.json"),
                  "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=str)
    if not sol.converged:
        return 3
    return 0


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else 0
    reports = run_all(seed=seed)
    for r in reports:
        print(r.summary())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "verification_report.json"),
                  "w") as fh:
            fh.write(reports_to_json(reports))
    return 0 if all(r.passed for r in reports) else 4


def cmd_perturbation_study(cfg: ExperimentConfig) -> int:
    n = max(cfg.mesh_sizes)
    space = build_space(build_unit_square(n))
    ops = Operators(space)
    f = interpolate_control(space, cfg.bench.f_init)
    res = perturbation_study(space, cfg.params, cfg.law,
                             ops.load_matrix @ f, cfg.bench.u_target,
                             cfg.sizes, cfg=cfg.solver, ops=ops)
    print(f"example {cfg.example}  n={n}  baseline |u|_V "
          f"{res.baseline_u_V:.6e}")
    print(f"{'t':>10} {'load gap':>14} {'err_u_V':>14} {'err_p_L2':>14}")
    for t, gap, eu, ep in res.rows:
        print(f"{t:10.4f} {gap:14.6e} {eu:14.6e} {ep:14.6e}")
    out = _ensure_out(cfg.out)
    if out:
        write_perturbation_csv(
            os.path.join(out, f"perturbation_ex{cfg.example}_n{n}.csv"),
            res.rows)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub):
    sub.add_argument("--config", help="TOML configuration file")
    sub.add_argument("--example", type=int, choices=(1, 2, 3),
                     help="built-in experiment id")
    sub.add_argument("--mesh-n", type=int, nargs="+",
                     help="mesh subdivision counts, ascending")
    sub.add_argument("--out", help="output directory for artifacts")
    sub.add_argument("--seed", type=int, help="random seed where applicable")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slipflow",
        description="Stationary flow with slip friction and "
                    "distributed optimal control.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("solve-state", "optimize", "convergence-study",
                 "check-conditions", "verify", "perturbation-study"):
        _add_common(subs.add_parser(name))
    return parser


_DEFAULT_MESHES = {
    "solve-state": (8,),
    "optimize": (8,),
    "convergence-study": (4, 8, 12, 16, 25),
    "check-conditions": (8,),
    "perturbation-study": (8,),
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args)
    handlers = {
        "solve-state": cmd_solve_state,
        "optimize": cmd_optimize,
        "convergence-study": cmd_convergence_study,
        "check-conditions": cmd_check_conditions,
        "perturbation-study": cmd_perturbation_study,
    }
    try:
        cfg = build_config(args, _DEFAULT_MESHES[args.command])
        return handlers[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
