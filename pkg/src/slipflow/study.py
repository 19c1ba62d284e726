"""Mesh ladder studies of the optimized control problem.

Runs the projected subgradient driver on a list of meshes and compares
every coarse solution against the one on the finest mesh.  The meshes
are not nested, so both fields are evaluated at the quadrature points
of the reference mesh and the error integrals use the reference
quadrature weights.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .fem import (FeSpace, build_space, evaluate_control, evaluate_pressure,
                  evaluate_velocity, evaluate_velocity_grad, control_at_quad,
                  pressure_at_quad, velocity_at_quad, velocity_grad_at_quad)
from .catalog import Benchmark, get_benchmark
from .meshing import build_unit_square
from .optimize import AdmissibleBox, OptConfig, optimize
from .solver import Operators, SolverConfig


@dataclass(frozen=True)
class StudyConfig:
    """Mesh list and per-mesh optimization budget of a ladder study."""

    mesh_sizes: tuple = (4, 8, 12, 16, 25)
    reference_n: int = 25
    opt_iters: int = 12

    def __post_init__(self):
        sizes = tuple(self.mesh_sizes)
        if sorted(sizes) != list(sizes) or len(set(sizes)) != len(sizes):
            raise ValueError("mesh_sizes must be strictly ascending")
        if self.reference_n not in sizes:
            raise ValueError("mesh_sizes must contain the reference mesh")
        if self.opt_iters < 1:
            raise ValueError("opt_iters must be positive")


@dataclass
class MeshRun:
    """Optimized fields and bookkeeping for one mesh of a study."""

    n: int
    space: FeSpace
    f: np.ndarray
    u: np.ndarray
    p: np.ndarray
    history: np.ndarray
    opt_converged: bool
    opt_iterations: int
    seconds: float


@dataclass
class StudyResult:
    """Per-mesh runs plus the error table against the reference mesh."""

    example: str
    config: StudyConfig
    runs: list = field(default_factory=list)
    # one row (n, h, err_u_L2, err_u_V, err_p_L2, err_f_L2) per coarse mesh
    rows: np.ndarray = None


def field_errors(ref_space: FeSpace, u_ref, p_ref, f_ref,
                 space: FeSpace, u, p, f):
    """Relative errors of (u, p, f) against a reference discrete triple.

    Both solutions are evaluated at the quadrature points of the
    reference space; the velocity error in V uses the symmetric
    gradient.  Returns (err_u_L2, err_u_V, err_p_L2, err_f_L2).
    """
    pts = ref_space.qp.reshape(-1, 2)
    qw = ref_space.qw.ravel()

    def l2(vals2):
        return float(np.sqrt(np.sum(qw * np.sum(vals2 ** 2, axis=-1))))

    def strain_norm(grads):
        eps = 0.5 * (grads + grads.transpose(0, 2, 1))
        return float(np.sqrt(np.sum(qw * np.einsum("kab,kab->k", eps, eps))))

    u_ref_q = velocity_at_quad(ref_space, u_ref).reshape(-1, 2)
    g_ref_q = velocity_grad_at_quad(ref_space, u_ref).reshape(-1, 2, 2)
    p_ref_q = pressure_at_quad(ref_space, p_ref).ravel()
    f_ref_q = control_at_quad(ref_space, f_ref).reshape(-1, 2)

    du = evaluate_velocity(space, u, pts) - u_ref_q
    dg = evaluate_velocity_grad(space, u, pts) - g_ref_q
    dp = evaluate_pressure(space, p, pts) - p_ref_q
    df = evaluate_control(space, f, pts) - f_ref_q

    err_u = l2(du) / l2(u_ref_q)
    err_v = strain_norm(dg) / strain_norm(g_ref_q)
    err_p = float(np.sqrt(np.sum(qw * dp ** 2)
                          / np.sum(qw * p_ref_q ** 2)))
    err_f = l2(df) / l2(f_ref_q)
    return err_u, err_v, err_p, err_f


def run_study(bench: Benchmark | int, cfg: StudyConfig | None = None,
              opt_cfg: OptConfig | None = None,
              solver_cfg: SolverConfig | None = None,
              box: AdmissibleBox | None = None,
              verbose: bool = False) -> StudyResult:
    """Optimize on every mesh of the ladder and tabulate errors.

    Each mesh runs independently from the catalog initial control; the
    optimization budget is cfg.opt_iters subgradient steps per mesh
    (the step-size change criterion may stop a run earlier).
    """
    if isinstance(bench, int):
        bench = get_benchmark(bench)
    cfg = cfg or StudyConfig()
    base_opt = opt_cfg or OptConfig()
    ocfg = OptConfig(tau=base_opt.tau, delta_fd=base_opt.delta_fd,
                     eps_opt=base_opt.eps_opt, max_iter=cfg.opt_iters,
                     cost_kind=base_opt.cost_kind)
    scfg = solver_cfg or SolverConfig(eta=bench.eta)

    result = StudyResult(example=bench.name, config=cfg)
    for n in cfg.mesh_sizes:
        t0 = time.time()
        space = build_space(build_unit_square(n))
        ops = Operators(space)
        res = optimize(space, bench.params, bench.law, bench.weights,
                       bench.u_target, bench.p_target, bench.f_init,
                       opt_cfg=ocfg, solver_cfg=scfg, box=box, ops=ops)
        run = MeshRun(n=n, space=space, f=res.f, u=res.state.u,
                      p=res.state.p, history=res.history,
                      opt_converged=res.converged,
                      opt_iterations=res.iterations,
                      seconds=time.time() - t0)
        result.runs.append(run)
        if verbose:
            print(f"  n={n:3d}  cost {res.history[-1, 1]:.6e}  "
                  f"iters {res.iterations}  {run.seconds:.1f}s")

    ref = next(r for r in result.runs if r.n == cfg.reference_n)
    rows = []
    for run in result.runs:
        if run.n == cfg.reference_n:
            continue
        errs = field_errors(ref.space, ref.u, ref.p, ref.f,
                            run.space, run.u, run.p, run.f)
        rows.append((run.n, run.space.h) + errs)
    result.rows = np.array(rows)
    return result


# ---------------------------------------------------------------------------
# CSV emission (plain text, fixed formatting, deterministic)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_errors_csv(path: str, result: StudyResult) -> None:
    """Error table with one row per coarse mesh."""
    lines = ["n,h,err_u_L2,err_u_V,err_p_L2,err_f_L2"]
    for row in result.rows:
        lines.append(",".join([str(int(row[0]))]
                              + [_fmt(v) for v in row[1:]]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_history_csv(path: str, history: np.ndarray) -> None:
    """Cost history of one optimization run."""
    lines = ["iter,cost,tracking_u,tracking_p,regularization,"
             "control_change_L2"]
    for row in history:
        lines.append(",".join([str(int(row[0]))]
                              + [_fmt(v) for v in row[1:]]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_residuals_csv(path: str, residual_history: np.ndarray) -> None:
    """Outer residual history of one state solve."""
    lines = ["iteration,velocity_residual,divergence_residual"]
    for row in residual_history:
        lines.append(",".join([str(int(row[0]))]
                              + [_fmt(v) for v in row[1:]]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_perturbation_csv(path: str, rows: np.ndarray) -> None:
    """Perturbation sizes against solution changes."""
    lines = ["t,load_dual_gap,err_u_V,err_p_L2"]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
