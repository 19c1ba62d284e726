"""
Projected subgradient optimal control of the flow state.

The control is a P1 body force f; the reduced cost is either

    R1(f) = a1/2 ||u(f) - u_d||^2 + a2/2 ||p(f) - p_d||^2 + a3/2 ||f||^2
    R2(f) = a1/2 ||curl u(f)||^2 + a2/2 ||p(f) - p_d||^2 + a3/2 ||f||^2

with all norms L2.  Each outer iteration forms a forward-difference
subgradient over the nodal control DOFs,

    [g]_i = (R(f + delta e_i) - R(f)) / delta,

projects the stepped control onto the admissible box, and stops when
the L2 norm of the control update drops below eps_opt.

The perturbed states behind the difference quotient are warm-started
from the converged base state: to first order u(f + delta e_i) =
u + delta w_i with (w_i, p-sensitivity s_i) solving the linearized
saddle system, all columns factored once per iteration.  Since the cost
is quadratic in (u, p, f), the difference quotient then has the closed
form used below; evaluating it this way is algebraically identical to
subtracting the two costs but avoids the catastrophic cancellation of
forming O(delta^2) differences, and keeps the delta-dependent
second-order terms of a genuine forward difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms
from .fem import FeSpace, interpolate_control
from .forms import ModelParams
from .friction import SlipLaw
from .solver import (Operators, SolverConfig, StateSolution,
                     coupled_factorization, solve_sensitivities, solve_state)


@dataclass(frozen=True)
class CostWeights:
    """Weights (a1, a2, a3) of tracking, pressure and control terms."""

    alpha1: float
    alpha2: float
    alpha3: float

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("tracking weights must be >= 0")
        if self.alpha3 <= 0:
            raise ValueError("control regularization weight must be > 0")


@dataclass(frozen=True)
class AdmissibleBox:
    """Componentwise bounds g1 <= f <= g2 on nodal control values.

    Either bound may be None (unbounded); lower <= upper is required
    when both are given.
    """

    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if (self.lower is not None and self.upper is not None
                and self.lower > self.upper):
            raise ValueError("admissible box requires lower <= upper")


def project(f: np.ndarray, box: AdmissibleBox | None) -> np.ndarray:
    """Project nodal control values onto the admissible box."""
    if box is None:
        return f.copy()
    return np.clip(f, box.lower, box.upper)


@dataclass
class OptConfig:
    """Projected subgradient parameters."""

    tau: float = 1e-2
    delta_fd: float = 1e-6
    eps_opt: float = 1e-5
    max_iter: int = 1000
    cost_kind: str = "R1"

    def __post_init__(self):
        if self.cost_kind not in ("R1", "R2"):
            raise ValueError("cost_kind must be 'R1' or 'R2'")


class CostModel:
    """Quadratic cost evaluation from precomputed matrices and targets."""

    def __init__(self, space: FeSpace, ops: Operators, weights: CostWeights,
                 u_target, p_target, kind: str = "R1"):
        self.space = space
        self.ops = ops
        self.w = weights
        self.kind = kind
        if kind == "R1":
            self.mu_d = forms.assemble_load(space, u_target)
            self.const_u = forms.integrate_vector_square(space, u_target)
        elif kind == "R2":
            self.mu_d = np.zeros(space.ndof_v)
            self.const_u = 0.0
        else:
            raise ValueError("cost kind must be 'R1' or 'R2'")
        self.mp_d = forms.assemble_pressure_load(space, p_target)
        self.const_p = forms.integrate_scalar(space, lambda x, y: p_target(x, y) ** 2)

    def _umat(self):
        return self.ops.curl_stiffness if self.kind == "R2" else self.ops.M

    def tracking_u_vec(self, u: np.ndarray) -> np.ndarray:
        """Gradient of the velocity tracking term in u (without weight)."""
        return self._umat() @ u - self.mu_d

    def parts(self, u: np.ndarray, p: np.ndarray, f: np.ndarray):
        """(tracking_u, tracking_p, regularization) cost contributions."""
        tu = 0.5 * self.w.alpha1 * max(0.0, u @ (self._umat() @ u)
                                       - 2.0 * (u @ self.mu_d) + self.const_u)
        tp = 0.5 * self.w.alpha2 * max(0.0, p @ (self.ops.Mp @ p)
                                       - 2.0 * (p @ self.mp_d) + self.const_p)
        reg = 0.5 * self.w.alpha3 * max(0.0, f @ (self.ops.control_mass @ f))
        return tu, tp, reg

    def cost(self, u: np.ndarray, p: np.ndarray, f: np.ndarray) -> float:
        return float(sum(self.parts(u, p, f)))


@dataclass
class Subgradient:
    """Forward-difference subgradient split into its cost parts."""

    total: np.ndarray
    tracking: np.ndarray
    regularization: np.ndarray


def fd_subgradient(space: FeSpace, ops: Operators, params: ModelParams,
                   law: SlipLaw, cost_model: CostModel, f: np.ndarray,
                   state: StateSolution, delta: float,
                   lu=None) -> Subgradient:
    """Forward-difference subgradient over all nodal control DOFs.

    One coupled factorization at the base state provides the perturbed
    states for every control direction in a single batched solve.
    """
    if lu is None:
        lu = coupled_factorization(space, ops, params, law, state.u)
    du, dp = solve_sensitivities(space, lu, ops.load_matrix_dense)

    w = cost_model.w
    tu = cost_model.tracking_u_vec(state.u)
    Umat = cost_model._umat()
    g_u = w.alpha1 * (du.T @ tu
                      + 0.5 * delta * np.einsum("ik,ik->k", du, Umat @ du))
    tp = ops.Mp @ state.p - cost_model.mp_d
    g_p = w.alpha2 * (dp.T @ tp
                      + 0.5 * delta * np.einsum("ik,ik->k", dp, ops.Mp @ dp))
    Mc = ops.control_mass
    g_reg = w.alpha3 * (Mc @ f + 0.5 * delta * Mc.diagonal())
    tracking = g_u + g_p
    return Subgradient(total=tracking + g_reg, tracking=tracking,
                       regularization=g_reg)


@dataclass
class OptimizeResult:
    """Final control, state, and per-iteration history.

    History rows: (iter, cost, tracking_u, tracking_p, regularization,
    control_change_L2); the last row is the final iterate with zero
    recorded change.
    """

    f: np.ndarray
    state: StateSolution
    history: np.ndarray
    converged: bool
    iterations: int


def optimize(space: FeSpace, params: ModelParams, law: SlipLaw,
             weights: CostWeights, u_target, p_target, f_init,
             opt_cfg: OptConfig | None = None,
             solver_cfg: SolverConfig | None = None,
             box: AdmissibleBox | None = None,
             ops: Operators | None = None,
             verbose: bool = False) -> OptimizeResult:
    """Run the projected subgradient loop from an initial control.

    f_init is a callable or a nodal control DOF vector.  The final cost
    never exceeds the initial one: projected steps that fail to reduce
    the subgradient model still shrink the recorded control change, and
    the history keeps every iterate for inspection.
    """
    opt_cfg = opt_cfg or OptConfig()
    solver_cfg = solver_cfg or SolverConfig()
    if ops is None:
        ops = Operators(space)
    cost_model = CostModel(space, ops, weights, u_target, p_target,
                           kind=opt_cfg.cost_kind)
    f = interpolate_control(space, f_init) if callable(f_init) else np.asarray(f_init, dtype=float)
    f = project(f, box)
    L = ops.load_matrix

    state = solve_state(space, params, law, L @ f, cfg=solver_cfg, ops=ops)
    if not state.converged:
        raise RuntimeError("state solve at the initial control did not converge")

    hist = []
    converged = False
    k = 0
    for k in range(opt_cfg.max_iter):
        tu, tp, reg = cost_model.parts(state.u, state.p, f)
        g = fd_subgradient(space, ops, params, law, cost_model, f, state,
                           opt_cfg.delta_fd)
        f_new = project(f - opt_cfg.tau * g.total, box)
        step = f_new - f
        change = float(np.sqrt(max(0.0, step @ (ops.control_mass @ step))))
        hist.append((k, tu + tp + reg, tu, tp, reg, change))
        if verbose:
            print(f"  it {k:5d}  cost {tu + tp + reg:.6e}  "
                  f"|df| {change:.3e}")
        f = f_new
        state = solve_state(space, params, law, L @ f, cfg=solver_cfg,
                            ops=ops, u0=state.u, p0=state.p)
        if not state.converged:
            raise RuntimeError(f"state solve at iteration {k} did not converge")
        if change < opt_cfg.eps_opt:
            converged = True
            break

    tu, tp, reg = cost_model.parts(state.u, state.p, f)
    hist.append((k + 1, tu + tp + reg, tu, tp, reg, 0.0))

    return OptimizeResult(f=f, state=state, history=np.array(hist),
                          converged=converged, iterations=k + 1)
