"""
Stationary flow solver: Uzawa pressure iteration around a damped Newton
velocity solve.

The discrete problem couples the velocity residual

    mu a(u, .) + b(u, u, .) + alpha a0(u, .) + beta c_r(u, .)
      + kappa c_q(u, .) + friction(u, .) + d(., p) - (f, .)

with the incompressibility functional d(u, .).  The outer loop updates
the pressure by the preconditioned divergence,

    p <- p + eta * meanshift(Mp^{-1} D u),

which converges for eta below 2/lambda_max(Mp^{-1} D G^{-1} D^T), of the
order of the viscosity; the inner loop runs full Newton steps on the
velocity at fixed pressure, halving the step (at most max_halvings
times) until the residual norm decreases.

Convergence is declared when the l2 norm of the free velocity residual
plus the L2 norm of the mean-shifted divergence field drops below
eps_hvi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .fem import FeSpace, apply_mask
from .forms import ModelParams
from .friction import (SlipLaw, SpectralConstants, assemble_friction,
                       estimate_delta1, friction_residual, gamma1_length)


@dataclass
class SolverConfig:
    """Tolerances and iteration limits of the Uzawa-Newton loop."""

    eps_hvi: float = 1e-5
    eta: float = 1.0
    max_outer: int = 400
    max_newton: int = 30
    max_halvings: int = 8
    inner_tol_factor: float = 0.1


@dataclass
class StateSolution:
    """Converged (or best-effort) discrete state.

    residual_history rows are (iteration, velocity_residual,
    divergence_residual); the final row is the converged residual pair.
    """

    u: np.ndarray
    p: np.ndarray
    converged: bool
    outer_iterations: int
    newton_iterations: int
    residual_history: np.ndarray
    diagnostics: dict = field(default_factory=dict)


class Operators:
    """Matrices shared by every solve on one space, assembled once."""

    def __init__(self, space: FeSpace):
        self.space = space
        self.A = forms.assemble_a(space)
        self.M = forms.assemble_a0(space)
        self.D = forms.assemble_d(space)
        self.DT = self.D.T.tocsr()
        self.Mp = forms.assemble_pressure_mass(space)
        self.ivec = forms.pressure_integral_vector(space)
        self._mp_lu = None
        self._gram_lu = None
        self._load_matrix = None
        self._load_matrix_dense = None
        self._control_mass = None
        self._curl_stiffness = None

    @property
    def mp_lu(self):
        if self._mp_lu is None:
            self._mp_lu = spla.splu(self.Mp.tocsc())
        return self._mp_lu

    @property
    def load_matrix(self):
        if self._load_matrix is None:
            self._load_matrix = forms.assemble_load_matrix(self.space)
        return self._load_matrix

    @property
    def load_matrix_dense(self):
        if self._load_matrix_dense is None:
            self._load_matrix_dense = self.load_matrix.toarray()
        return self._load_matrix_dense

    @property
    def control_mass(self):
        if self._control_mass is None:
            self._control_mass = forms.assemble_control_mass(self.space)
        return self._control_mass

    @property
    def curl_stiffness(self):
        if self._curl_stiffness is None:
            self._curl_stiffness = forms.assemble_curl_stiffness(self.space)
        return self._curl_stiffness

    def gram_solve(self, b_free: np.ndarray) -> np.ndarray:
        """Apply the inverse V-inner-product Gram matrix (free DOFs)."""
        if self._gram_lu is None:
            free = self.space.free_v
            G = 0.5 * self.A[np.ix_(free, free)]
            self._gram_lu = spla.splu(G.tocsc())
        return self._gram_lu.solve(b_free)

    def divergence_field(self, u: np.ndarray) -> np.ndarray:
        """Mean-shifted Riesz representative of the divergence residual."""
        z = self.mp_lu.solve(self.D @ u)
        return z - (self.ivec @ z)

    def norm_V(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(0.0, 0.5 * (u @ (self.A @ u)))))

    def norm_L2_velocity(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(0.0, u @ (self.M @ u))))

    def norm_L2_pressure(self, p: np.ndarray) -> float:
        return float(np.sqrt(max(0.0, p @ (self.Mp @ p))))

    def norm_L2_control(self, f: np.ndarray) -> float:
        return float(np.sqrt(max(0.0, f @ (self.control_mass @ f))))


def dual_norm(space: FeSpace, ops: Operators, load_vec: np.ndarray) -> float:
    """Discrete V* norm of a load vector: sqrt(b^T G^{-1} b) on free DOFs."""
    b = load_vec[space.free_v]
    return float(np.sqrt(max(0.0, b @ ops.gram_solve(b))))


def velocity_residual(space: FeSpace, ops: Operators, params: ModelParams,
                      law: SlipLaw, u: np.ndarray, p: np.ndarray,
                      load_vec: np.ndarray) -> np.ndarray:
    """Full-size velocity residual vector (not masked)."""
    r = params.mu * (ops.A @ u)
    r += forms.convection_residual(space, u)
    if params.alpha != 0.0:
        r += params.alpha * (ops.M @ u)
    if params.beta != 0.0:
        r += params.beta * forms.damping_residual(space, u, params.r)
    if params.kappa != 0.0:
        r += params.kappa * forms.damping_residual(space, u, params.q)
    r += friction_residual(space, law, u)
    r += ops.DT @ p
    r -= load_vec
    return r


def velocity_jacobian(space: FeSpace, ops: Operators, params: ModelParams,
                      law: SlipLaw, u: np.ndarray) -> sp.csr_matrix:
    """Derivative of the velocity residual in u (full size)."""
    J = params.mu * ops.A
    J = J + forms.assemble_oseen(space, u) + forms.assemble_conv_cross(space, u)
    if params.alpha != 0.0:
        J = J + params.alpha * ops.M
    if params.beta != 0.0:
        J = J + params.beta * forms.damping_jacobian(space, u, params.r)
    if params.kappa != 0.0:
        J = J + params.kappa * forms.damping_jacobian(space, u, params.q)
    J = J + assemble_friction(space, law, u)[1]
    return J.tocsr()


def _as_load_vector(space: FeSpace, load) -> np.ndarray:
    if callable(load):
        return forms.assemble_load(space, load)
    return np.asarray(load, dtype=float)


def solve_state(space: FeSpace, params: ModelParams, law: SlipLaw, load,
                cfg: SolverConfig | None = None, ops: Operators | None = None,
                u0: np.ndarray | None = None,
                p0: np.ndarray | None = None) -> StateSolution:
    """Solve the regularized flow problem for a given body force.

    load is either a callable f(x, y) -> (2, m) or a preassembled
    velocity load vector.  u0, p0 warm-start the iteration.
    """
    if cfg is None:
        cfg = SolverConfig()
    if ops is None:
        ops = Operators(space)
    load_vec = _as_load_vector(space, load)
    free = space.free_v

    u = apply_mask(space, u0) if u0 is not None else np.zeros(space.ndof_v)
    if p0 is not None:
        p = p0 - (ops.ivec @ p0)
    else:
        p = np.zeros(space.ndof_p)

    inner_tol = cfg.inner_tol_factor * cfg.eps_hvi
    hist = []
    total_newton = 0
    converged = False
    outer = 0

    r_free = velocity_residual(space, ops, params, law, u, p, load_vec)[free]
    vel_norm = float(np.linalg.norm(r_free))
    z = ops.divergence_field(u)
    div_norm = float(np.sqrt(max(0.0, z @ (ops.Mp @ z))))

    for k in range(cfg.max_outer + 1):
        hist.append((k, vel_norm, div_norm))
        if vel_norm + div_norm < cfg.eps_hvi:
            converged = True
            outer = k
            break
        if k == cfg.max_outer:
            outer = k
            break

        # Newton on the velocity at fixed pressure
        for _ in range(cfg.max_newton):
            if vel_norm <= inner_tol:
                break
            J = velocity_jacobian(space, ops, params, law, u)
            Jff = J[np.ix_(free, free)].tocsc()
            delta = spla.splu(Jff).solve(-r_free)
            s = 1.0
            accepted = False
            for _ in range(cfg.max_halvings + 1):
                u_try = u.copy()
                u_try[free] += s * delta
                r_try = velocity_residual(space, ops, params, law,
                                          u_try, p, load_vec)[free]
                norm_try = float(np.linalg.norm(r_try))
                if norm_try <= (1.0 - 1e-4 * s) * vel_norm:
                    accepted = True
                    break
                s *= 0.5
            if not accepted:
                break
            u, r_free, vel_norm = u_try, r_try, norm_try
            total_newton += 1

        z = ops.divergence_field(u)
        p = p + cfg.eta * z
        p -= ops.ivec @ p

        r_free = velocity_residual(space, ops, params, law, u, p, load_vec)[free]
        vel_norm = float(np.linalg.norm(r_free))
        z = ops.divergence_field(u)
        div_norm = float(np.sqrt(max(0.0, z @ (ops.Mp @ z))))

    diagnostics = {
        "velocity_V_norm": ops.norm_V(u),
        "velocity_L2_norm": ops.norm_L2_velocity(u),
        "pressure_L2_norm": ops.norm_L2_pressure(p),
        "divergence_L2": div_norm,
        "load_dual_norm": dual_norm(space, ops, load_vec),
    }
    if params.beta > 0.0:
        diagnostics["damping_energy"] = forms.damping_energy(space, u, params.r)

    return StateSolution(
        u=u, p=p, converged=converged, outer_iterations=outer,
        newton_iterations=total_newton,
        residual_history=np.array(hist), diagnostics=diagnostics,
    )


def coupled_factorization(space: FeSpace, ops: Operators, params: ModelParams,
                          law: SlipLaw, u: np.ndarray):
    """LU factorization of the saddle Jacobian at a state.

    Unknowns: free velocity DOFs, all pressure DOFs, one scalar
    multiplier pinning the pressure mean.  Used for solution
    sensitivities with respect to load perturbations.
    """
    free = space.free_v
    J = velocity_jacobian(space, ops, params, law, u)
    Jff = J[np.ix_(free, free)]
    Df = ops.D[:, free]
    m = sp.csr_matrix(ops.ivec[:, None])
    K = sp.bmat([[Jff, Df.T, None],
                 [Df, None, m],
                 [None, m.T, None]], format="csc")
    return spla.splu(K)


def solve_sensitivities(space: FeSpace, lu, rhs_v: np.ndarray):
    """Velocity/pressure sensitivities for load directions.

    rhs_v has shape (ndof_v, k); returns (du, dp) of shapes
    (ndof_v, k) and (ndof_p, k), where column i solves the linearized
    saddle system with load rhs_v[:, i].
    """
    free = space.free_v
    k = rhs_v.shape[1]
    nf, npr = len(free), space.ndof_p
    rhs = np.zeros((nf + npr + 1, k))
    rhs[:nf] = rhs_v[free]
    sol = lu.solve(rhs)
    du = np.zeros((space.ndof_v, k))
    du[free] = sol[:nf]
    dp = sol[nf:nf + npr]
    return du, dp


# ---------------------------------------------------------------------------
# a priori bounds and solvability conditions


@dataclass(frozen=True)
class EnergyBound:
    """A priori bound on ||u||_V^2 (+ ||u||_{L^{r+1}}^{r+1} when beta > 0)."""

    K_f: float
    K_tilde: float
    includes_damping: bool


def energy_bound(params: ModelParams, law: SlipLaw, lambda0: float,
                 f_dual_norm: float, gamma1_len: float = 1.0,
                 k0: float | None = None, k1: float | None = None) -> EnergyBound:
    """Evaluate the a priori energy bound for a given load size.

    K_f = (2 mu - k1/lambda0)^{-1} (||f||_{V*} + k0 |Gamma_1|^{1/2}
    lambda0^{-1/2})^2 + |kappa|^{(r+1)/(r-q)} and K_tilde doubles it
    against the worse of the viscous and damping coercivity constants.
    With beta = 0 only the V part of the left-hand side is controlled.
    """
    k0 = law.k0 if k0 is None else k0
    k1 = law.k1 if k1 is None else k1
    denom = 2.0 * params.mu - k1 / lambda0
    if denom <= 0.0:
        raise ValueError("solvability condition k1 < 2 mu lambda0 violated")
    K = (f_dual_norm + k0 * np.sqrt(gamma1_len / lambda0)) ** 2 / denom
    if params.kappa != 0.0:
        K += abs(params.kappa) ** ((params.r + 1.0) / (params.r - params.q))
    if params.beta > 0.0:
        K_tilde = 2.0 * max(1.0 / denom, 1.0 / params.beta) * K
        includes = True
    else:
        K_tilde = 2.0 / denom * K
        includes = False
    return EnergyBound(K_f=float(K), K_tilde=float(K_tilde),
                       includes_damping=includes)


def energy_check(space: FeSpace, ops: Operators, params: ModelParams,
                 sol: StateSolution, bound: EnergyBound) -> dict:
    """Compare the energy of a state against its a priori bound."""
    lhs = ops.norm_V(sol.u) ** 2
    if bound.includes_damping:
        lhs += forms.damping_energy(space, sol.u, params.r)
    return {"lhs": float(lhs), "rhs": bound.K_tilde,
            "ok": bool(lhs <= bound.K_tilde),
            "margin": float(bound.K_tilde - lhs)}


@dataclass(frozen=True)
class AnalyticConstants:
    """Embedding constants entering the uniqueness conditions.

    ck bounds the convection form through the L4 norm, cg is the
    Ladyzhenskaya interpolation constant.  They are inputs (no discrete
    estimation is attempted); branches that need a missing constant are
    reported as unavailable.
    """

    ck: float | None = None
    cg: float | None = None


def _rho_i(params: ModelParams, i: int) -> float:
    """The kappa damping terms of the uniqueness conditions."""
    if params.kappa == 0.0:
        return 0.0
    r, q = params.r, params.q
    if params.beta == 0.0 and q > 1.0:
        return float("inf")
    base = (2.0 * i * (q - 1.0)) / (params.beta * (r - 1.0)) if q > 1.0 else 0.0
    return ((r - q) / (r - 1.0)
            * base ** ((q - 1.0) / (r - q))
            * (abs(params.kappa) * q * 2.0 ** (q - 1.0)) ** ((r - 1.0) / (r - q)))


@dataclass
class UniquenessReport:
    """Outcome of the sufficient uniqueness conditions.

    Each branch dict carries: name, applicable (right exponent range),
    ok (True/False, or None when a needed analytic constant is
    missing), required alpha, and notes.
    """

    delta1: float
    viscosity_ok: bool
    viscosity_margin: float
    branches: list

    @property
    def any_ok(self) -> bool:
        return any(b.get("ok") for b in self.branches)


def check_uniqueness_conditions(params: ModelParams, law: SlipLaw,
                                lambda0: float,
                                K_tilde: float | None = None,
                                constants: AnalyticConstants | None = None,
                                delta1: float | None = None) -> UniquenessReport:
    """Evaluate the sufficient conditions for uniqueness of the state.

    Uses the analytic envelope for delta1 by default (conservative).
    The branches for r > 3 are load independent; the branch for
    r in [1, 3] needs the energy bound K_tilde of the actual load and
    both embedding constants.
    """
    d1 = law.delta1_envelope if delta1 is None else delta1
    visc_margin = params.mu - d1 / (2.0 * lambda0)
    visc_ok = visc_margin > 0.0
    denom = 2.0 * params.mu - d1 / lambda0
    rho1, rho2 = _rho_i(params, 1), _rho_i(params, 2)
    branches = []
    r = params.r
    ck = constants.ck if constants is not None else None
    cg = constants.cg if constants is not None else None

    if r > 3.0:
        if params.beta > 0.0 and ck is not None:
            rho3 = ((ck ** 2 / (2.0 * denom)) ** ((r - 1.0) / (r - 3.0))
                    * (r - 3.0) / (r - 1.0)
                    * (8.0 / (params.beta * (r - 1.0))) ** (2.0 / (r - 3.0)))
            need = rho1 + rho2 + rho3
            branches.append({
                "name": "r>3, load-independent",
                "applicable": True,
                "ok": bool(visc_ok and params.alpha >= need),
                "alpha_required": need,
            })
            rho3h = ck ** 2 / (2.0 * denom)
            need2 = rho1 + rho2 + rho3h
            branches.append({
                "name": "r>3, strong damping",
                "applicable": True,
                "ok": bool(visc_ok and params.alpha >= need2
                           and params.beta >= 4.0 * rho3h),
                "alpha_required": need2,
                "beta_required": 4.0 * rho3h,
            })
        else:
            missing = "beta > 0" if params.beta == 0.0 else "constant ck"
            branches.append({
                "name": "r>3 branches",
                "applicable": True, "ok": None,
                "note": f"unavailable: needs {missing}",
            })
    else:
        if ck is not None and cg is not None and K_tilde is not None:
            d = 2.0
            rho4 = ((cg * ck) ** (8.0 / (4.0 - d))
                    * (8.0 / (4.0 - d))
                    * ((4.0 + d) / (2.0 * denom)) ** ((4.0 + d) / (4.0 - d)))
            need = (rho4 * (cg * ck) ** (8.0 / (4.0 - d))
                    * K_tilde ** (4.0 / (4.0 - d)) + rho1 + rho2)
            branches.append({
                "name": "r in [1,3], small data",
                "applicable": True,
                "ok": bool(visc_ok and params.alpha > need),
                "alpha_required": need,
            })
        else:
            branches.append({
                "name": "r in [1,3], small data",
                "applicable": True, "ok": None,
                "note": "unavailable: needs ck, cg and the energy bound",
            })

    return UniquenessReport(delta1=d1, viscosity_ok=visc_ok,
                            viscosity_margin=float(visc_margin),
                            branches=branches)


@dataclass(frozen=True)
class ExistenceReport:
    ok: bool
    k1: float
    threshold: float      # 2 mu lambda0
    margin: float


def check_existence_condition(params: ModelParams, law: SlipLaw,
                              lambda0: float) -> ExistenceReport:
    """The solvability condition k1 < 2 mu lambda0 of the existence theory."""
    thr = 2.0 * params.mu * lambda0
    return ExistenceReport(ok=law.k1 < thr, k1=law.k1, threshold=float(thr),
                           margin=float(thr - law.k1))


# ---------------------------------------------------------------------------
# stability under load perturbations


@dataclass
class PerturbationStudy:
    """Solution changes under scaled load perturbations.

    rows: (t, dual_norm_of_load_diff, err_u_V, err_p_L2), one per
    perturbation size, in the order given.
    """

    baseline_u_V: float
    rows: np.ndarray


def perturbation_study(space: FeSpace, params: ModelParams, law: SlipLaw,
                       load, perturbation, sizes,
                       cfg: SolverConfig | None = None,
                       ops: Operators | None = None) -> PerturbationStudy:
    """Solve with load + t * perturbation for each t and record errors.

    Perturbed solves warm-start from the baseline state.  The theory
    gives ||u_t - u||_V -> 0 as the dual norm of the load difference
    vanishes; rows are ordered as the given sizes.
    """
    if cfg is None:
        cfg = SolverConfig()
    if ops is None:
        ops = Operators(space)
    base_vec = _as_load_vector(space, load)
    pert_vec = _as_load_vector(space, perturbation)
    base = solve_state(space, params, law, base_vec, cfg=cfg, ops=ops)
    if not base.converged:
        raise RuntimeError("baseline state solve did not converge")
    rows = []
    for t in sizes:
        sol = solve_state(space, params, law, base_vec + t * pert_vec,
                          cfg=cfg, ops=ops, u0=base.u, p0=base.p)
        if not sol.converged:
            raise RuntimeError(f"perturbed solve (t={t}) did not converge")
        du = sol.u - base.u
        dp = sol.p - base.p
        rows.append((t, dual_norm(space, ops, t * pert_vec),
                     ops.norm_V(du), ops.norm_L2_pressure(dp)))
    return PerturbationStudy(baseline_u_V=base.diagnostics["velocity_V_norm"],
                             rows=np.array(rows))
