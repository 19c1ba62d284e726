"""Standalone verification checks for the discrete building blocks.

Each check exercises one analytic property the solver and the
conditional theory rely on (pointwise inequalities for the power
damping, directional derivatives, bilinear-form identities, the
discrete inf-sup constant, and the boundary trace constant).  Checks
return a CheckReport with the raw numbers so a failure points at the
broken ingredient instead of at an end-to-end symptom.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import build_space, velocity_grad_at_quad
from .forms import (assemble_a, assemble_d, assemble_oseen,
                    assemble_pressure_mass, damping_energy, damping_gateaux,
                    damping_pointwise, damping_residual)
from .friction import estimate_lambda0, gamma1_mass
from .meshing import build_unit_square


@dataclass
class CheckReport:
    """Outcome of one verification check."""

    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def summary(self) -> str:
        return f"{self.name}: {'PASS' if self.passed else 'FAIL'}"


# ---------------------------------------------------------------------------
# pointwise inequalities for z -> |z|^{r-1} z


def monotonicity_margins(x: np.ndarray, y: np.ndarray, r: float):
    """Margins of the two pointwise damping inequalities on pairs (x, y).

    Returns (monotone, strong) where monotone is the pairing
    (F(x) - F(y)) . (x - y) and strong is monotone minus
    2^{1-r} |x - y|^{r+1}; both are nonnegative in exact arithmetic.
    """
    fx = damping_pointwise(x, r)
    fy = damping_pointwise(y, r)
    d = x - y
    monotone = np.einsum("...a,...a->...", fx - fy, d)
    dist = np.linalg.norm(d, axis=-1)
    strong = monotone - 2.0 ** (1.0 - r) * dist ** (r + 1.0)
    return monotone, strong


def check_pointwise_monotonicity(rng: np.random.Generator,
                                 num_pairs: int = 100_000,
                                 exponents=(1.0, 2.0, 3.0, 3.5, 5.0),
                                 slack: float = 1e-12) -> CheckReport:
    """Monotonicity and strong monotonicity of the damping nonlinearity."""
    details = {}
    passed = True
    for r in exponents:
        x = rng.standard_normal((num_pairs, 2))
        y = rng.standard_normal((num_pairs, 2))
        monotone, strong = monotonicity_margins(x, y, r)
        bad = int(np.sum(monotone < -slack) + np.sum(strong < -slack))
        details[f"r={r}"] = {
            "violations": bad,
            "min_monotone": float(monotone.min()),
            "min_strong": float(strong.min()),
        }
        passed = passed and bad == 0
    details["num_pairs"] = num_pairs
    details["slack"] = slack
    return CheckReport("pointwise_monotonicity", passed, details)


def check_gateaux(rng: np.random.Generator, num: int = 1000,
                  tol: float = 1e-7) -> CheckReport:
    """Directional derivative of |u|^{s-1}u against central differences.

    One batch per derivative branch: s = 1 (linear), 1 < s < 3 and
    s >= 3 (the generic formula with different near-zero behaviour).
    """
    details = {}
    passed = True
    for s in (1.0, 2.0, 3.5):
        u = rng.standard_normal((num, 2))
        v = rng.standard_normal((num, 2))
        h = 1e-6
        fd = (damping_pointwise(u + h * v, s)
              - damping_pointwise(u - h * v, s)) / (2.0 * h)
        g = damping_gateaux(u, v, s)
        scale = 1.0 + np.linalg.norm(g, axis=-1)
        err = float(np.max(np.linalg.norm(g - fd, axis=-1) / scale))
        details[f"s={s}"] = {"max_rel_err": err}
        passed = passed and err <= tol
    details["tol"] = tol
    return CheckReport("gateaux_fd", passed, details)


# ---------------------------------------------------------------------------
# bilinear and trilinear form identities


def check_form_identities(rng: np.random.Generator, n: int = 8,
                          transport_n: int = 16,
                          num_fields: int = 100,
                          identity_tol: float = 1e-10,
                          transport_tol: float = 1e-6,
                          transport_field=None) -> CheckReport:
    """Quadratic identities of a and c, and skewness of the convection.

    a(u, u) must equal twice the squared strain seminorm and c_s(u, u)
    must equal the integral of |u|^{s+1}; both sides are computed
    through different code paths.  The convection form b(w, v, v) must
    vanish for a divergence-free transport field w tangent to the
    boundary; with w evaluated exactly at quadrature points only the
    quadrature error survives.
    """
    space = build_space(build_unit_square(n))
    A = assemble_a(space)
    details = {}
    max_a = 0.0
    max_c = 0.0
    for _ in range(num_fields):
        u = rng.standard_normal(space.ndof_v)
        gu = velocity_grad_at_quad(space, u)
        eps = 0.5 * (gu + gu.transpose(0, 1, 3, 2))
        seminorm2 = float(np.sum(space.qw * np.einsum("tkab,tkab->tk",
                                                      eps, eps)))
        lhs = float(u @ (A @ u))
        max_a = max(max_a, abs(lhs - 2.0 * seminorm2) / max(1.0, abs(lhs)))
        for s in (2.0, 3.0, 3.5):
            cu = float(u @ damping_residual(space, u, s))
            en = damping_energy(space, u, s)
            max_c = max(max_c, abs(cu - en) / max(1.0, abs(en)))
    details["max_rel_err_a"] = max_a
    details["max_rel_err_c"] = max_c

    if transport_field is None:
        from .catalog import get_benchmark
        transport_field = get_benchmark(3).u_target
    tspace = build_space(build_unit_square(transport_n))
    B = assemble_oseen(tspace, transport_field)
    max_b = 0.0
    for _ in range(20):
        v = rng.standard_normal(tspace.ndof_v)
        v[tspace.velocity_mask] = 0.0
        v /= np.linalg.norm(v)
        max_b = max(max_b, abs(float(v @ (B @ v))))
    details["max_abs_skew"] = max_b
    details["identity_tol"] = identity_tol
    details["transport_tol"] = transport_tol
    passed = (max_a <= identity_tol and max_c <= identity_tol
              and max_b <= transport_tol)
    return CheckReport("form_identities", passed, details)


# ---------------------------------------------------------------------------
# discrete inf-sup constant


def _theta1_from(D, G, Mp, free: np.ndarray) -> float:
    """Smallest nonzero singular value of the scaled divergence operator.

    Computes the generalized eigenvalues of D G^{-1} D^T against the
    pressure mass on the velocity space restricted to free; the smallest
    eigenvalue is zero (constant pressures) and the square root of the
    next one is the inf-sup constant.
    """
    Df = D[:, free].tocsc()
    Gff = G[np.ix_(free, free)].tocsc()
    lu = spla.splu(Gff)
    X = lu.solve(Df.T.toarray())
    S = Df @ X
    vals = la.eigh(S, Mp.toarray(), eigvals_only=True)
    return float(np.sqrt(max(vals[1], 0.0)))


def clamped_interior(space) -> np.ndarray:
    """Velocity DOFs with both components free when the whole boundary
    is clamped (the reference setting for the inf-sup computation)."""
    interior = space.scalar_class == 0
    keep = np.concatenate([interior, interior])
    return np.flatnonzero(keep)


def theta1_taylor_hood(n: int) -> float:
    """Inf-sup constant of the velocity/pressure pair on mesh size n."""
    space = build_space(build_unit_square(n))
    G = 0.5 * assemble_a(space)
    D = assemble_d(space)
    Mp = assemble_pressure_mass(space)
    return _theta1_from(D, G, Mp, clamped_interior(space))


def theta1_equal_order(n: int) -> float:
    """Inf-sup constant of the unstable equal-order pair on mesh size n.

    Both velocity components and the pressure are piecewise linear on
    the same mesh; the constant collapses towards zero as spurious
    pressure modes appear, which is the negative control for the
    stability check.
    """
    mesh = build_unit_square(n)
    space = build_space(mesh)
    tris = mesh.triangles
    nv = mesh.num_nodes
    grads = space.p1grad                      # (T, 3, 2), constant per cell
    areas = space.areas
    nd = 2 * nv

    rows = np.repeat(tris, 3, axis=1)
    cols = np.tile(tris, (1, 3))

    def scatter(blocks, rr, cc, shape):
        return sp.coo_matrix((blocks.ravel(), (rr.ravel(), cc.ravel())),
                             shape=shape).tocsr()

    gx, gy = grads[..., 0], grads[..., 1]
    kxx = areas[:, None, None] * (2.0 * gx[:, :, None] * gx[:, None, :]
                                  + gy[:, :, None] * gy[:, None, :])
    kyy = areas[:, None, None] * (2.0 * gy[:, :, None] * gy[:, None, :]
                                  + gx[:, :, None] * gx[:, None, :])
    kxy = areas[:, None, None] * gy[:, :, None] * gx[:, None, :]
    A1 = (scatter(kxx, rows, cols, (nd, nd))
          + scatter(kyy, rows + nv, cols + nv, (nd, nd))
          + scatter(kxy, rows, cols + nv, (nd, nd))
          + scatter(kxy.transpose(0, 2, 1), rows + nv, cols, (nd, nd)))

    # -int psi div(v) with P1 pressure and P1 velocity: div(v) is
    # constant per cell and int psi over a cell is area / 3.
    third = areas[:, None, None] / 3.0
    dx = -third * np.ones((1, 3, 1)) * gx[:, None, :]
    dy = -third * np.ones((1, 3, 1)) * gy[:, None, :]
    prow = np.repeat(tris, 3, axis=1)
    vcol = np.tile(tris, (1, 3))
    D1 = (scatter(dx, prow, vcol, (nv, nd))
          + scatter(dy, prow, vcol + nv, (nv, nd)))

    x = mesh.nodes[:, 0]
    y = mesh.nodes[:, 1]
    on_bdry = (np.isclose(x, 0.0) | np.isclose(x, 1.0)
               | np.isclose(y, 0.0) | np.isclose(y, 1.0))
    interior = ~on_bdry
    free = np.flatnonzero(np.concatenate([interior, interior]))

    Mp1 = assemble_pressure_mass(space)[:nv, :nv]
    return _theta1_from(D1, 0.5 * A1, Mp1, free)


def check_inf_sup(ns=(2, 4, 8), floor: float = 0.1,
                  variation_tol: float = 0.2,
                  unstable_n: int = 8,
                  unstable_ceiling: float = 1e-3) -> CheckReport:
    """Mesh-uniform inf-sup constant, with an equal-order negative control."""
    thetas = {n: theta1_taylor_hood(n) for n in ns}
    variation = abs(thetas[ns[-1]] - thetas[ns[-2]]) / thetas[ns[-2]]
    bad = theta1_equal_order(unstable_n)
    passed = (all(t >= floor for t in thetas.values())
              and variation < variation_tol
              and bad < unstable_ceiling)
    details = {
        "theta1": {str(n): t for n, t in thetas.items()},
        "variation": variation,
        "equal_order_theta1": bad,
        "floor": floor,
        "variation_tol": variation_tol,
        "unstable_ceiling": unstable_ceiling,
    }
    return CheckReport("inf_sup", passed, details)


# ---------------------------------------------------------------------------
# boundary trace constant


def check_trace_constant(rng: np.random.Generator, ns=(8, 16),
                         num_fields: int = 100,
                         drift_tol: float = 0.05,
                         eig_tol: float = 1e-8) -> CheckReport:
    """Trace inequality on random fields and stability of lambda0.

    On the constrained velocity space the squared tangential trace on
    the slip boundary is bounded by the squared strain seminorm over
    lambda0; the eigenfunction attains the bound with equality.
    """
    lams = {}
    details = {}
    passed = True
    for n in ns:
        space = build_space(build_unit_square(n))
        A = assemble_a(space)
        spectral = estimate_lambda0(space, A)
        lams[n] = spectral.lambda0
        Mg = gamma1_mass(space)
        G = 0.5 * A
        worst = 0.0
        for _ in range(num_fields):
            v = rng.standard_normal(space.ndof_v)
            v[space.velocity_mask] = 0.0
            trace2 = float(v @ (Mg @ v))
            semi2 = float(v @ (G @ v))
            worst = max(worst, spectral.lambda0 * trace2 - semi2)
        e = spectral.eigenfunction
        eq_gap = abs(spectral.lambda0 * float(e @ (Mg @ e)) - float(e @ (G @ e)))
        details[f"n={n}"] = {
            "lambda0": spectral.lambda0,
            "max_inequality_violation": worst,
            "eigen_equality_gap": eq_gap,
        }
        passed = passed and worst <= 1e-10 and eq_gap <= eig_tol
    drift = abs(lams[ns[-1]] - lams[ns[0]]) / lams[ns[0]]
    details["relative_drift"] = drift
    details["drift_tol"] = drift_tol
    passed = passed and drift <= drift_tol
    return CheckReport("trace_constant", passed, details)


# ---------------------------------------------------------------------------
# driver


def run_all(seed: int = 0) -> list[CheckReport]:
    """Run every check with a fixed seed and return the reports."""
    rng = np.random.default_rng(seed)
    return [
        check_pointwise_monotonicity(rng),
        check_gateaux(rng),
        check_form_identities(rng),
        check_inf_sup(),
        check_trace_constant(rng),
    ]


def reports_to_json(reports: list[CheckReport]) -> str:
    payload = {r.name: {"passed": r.passed, "details": r.details}
               for r in reports}
    return json.dumps(payload, indent=2, sort_keys=True)
