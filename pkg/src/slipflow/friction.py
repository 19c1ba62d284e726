"""
Nonmonotone slip law on the top boundary and its spectral constants.

The slip bound is omega(t) = (a - b) e^{-rho t} + b with a > b > 0 and
rho > 0, a decreasing threshold.  The (nonconvex) superpotential is
j(z) = int_0^{|z|} omega(t) dt.  The boundary condition couples the
tangential traction to the Clarke subdifferential of j; its single
valued regularization used by the solver is

    T_eps(z) = omega(m) z / m,   m = sqrt(z^2 + eps^2).

T_eps is bounded by a, and T_eps'(z) >= -rho (a - b) uniformly in eps,
which is the one-sided slope bound the solvability theory needs.  The
tangent direction on the top edge is (1, 0), so the tangential trace of
a velocity field is just its x component there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import FeSpace, edge_rule, p2_edge_values


@dataclass(frozen=True)
class SlipLaw:
    """Exponentially decaying slip threshold with regularization eps_reg."""

    a: float
    b: float
    rho: float
    eps_reg: float = 1e-6

    def __post_init__(self):
        if not (self.a > self.b > 0):
            raise ValueError("slip law requires a > b > 0")
        if self.rho <= 0:
            raise ValueError("slip law requires rho > 0")
        if self.eps_reg <= 0:
            raise ValueError("regularization parameter must be positive")

    @property
    def k0(self) -> float:
        """Growth constant of the subdifferential: |xi| <= k0 + k1 |z|."""
        return self.a

    @property
    def k1(self) -> float:
        return 0.0

    @property
    def delta1_envelope(self) -> float:
        """Analytic bound on the relaxed monotonicity constant."""
        return self.rho * (self.a - self.b)


def omega(law: SlipLaw, t):
    return (law.a - law.b) * np.exp(-law.rho * np.asarray(t)) + law.b


def omega_prime(law: SlipLaw, t):
    return -law.rho * (law.a - law.b) * np.exp(-law.rho * np.asarray(t))


def slip_potential(law: SlipLaw, z):
    """j(z) = int_0^{|z|} omega(t) dt, evaluated in closed form."""
    z = np.abs(np.asarray(z))
    return (law.a - law.b) / law.rho * (1.0 - np.exp(-law.rho * z)) + law.b * z


def traction(law: SlipLaw, z):
    """Regularized tangential traction T_eps(z)."""
    z = np.asarray(z, dtype=float)
    m = np.sqrt(z * z + law.eps_reg ** 2)
    return omega(law, m) * z / m


def traction_derivative(law: SlipLaw, z):
    z = np.asarray(z, dtype=float)
    e2 = law.eps_reg ** 2
    m = np.sqrt(z * z + e2)
    return omega_prime(law, m) * (z * z) / (m * m) + omega(law, m) * e2 / m ** 3


def subgradient_selection(law: SlipLaw, s):
    """The selection g(s) = omega(|s|) sign(s) of the subdifferential of j."""
    s = np.asarray(s, dtype=float)
    return omega(law, np.abs(s)) * np.sign(s)


def directional_j0(law: SlipLaw, xi, eta):
    """Generalized directional derivative j0(xi; eta).

    j is continuously differentiable away from 0 with j'(z) =
    omega(|z|) sign(z); at 0 the subdifferential is [-omega(0), omega(0)]
    and j0(0; eta) = omega(0) |eta|.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    at0 = xi == 0.0
    out = omega(law, np.abs(xi)) * np.sign(xi) * eta
    return np.where(at0, omega(law, 0.0) * np.abs(eta), out)


@dataclass(frozen=True)
class Delta1Estimate:
    """Sampled relaxed-monotonicity constant of the slip graph."""

    value: float
    pair: tuple[float, float]
    envelope: float


def estimate_delta1(law: SlipLaw, smax: float = 5.0, num: int = 400) -> Delta1Estimate:
    """Estimate delta1 = sup -(g(s) - g(t))(s - t)/(s - t)^2 by sampling.

    The grid mixes a linear range up to smax with log-spaced points
    toward 0 from both sides, where the most negative secant slopes of
    g(s) = omega(|s|) sign(s) live.  Pairs closer than a 1e-3 relative
    spacing are skipped: their secants carry pure cancellation noise
    (g differences below machine precision relative to g itself) while
    contributing nothing beyond the adjacent log-spaced pairs.  The
    estimate stays within the analytic envelope rho (a - b) up to that
    noise floor.
    """
    lin = np.linspace(-smax, smax, num)
    logs = np.logspace(-6, np.log10(smax), num // 2)
    grid = np.unique(np.concatenate([lin, logs, -logs, [0.0]]))
    g = subgradient_selection(law, grid)
    ds = grid[:, None] - grid[None, :]
    dg = g[:, None] - g[None, :]
    ok = np.abs(ds) > 1e-3 * (np.abs(grid)[:, None] + np.abs(grid)[None, :]) + 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(ok, dg / ds, np.inf)
    i, j = np.unravel_index(np.argmin(slopes), slopes.shape)
    worst = slopes[i, j]
    return Delta1Estimate(
        value=float(max(0.0, -worst)),
        pair=(float(grid[i]), float(grid[j])),
        envelope=law.delta1_envelope,
    )


# ---------------------------------------------------------------------------
# boundary assembly on Gamma_1


def _edge_geometry(space: FeSpace):
    sd = space.gamma1_edge_sdofs
    p0 = space.mesh.nodes[sd[:, 0]]
    p1 = space.mesh.nodes[sd[:, 1]]
    return sd, np.linalg.norm(p1 - p0, axis=1)


def gamma1_length(space: FeSpace) -> float:
    return float(np.sum(_edge_geometry(space)[1]))


def friction_residual(space: FeSpace, law: SlipLaw, u: np.ndarray) -> np.ndarray:
    """Vector with entries int_{Gamma_1} T_eps(u_tau) (phi_i)_tau ds.

    Only x-component DOFs on the top edge participate; constrained
    corner rows are masked by the caller.
    """
    sd, lens = _edge_geometry(space)
    t, w = edge_rule(5)
    N = p2_edge_values(t)                   # (q, 3)
    uq = u[sd] @ N.T                        # (nE, q) tangential values
    wq = lens[:, None] * w[None, :]
    res_loc = np.einsum("eq,qk->ek", wq * traction(law, uq), N)
    res = np.zeros(space.ndof_v)
    np.add.at(res, sd.ravel(), res_loc.ravel())
    return res


def assemble_friction(space: FeSpace, law: SlipLaw, u: np.ndarray):
    """Residual and Jacobian of the regularized friction boundary term."""
    sd, lens = _edge_geometry(space)
    t, w = edge_rule(5)
    N = p2_edge_values(t)
    uq = u[sd] @ N.T
    wq = lens[:, None] * w[None, :]
    Tq = traction(law, uq)
    res_loc = np.einsum("eq,qk->ek", wq * Tq, N)
    dTq = traction_derivative(law, uq)
    jac_loc = np.einsum("eq,qk,ql->ekl", wq * dTq, N, N)
    res = np.zeros(space.ndof_v)
    np.add.at(res, sd.ravel(), res_loc.ravel())
    nd = space.ndof_v
    rows = np.repeat(sd[:, :, None], 3, axis=2).ravel()
    cols = np.repeat(sd[:, None, :], 3, axis=1).ravel()
    jac = sp.coo_matrix((jac_loc.ravel(), (rows, cols)), shape=(nd, nd)).tocsr()
    return res, jac


def slip_energy(space: FeSpace, law: SlipLaw, u: np.ndarray) -> float:
    """int_{Gamma_1} j(u_tau) ds with the exact superpotential."""
    sd, lens = _edge_geometry(space)
    t, w = edge_rule(5)
    N = p2_edge_values(t)
    uq = u[sd] @ N.T
    return float(np.sum(lens[:, None] * w[None, :] * slip_potential(law, uq)))


def gamma1_mass(space: FeSpace) -> sp.csr_matrix:
    """Tangential boundary mass on Gamma_1, full velocity-space shape.

    u @ M @ u is the squared L^2(Gamma_1) norm of the tangential trace.
    """
    sd, lens = _edge_geometry(space)
    t, w = edge_rule(5)
    N = p2_edge_values(t)
    wq = lens[:, None] * w[None, :]
    blk = np.einsum("eq,qk,ql->ekl", wq, N, N)
    rows = np.repeat(sd[:, :, None], 3, axis=2).ravel()
    cols = np.repeat(sd[:, None, :], 3, axis=1).ravel()
    nd = space.ndof_v
    return sp.coo_matrix((blk.ravel(), (rows, cols)), shape=(nd, nd)).tocsr()


# ---------------------------------------------------------------------------
# trace constant lambda0


@dataclass(frozen=True)
class SpectralConstants:
    """Smallest eigenvalue of ||.||_V^2 against the Gamma_1 trace norm.

    lambda0 satisfies ||v_tau||_{L2(Gamma_1)}^2 <= ||v||_V^2 / lambda0
    for all admissible v, with equality at the stored eigenfunction.
    """

    lambda0: float
    mesh_n: int
    num_trace_dofs: int
    eigenfunction: np.ndarray


def estimate_lambda0(space: FeSpace, A: sp.csr_matrix | None = None) -> SpectralConstants:
    """Solve the trace eigenproblem by Schur reduction onto Gamma_1.

    The pencil is (1/2) A x = lambda M_Gamma x on the constrained space;
    M_Gamma is supported on the free tangential trace DOFs only, so all
    other DOFs are eliminated exactly and a small dense symmetric
    generalized eigenproblem remains.
    """
    from .forms import assemble_a
    if A is None:
        A = assemble_a(space)
    G = 0.5 * A
    free = space.free_v
    trace = np.intersect1d(space.gamma1_sdofs,
                           np.flatnonzero(~space.velocity_mask))
    Mg = gamma1_mass(space)

    free_pos = -np.ones(space.ndof_v, dtype=np.int64)
    free_pos[free] = np.arange(len(free))
    bpos = free_pos[trace]
    ipos = np.setdiff1d(np.arange(len(free)), bpos)

    Gff = G[np.ix_(free, free)].tocsc()
    Gbb = Gff[np.ix_(bpos, bpos)].toarray()
    Gbi = Gff[np.ix_(bpos, ipos)].toarray()
    Gii = Gff[np.ix_(ipos, ipos)].tocsc()
    lu = spla.splu(Gii)
    X = lu.solve(Gbi.T)                       # Gii^{-1} Gib
    S = Gbb - Gbi @ X
    Mb = Mg[np.ix_(trace, trace)].toarray()
    vals, vecs = la.eigh(S, Mb)
    lam0 = float(vals[0])
    xb = vecs[:, 0]
    xi = -X @ xb
    full = np.zeros(space.ndof_v)
    full[trace] = xb
    full[free[ipos]] = xi
    return SpectralConstants(
        lambda0=lam0,
        mesh_n=space.mesh.n,
        num_trace_dofs=len(trace),
        eigenfunction=full,
    )
