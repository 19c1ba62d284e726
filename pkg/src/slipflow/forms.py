"""
Weak forms of the stationary damped Navier-Stokes operator.

With V the P2 velocity space and Q the P1 pressure space, the forms are

    a(u, v)   = int 2 eps(u):eps(v)          (viscous, a(u,u) = 2||u||_V^2)
    a0(u, v)  = int u . v                    (velocity mass)
    d(v, q)   = -int q div v                 (velocity-pressure coupling)
    b(u, v, w)= int (u . grad) v . w         (convection)
    c_s(u, v) = int |u|^{s-1} u . v          (damping with exponent s)

assemble_oseen(w) returns the matrix of b(w, ., .), i.e. the transport
field sits in the first slot.  Matrices are scipy CSR; velocity DOF
vectors are stacked [x block; y block] as described in fem.py.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import (FeSpace, control_at_quad, eldof_scalar, velocity_at_quad,
                  velocity_grad_at_quad)


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the flow model.

    mu: viscosity, alpha: linear damping, beta: coefficient of the
    |u|^{r-1}u damping term, kappa: coefficient of the |u|^{q-1}u term
    (nonpositive), r and q the corresponding exponents.
    """

    mu: float
    alpha: float = 0.0
    beta: float = 0.0
    kappa: float = 0.0
    r: float = 3.0
    q: float = 1.0

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("viscosity mu must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("damping coefficients alpha, beta must be >= 0")
        if self.kappa > 0:
            raise ValueError("kappa must be <= 0")
        if self.r < 1:
            raise ValueError("exponent r must be >= 1")
        if not (1 <= self.q < self.r):
            raise ValueError("exponent q must satisfy 1 <= q < r")


# ---------------------------------------------------------------------------
# scatter helpers


def _scatter_matrix(rows, cols, blocks, shape):
    """Assemble (T, a, b) element blocks into a CSR matrix."""
    T, a, b = blocks.shape
    r = np.repeat(rows[:, :, None], b, axis=2).ravel()
    c = np.repeat(cols[:, None, :], a, axis=1).ravel()
    return sp.coo_matrix((blocks.ravel(), (r, c)), shape=shape).tocsr()


def _scatter_vector(dofs, vals, size):
    out = np.zeros(size)
    np.add.at(out, dofs.ravel(), vals.ravel())
    return out


def _vdofs(space: FeSpace):
    """(T, 6) x-component and y-component velocity DOFs per triangle."""
    sd = eldof_scalar(space)
    return sd, sd + space.num_scalar


# ---------------------------------------------------------------------------
# bilinear forms


def assemble_a(space: FeSpace) -> sp.csr_matrix:
    """Viscous form a(u, v) = int 2 eps(u):eps(v)."""
    G = space.p2grad
    w = space.qw
    gx, gy = G[..., 0], G[..., 1]
    kxx = 2 * np.einsum("tk,tki,tkj->tij", w, gx, gx) \
        + np.einsum("tk,tki,tkj->tij", w, gy, gy)
    kyy = 2 * np.einsum("tk,tki,tkj->tij", w, gy, gy) \
        + np.einsum("tk,tki,tkj->tij", w, gx, gx)
    kxy = np.einsum("tk,tki,tkj->tij", w, gy, gx)
    xd, yd = _vdofs(space)
    nd = space.ndof_v
    return (_scatter_matrix(xd, xd, kxx, (nd, nd))
            + _scatter_matrix(yd, yd, kyy, (nd, nd))
            + _scatter_matrix(xd, yd, kxy, (nd, nd))
            + _scatter_matrix(yd, xd, kxy.transpose(0, 2, 1), (nd, nd)))


def assemble_a0(space: FeSpace) -> sp.csr_matrix:
    """Velocity mass matrix (a0(u, v) = int u . v)."""
    m = np.einsum("tk,ki,kj->tij", space.qw, space.p2v, space.p2v)
    xd, yd = _vdofs(space)
    nd = space.ndof_v
    return (_scatter_matrix(xd, xd, m, (nd, nd))
            + _scatter_matrix(yd, yd, m, (nd, nd)))


def assemble_d(space: FeSpace) -> sp.csr_matrix:
    """Coupling d(v, q) = -int q div v, shape (ndof_p, ndof_v)."""
    G = space.p2grad
    w = space.qw
    dx = -np.einsum("tk,ki,tkj->tij", w, space.p1v, G[..., 0])
    dy = -np.einsum("tk,ki,tkj->tij", w, space.p1v, G[..., 1])
    xd, yd = _vdofs(space)
    rows = space.mesh.triangles
    shape = (space.ndof_p, space.ndof_v)
    return (_scatter_matrix(rows, xd, dx, shape)
            + _scatter_matrix(rows, yd, dy, shape))


def assemble_pressure_mass(space: FeSpace) -> sp.csr_matrix:
    m = np.einsum("tk,ki,kj->tij", space.qw, space.p1v, space.p1v)
    t = space.mesh.triangles
    n = space.ndof_p
    return _scatter_matrix(t, t, m, (n, n))


def assemble_control_mass(space: FeSpace) -> sp.csr_matrix:
    """Mass matrix of the P1 vector control space (block diagonal)."""
    mp = assemble_pressure_mass(space)
    return sp.block_diag([mp, mp]).tocsr()


def pressure_integral_vector(space: FeSpace) -> np.ndarray:
    """Vector of int psi_i; the domain has unit area so ivec @ p = mean(p)."""
    vals = np.einsum("tk,ki->ti", space.qw, space.p1v)
    return _scatter_vector(space.mesh.triangles, vals, space.ndof_p)


def assemble_load_matrix(space: FeSpace) -> sp.csr_matrix:
    """Maps control DOFs to the velocity load vector, (ndof_v, ndof_c)."""
    m = np.einsum("tk,ki,kj->tij", space.qw, space.p2v, space.p1v)
    xd, yd = _vdofs(space)
    t = space.mesh.triangles
    nv = space.mesh.num_nodes
    shape = (space.ndof_v, space.ndof_c)
    return (_scatter_matrix(xd, t, m, shape)
            + _scatter_matrix(yd, nv + t, m, shape))


def assemble_load(space: FeSpace, f) -> np.ndarray:
    """Load vector int f . v for a callable f(x, y) -> (2, m)."""
    x = space.qp[..., 0].ravel()
    y = space.qp[..., 1].ravel()
    fv = np.asarray(f(x, y)).reshape(2, *space.qw.shape)
    vx = np.einsum("tk,ki->ti", space.qw * fv[0], space.p2v)
    vy = np.einsum("tk,ki->ti", space.qw * fv[1], space.p2v)
    xd, yd = _vdofs(space)
    out = np.zeros(space.ndof_v)
    np.add.at(out, xd.ravel(), vx.ravel())
    np.add.at(out, yd.ravel(), vy.ravel())
    return out


def assemble_pressure_load(space: FeSpace, g) -> np.ndarray:
    """Vector int g psi_i for a scalar callable g(x, y)."""
    x = space.qp[..., 0].ravel()
    y = space.qp[..., 1].ravel()
    gv = np.asarray(g(x, y)).reshape(space.qw.shape)
    vals = np.einsum("tk,ki->ti", space.qw * gv, space.p1v)
    return _scatter_vector(space.mesh.triangles, vals, space.ndof_p)


def integrate_scalar(space: FeSpace, g) -> float:
    """int g over the domain by the space's quadrature rule."""
    x = space.qp[..., 0].ravel()
    y = space.qp[..., 1].ravel()
    gv = np.asarray(g(x, y)).reshape(space.qw.shape)
    return float(np.sum(space.qw * gv))


def integrate_vector_square(space: FeSpace, f) -> float:
    """int |f|^2 for a vector callable f(x, y) -> (2, m)."""
    x = space.qp[..., 0].ravel()
    y = space.qp[..., 1].ravel()
    fv = np.asarray(f(x, y)).reshape(2, *space.qw.shape)
    return float(np.sum(space.qw * (fv[0] ** 2 + fv[1] ** 2)))


def assemble_curl_stiffness(space: FeSpace) -> sp.csr_matrix:
    """Matrix of int curl(u) curl(v) with curl u = d_x u2 - d_y u1."""
    G = space.p2grad
    w = space.qw
    gx, gy = G[..., 0], G[..., 1]
    kxx = np.einsum("tk,tki,tkj->tij", w, gy, gy)
    kyy = np.einsum("tk,tki,tkj->tij", w, gx, gx)
    kxy = -np.einsum("tk,tki,tkj->tij", w, gy, gx)
    xd, yd = _vdofs(space)
    nd = space.ndof_v
    return (_scatter_matrix(xd, xd, kxx, (nd, nd))
            + _scatter_matrix(yd, yd, kyy, (nd, nd))
            + _scatter_matrix(xd, yd, kxy, (nd, nd))
            + _scatter_matrix(yd, xd, kxy.transpose(0, 2, 1), (nd, nd)))


# ---------------------------------------------------------------------------
# convection


def _field_at_quad(space: FeSpace, w):
    """Velocity values at quadrature points from DOFs or a callable."""
    if callable(w):
        x = space.qp[..., 0].ravel()
        y = space.qp[..., 1].ravel()
        vals = np.asarray(w(x, y)).reshape(2, *space.qw.shape)
        return np.stack([vals[0], vals[1]], axis=-1)
    return velocity_at_quad(space, w)


def assemble_oseen(space: FeSpace, w) -> sp.csr_matrix:
    """Matrix of b(w, u, v) = int (w . grad) u . v for fixed transport w.

    w may be a velocity DOF vector or a callable; the callable path
    evaluates the transport field exactly at the quadrature points.
    """
    wq = _field_at_quad(space, w)
    wdg = np.einsum("tkb,tkjb->tkj", wq, space.p2grad)
    m = np.einsum("tk,tkj,ki->tij", space.qw, wdg, space.p2v)
    xd, yd = _vdofs(space)
    nd = space.ndof_v
    return (_scatter_matrix(xd, xd, m, (nd, nd))
            + _scatter_matrix(yd, yd, m, (nd, nd)))


def assemble_conv_cross(space: FeSpace, w: np.ndarray) -> sp.csr_matrix:
    """Matrix of b(u, w, v) = int (u . grad) w . v for fixed w (DOF vector)."""
    gw = velocity_grad_at_quad(space, w)           # (T, K, 2, 2)
    xd, yd = _vdofs(space)
    dofs = (xd, yd)
    nd = space.ndof_v
    out = sp.csr_matrix((nd, nd))
    for a in range(2):          # test component
        for b in range(2):      # trial component
            m = np.einsum("tk,ki,kj->tij", space.qw * gw[..., a, b],
                          space.p2v, space.p2v)
            out = out + _scatter_matrix(dofs[a], dofs[b], m, (nd, nd))
    return out


def convection_residual(space: FeSpace, u: np.ndarray) -> np.ndarray:
    """Vector with entries b(u, u, phi_i)."""
    uq = velocity_at_quad(space, u)
    gu = velocity_grad_at_quad(space, u)
    conv = np.einsum("tkb,tkab->tka", uq, gu)
    vx = np.einsum("tk,ki->ti", space.qw * conv[..., 0], space.p2v)
    vy = np.einsum("tk,ki->ti", space.qw * conv[..., 1], space.p2v)
    xd, yd = _vdofs(space)
    out = np.zeros(space.ndof_v)
    np.add.at(out, xd.ravel(), vx.ravel())
    np.add.at(out, yd.ravel(), vy.ravel())
    return out


# ---------------------------------------------------------------------------
# power-law damping


def damping_pointwise(u: np.ndarray, s: float) -> np.ndarray:
    """|u|^{s-1} u evaluated row-wise on an (..., 2) array."""
    m = np.linalg.norm(u, axis=-1)
    if s == 1.0:
        return u.copy()
    return np.power(m, s - 1.0)[..., None] * u


def damping_gateaux(u: np.ndarray, v: np.ndarray, s: float) -> np.ndarray:
    """Directional derivative of u -> |u|^{s-1}u at u in direction v.

    Rows with u = 0 return 0 for 1 < s < 3 (the map is differentiable
    there with derivative 0), v itself for s = 1, and 0 for s >= 3.
    """
    if s == 1.0:
        return v.copy()
    m = np.linalg.norm(u, axis=-1)
    safe = np.where(m > 1e-100, m, 1.0)
    udotv = np.einsum("...a,...a->...", u, v)
    out = np.power(safe, s - 1.0)[..., None] * v \
        + (s - 1.0) * (np.power(safe, s - 3.0) * udotv)[..., None] * u
    out[m <= 1e-100] = 0.0
    return out


def damping_residual(space: FeSpace, u: np.ndarray, s: float) -> np.ndarray:
    """Vector with entries c_s(u, phi_i) = int |u|^{s-1} u . phi_i."""
    uq = velocity_at_quad(space, u)
    f = damping_pointwise(uq, s)
    vx = np.einsum("tk,ki->ti", space.qw * f[..., 0], space.p2v)
    vy = np.einsum("tk,ki->ti", space.qw * f[..., 1], space.p2v)
    xd, yd = _vdofs(space)
    out = np.zeros(space.ndof_v)
    np.add.at(out, xd.ravel(), vx.ravel())
    np.add.at(out, yd.ravel(), vy.ravel())
    return out


def damping_jacobian(space: FeSpace, u: np.ndarray, s: float) -> sp.csr_matrix:
    """Derivative of the damping residual at u (symmetric PSD for s >= 1)."""
    uq = velocity_at_quad(space, u)
    m = np.linalg.norm(uq, axis=-1)
    if s == 1.0:
        diag = np.ones_like(m)
        rank1 = np.zeros_like(m)
    else:
        safe = np.where(m > 1e-100, m, 1.0)
        diag = np.where(m > 1e-100, np.power(safe, s - 1.0), 0.0)
        rank1 = np.where(m > 1e-100, (s - 1.0) * np.power(safe, s - 3.0), 0.0)
    xd, yd = _vdofs(space)
    dofs = (xd, yd)
    nd = space.ndof_v
    out = sp.csr_matrix((nd, nd))
    for a in range(2):
        for b in range(2):
            coef = rank1 * uq[..., a] * uq[..., b]
            if a == b:
                coef = coef + diag
            blk = np.einsum("tk,ki,kj->tij", space.qw * coef,
                            space.p2v, space.p2v)
            out = out + _scatter_matrix(dofs[a], dofs[b], blk, (nd, nd))
    return out


def damping_energy(space: FeSpace, u: np.ndarray, s: float) -> float:
    """int |u|^{s+1}, the natural power of the L^{s+1} norm."""
    uq = velocity_at_quad(space, u)
    m = np.linalg.norm(uq, axis=-1)
    return float(np.sum(space.qw * np.power(m, s + 1.0)))


# ---------------------------------------------------------------------------
# norms and misc helpers


def curl_at_quad(space: FeSpace, u: np.ndarray) -> np.ndarray:
    gu = velocity_grad_at_quad(space, u)
    return gu[..., 1, 0] - gu[..., 0, 1]


def divergence_at_quad(space: FeSpace, u: np.ndarray) -> np.ndarray:
    gu = velocity_grad_at_quad(space, u)
    return gu[..., 0, 0] + gu[..., 1, 1]
