"""
Taylor-Hood finite elements on the triangulated unit square.

Velocity: continuous piecewise quadratic (P2) vector fields, pressure:
continuous piecewise linear (P1), control: P1 vector fields.  Scalar P2
degrees of freedom are the mesh vertices followed by the edge midpoints;
a vector field is stored stacked, all x components first, then all y
components.  Pressure and control DOFs are the vertices.

Essential conditions: on Gamma_0 both velocity components vanish, on
Gamma_1 (the open top edge) only the normal component, i.e. the y
component, vanishes.  The corners (0,1) and (1,1) belong to Gamma_0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .meshing import TriMesh, locate_points, triangle_areas

# scalar DOF classification
INTERIOR = 0
SLIP = 1      # on Gamma_1: tangential (x) free, normal (y) clamped
NOSLIP = 2    # on Gamma_0: both components clamped


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference triangle {x,y >= 0, x+y <= 1}.

    Built as a conical product of a Gauss-Jacobi(1,0) rule in x and a
    Gauss-Legendre rule in the collapsed y direction; with npts points
    per direction it integrates polynomials of total degree 2*npts - 1
    exactly and all weights are positive.  Weights sum to the reference
    area 1/2.
    """

    points: np.ndarray    # (K, 2)
    weights: np.ndarray   # (K,)


def triangle_rule(npts: int = 5) -> QuadratureRule:
    xj, wj = roots_jacobi(npts, 1.0, 0.0)
    t = 0.5 * (xj + 1.0)
    wt = 0.25 * wj
    xl, wl = leggauss(npts)
    s = 0.5 * (xl + 1.0)
    ws = 0.5 * wl
    T, S = np.meshgrid(t, s, indexing="ij")
    WT, WS = np.meshgrid(wt, ws, indexing="ij")
    x = T.ravel()
    y = (S * (1.0 - T)).ravel()
    w = (WT * WS).ravel()
    return QuadratureRule(points=np.column_stack([x, y]), weights=w)


def edge_rule(npts: int = 5):
    """Gauss-Legendre rule on the reference edge [0,1], degree 2*npts-1."""
    x, w = leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _bary(pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of reference points, shape (K, 3)."""
    return np.column_stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]])


def p2_values(lam: np.ndarray) -> np.ndarray:
    """P2 basis values from barycentric coordinates, shape (K, 6).

    Local order: three vertex functions, then the midpoint functions of
    the local edges (0,1), (1,2), (2,0).
    """
    L0, L1, L2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        L0 * (2 * L0 - 1), L1 * (2 * L1 - 1), L2 * (2 * L2 - 1),
        4 * L0 * L1, 4 * L1 * L2, 4 * L2 * L0,
    ])


def p2_bary_grads(lam: np.ndarray) -> np.ndarray:
    """Derivatives of the P2 basis wrt barycentric coords, (K, 6, 3)."""
    K = lam.shape[0]
    L0, L1, L2 = lam[:, 0], lam[:, 1], lam[:, 2]
    d = np.zeros((K, 6, 3))
    d[:, 0, 0] = 4 * L0 - 1
    d[:, 1, 1] = 4 * L1 - 1
    d[:, 2, 2] = 4 * L2 - 1
    d[:, 3, 0] = 4 * L1
    d[:, 3, 1] = 4 * L0
    d[:, 4, 1] = 4 * L2
    d[:, 4, 2] = 4 * L1
    d[:, 5, 2] = 4 * L0
    d[:, 5, 0] = 4 * L2
    return d


def p2_edge_values(t: np.ndarray) -> np.ndarray:
    """Trace of P2 on an edge: quadratic basis at parameter t in [0,1].

    Order: the two endpoint functions, then the midpoint function.
    """
    return np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])


@dataclass(frozen=True)
class FeSpace:
    """Assembled geometric and basis data for one mesh.

    All per-element arrays are indexed by triangle.  eldof_scalar maps a
    triangle to its six scalar P2 DOFs, eldof_p to its three pressure
    DOFs.  Velocity DOF k of component c sits at index c*num_scalar + k.
    """

    mesh: TriMesh
    quad: QuadratureRule
    edges: np.ndarray           # (E, 2) vertex pairs
    tri_edges: np.ndarray       # (T, 3) edge index per local edge
    num_scalar: int             # vertices + edges
    ndof_v: int                 # 2 * num_scalar
    ndof_p: int                 # vertices
    ndof_c: int                 # 2 * vertices
    scalar_coords: np.ndarray   # (num_scalar, 2) vertices then midpoints
    scalar_class: np.ndarray    # (num_scalar,) INTERIOR / SLIP / NOSLIP
    velocity_mask: np.ndarray   # (ndof_v,) True where clamped
    free_v: np.ndarray          # indices of unconstrained velocity DOFs
    areas: np.ndarray           # (T,)
    qw: np.ndarray              # (T, K) physical quadrature weights
    qp: np.ndarray              # (T, K, 2) physical quadrature points
    p1v: np.ndarray             # (K, 3) P1 values at quadrature points
    p2v: np.ndarray             # (K, 6) P2 values at quadrature points
    p1grad: np.ndarray          # (T, 3, 2) gradients of barycentric coords
    p2grad: np.ndarray          # (T, K, 6, 2) physical P2 gradients
    gamma1_edge_sdofs: np.ndarray  # (nE, 3) scalar DOFs per top edge
    gamma1_sdofs: np.ndarray    # scalar DOFs on the closure of Gamma_1

    @property
    def h(self) -> float:
        return float(np.sqrt(2.0) / self.mesh.n)


def build_space(mesh: TriMesh, quad_npts: int = 5) -> FeSpace:
    tris = mesh.triangles
    nv = mesh.num_nodes
    n = mesh.n

    # global edge numbering, in order of first appearance
    edge_index: dict[tuple[int, int], int] = {}
    tri_edges = np.empty((len(tris), 3), dtype=np.int64)
    local = ((0, 1), (1, 2), (2, 0))
    for t, tri in enumerate(tris):
        for k, (a, b) in enumerate(local):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            if key not in edge_index:
                edge_index[key] = len(edge_index)
            tri_edges[t, k] = edge_index[key]
    edges = np.empty((len(edge_index), 2), dtype=np.int64)
    for (a, b), e in edge_index.items():
        edges[e] = (a, b)

    num_scalar = nv + len(edges)
    midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    scalar_coords = np.vstack([mesh.nodes, midpoints])

    # doubled integer grid coordinates classify every scalar DOF exactly
    gi = np.rint(scalar_coords[:, 0] * 2 * n).astype(np.int64)
    gj = np.rint(scalar_coords[:, 1] * 2 * n).astype(np.int64)
    on_boundary = (gi == 0) | (gi == 2 * n) | (gj == 0) | (gj == 2 * n)
    on_top = (gj == 2 * n) & (gi > 0) & (gi < 2 * n)
    scalar_class = np.full(num_scalar, INTERIOR, dtype=np.int64)
    scalar_class[on_boundary] = NOSLIP
    scalar_class[on_top] = SLIP

    velocity_mask = np.zeros(2 * num_scalar, dtype=bool)
    velocity_mask[:num_scalar][scalar_class == NOSLIP] = True
    velocity_mask[num_scalar:][scalar_class != INTERIOR] = True
    free_v = np.flatnonzero(~velocity_mask)

    # geometry and basis tables
    quad = triangle_rule(quad_npts)
    lam = _bary(quad.points)
    p2v = p2_values(lam)
    p1v = lam.copy()
    dref = p2_bary_grads(lam)                      # (K, 6, 3)

    pts = mesh.nodes[tris]                         # (T, 3, 2)
    areas = triangle_areas(mesh)
    # grad L_a = rot90 of opposite edge / (2A)
    e0 = pts[:, 2] - pts[:, 1]
    e1 = pts[:, 0] - pts[:, 2]
    e2 = pts[:, 1] - pts[:, 0]
    p1grad = np.stack([
        np.column_stack([-e0[:, 1], e0[:, 0]]),
        np.column_stack([-e1[:, 1], e1[:, 0]]),
        np.column_stack([-e2[:, 1], e2[:, 0]]),
    ], axis=1) / (2.0 * areas)[:, None, None]      # (T, 3, 2)

    p2grad = np.einsum("kia,tad->tkid", dref, p1grad)
    qw = (2.0 * areas)[:, None] * quad.weights[None, :]
    qp = np.einsum("ka,tad->tkd", lam, pts)

    # slip boundary edges with their scalar DOFs (endpoints, midpoint)
    top = mesh.boundary_tags == 1
    gdofs = []
    for a, b in mesh.boundary_edges[top]:
        e = edge_index[(min(a, b), max(a, b))]
        gdofs.append((a, b, nv + e))
    gamma1_edge_sdofs = np.array(gdofs, dtype=np.int64)
    gamma1_sdofs = np.flatnonzero(gj == 2 * n)

    space = FeSpace(
        mesh=mesh, quad=quad, edges=edges, tri_edges=tri_edges,
        num_scalar=num_scalar, ndof_v=2 * num_scalar, ndof_p=nv,
        ndof_c=2 * nv, scalar_coords=scalar_coords,
        scalar_class=scalar_class, velocity_mask=velocity_mask,
        free_v=free_v, areas=areas, qw=qw, qp=qp, p1v=p1v, p2v=p2v,
        p1grad=p1grad, p2grad=p2grad,
        gamma1_edge_sdofs=gamma1_edge_sdofs, gamma1_sdofs=gamma1_sdofs,
    )
    return space


def eldof_scalar(space: FeSpace) -> np.ndarray:
    """(T, 6) scalar P2 DOFs per triangle: vertices then edge midpoints."""
    return np.hstack([space.mesh.triangles,
                      space.mesh.num_nodes + space.tri_edges])


def apply_mask(space: FeSpace, vec: np.ndarray) -> np.ndarray:
    """Zero the constrained velocity DOFs (returns a copy)."""
    out = vec.copy()
    out[space.velocity_mask] = 0.0
    return out


# ---------------------------------------------------------------------------
# interpolation and point evaluation


def interpolate_velocity(space: FeSpace, f) -> np.ndarray:
    """Nodal P2 interpolant of a callable f(x, y) -> (2, m) array.

    Exact for polynomial fields of degree <= 2.
    """
    x, y = space.scalar_coords[:, 0], space.scalar_coords[:, 1]
    vals = np.asarray(f(x, y))
    return np.concatenate([vals[0], vals[1]])


def interpolate_pressure(space: FeSpace, f, zero_mean: bool = False) -> np.ndarray:
    x, y = space.mesh.nodes[:, 0], space.mesh.nodes[:, 1]
    p = np.asarray(f(x, y), dtype=float).copy()
    if zero_mean:
        from .forms import pressure_integral_vector
        p -= pressure_integral_vector(space) @ p
    return p


def interpolate_control(space: FeSpace, f) -> np.ndarray:
    x, y = space.mesh.nodes[:, 0], space.mesh.nodes[:, 1]
    vals = np.asarray(f(x, y))
    return np.concatenate([vals[0], vals[1]])


def velocity_at_quad(space: FeSpace, u: np.ndarray) -> np.ndarray:
    """Velocity values at all quadrature points, shape (T, K, 2)."""
    sd = eldof_scalar(space)
    ns = space.num_scalar
    ux = np.einsum("ti,ki->tk", u[sd], space.p2v)
    uy = np.einsum("ti,ki->tk", u[ns + sd], space.p2v)
    return np.stack([ux, uy], axis=-1)


def velocity_grad_at_quad(space: FeSpace, u: np.ndarray) -> np.ndarray:
    """Velocity gradients at quadrature points, (T, K, 2, 2), [a,b] = d_b u_a."""
    sd = eldof_scalar(space)
    ns = space.num_scalar
    gx = np.einsum("ti,tkid->tkd", u[sd], space.p2grad)
    gy = np.einsum("ti,tkid->tkd", u[ns + sd], space.p2grad)
    return np.stack([gx, gy], axis=-2)


def pressure_at_quad(space: FeSpace, p: np.ndarray) -> np.ndarray:
    return np.einsum("ti,ki->tk", p[space.mesh.triangles], space.p1v)


def control_at_quad(space: FeSpace, fc: np.ndarray) -> np.ndarray:
    nv = space.mesh.num_nodes
    tris = space.mesh.triangles
    fx = np.einsum("ti,ki->tk", fc[:nv][tris], space.p1v)
    fy = np.einsum("ti,ki->tk", fc[nv:][tris], space.p1v)
    return np.stack([fx, fy], axis=-1)


def evaluate_velocity(space: FeSpace, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate a velocity DOF vector at arbitrary points, (M, 2)."""
    tri, lam = locate_points(space.mesh, pts)
    sd = eldof_scalar(space)[tri]
    phi = p2_values(lam)
    ns = space.num_scalar
    ux = np.sum(u[sd] * phi, axis=1)
    uy = np.sum(u[ns + sd] * phi, axis=1)
    return np.column_stack([ux, uy])


def evaluate_velocity_grad(space: FeSpace, u: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Evaluate velocity gradients at arbitrary points, (M, 2, 2)."""
    tri, lam = locate_points(space.mesh, pts)
    sd = eldof_scalar(space)[tri]
    dref = p2_bary_grads(lam)                       # (M, 6, 3)
    g = np.einsum("mia,mad->mid", dref, space.p1grad[tri])
    ns = space.num_scalar
    gx = np.einsum("mi,mid->md", u[sd], g)
    gy = np.einsum("mi,mid->md", u[ns + sd], g)
    return np.stack([gx, gy], axis=-2)


def evaluate_pressure(space: FeSpace, p: np.ndarray, pts: np.ndarray) -> np.ndarray:
    tri, lam = locate_points(space.mesh, pts)
    return np.sum(p[space.mesh.triangles[tri]] * lam, axis=1)


def evaluate_control(space: FeSpace, fc: np.ndarray, pts: np.ndarray) -> np.ndarray:
    tri, lam = locate_points(space.mesh, pts)
    nv = space.mesh.num_nodes
    fx = np.sum(fc[:nv][space.mesh.triangles[tri]] * lam, axis=1)
    fy = np.sum(fc[nv:][space.mesh.triangles[tri]] * lam, axis=1)
    return np.column_stack([fx, fy])
