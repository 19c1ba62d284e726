"""
Structured triangulations of the unit square with boundary tagging.

The computational domain is O = (0,1)^2. Its boundary is split into
Gamma_1, the open top edge (0,1) x {1} where the slip condition lives,
and Gamma_0, the rest (bottom, left, right, including all four corners).

Meshes are uniform n x n grids of squares, each split along the diagonal
from its lower-left to its upper-right corner.  Nodes are numbered
row-major starting at (0,0), x running fastest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# boundary tags
GAMMA0 = 0
GAMMA1 = 1


@dataclass(frozen=True)
class TriMesh:
    """Triangulation of the unit square.

    Attributes
    ----------
    n : number of cells per side
    nodes : (N, 2) vertex coordinates
    triangles : (T, 3) vertex indices, counterclockwise
    boundary_edges : (B, 2) vertex indices of boundary segments
    boundary_tags : (B,) GAMMA0 or GAMMA1 per boundary segment
    """

    n: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]


def build_unit_square(n: int) -> TriMesh:
    """Build the uniform n x n triangulation of (0,1)^2.

    Every square cell is split along its lower-left to upper-right
    diagonal, so the mesh has (n+1)^2 nodes and 2 n^2 triangles.  The
    top edge carries the GAMMA1 tag, everything else GAMMA0.
    """
    if n < 1:
        raise ValueError(f"mesh resolution must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs)            # Y varies along axis 0 (rows)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        # node index at grid position (i, j), i.e. coordinates (i/n, j/n)
        return j * (n + 1) + i

    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    k = 0
    for j in range(n):
        for i in range(n):
            v00 = vid(i, j)
            v10 = vid(i + 1, j)
            v01 = vid(i, j + 1)
            v11 = vid(i + 1, j + 1)
            tris[k] = (v00, v10, v11)     # lower triangle
            tris[k + 1] = (v00, v11, v01)  # upper triangle
            k += 2

    edges = []
    tags = []
    for i in range(n):                     # bottom, y = 0
        edges.append((vid(i, 0), vid(i + 1, 0)))
        tags.append(GAMMA0)
    for j in range(n):                     # right, x = 1
        edges.append((vid(n, j), vid(n, j + 1)))
        tags.append(GAMMA0)
    for i in range(n):                     # top, y = 1 (slip boundary)
        edges.append((vid(i, n), vid(i + 1, n)))
        tags.append(GAMMA1)
    for j in range(n):                     # left, x = 0
        edges.append((vid(0, j), vid(0, j + 1)))
        tags.append(GAMMA0)

    mesh = TriMesh(
        n=n,
        nodes=nodes,
        triangles=tris,
        boundary_edges=np.array(edges, dtype=np.int64),
        boundary_tags=np.array(tags, dtype=np.int64),
    )
    for arr in (mesh.nodes, mesh.triangles, mesh.boundary_edges, mesh.boundary_tags):
        arr.setflags(write=False)
    return mesh


def mesh_size(mesh: TriMesh) -> float:
    """Longest edge over all triangles (sqrt(2)/n for this family)."""
    p = mesh.nodes[mesh.triangles]         # (T, 3, 2)
    d0 = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    d1 = np.linalg.norm(p[:, 2] - p[:, 1], axis=1)
    d2 = np.linalg.norm(p[:, 0] - p[:, 2], axis=1)
    return float(np.max([d0, d1, d2]))


def triangle_areas(mesh: TriMesh) -> np.ndarray:
    """Signed areas; positive for counterclockwise orientation."""
    p = mesh.nodes[mesh.triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def locate_points(mesh: TriMesh, pts: np.ndarray):
    """Locate points in the structured mesh.

    Returns (tri, lam) where tri is the triangle index of each point and
    lam its barycentric coordinates with respect to that triangle's
    vertices.  Points are clamped into the closed unit square first, so
    querying reference-mesh quadrature points on a coarser mesh of the
    same family is safe.
    """
    n = mesh.n
    x = np.clip(pts[:, 0], 0.0, 1.0)
    y = np.clip(pts[:, 1], 0.0, 1.0)
    i = np.minimum((x * n).astype(np.int64), n - 1)
    j = np.minimum((y * n).astype(np.int64), n - 1)
    xi = x * n - i
    eta = y * n - j
    lower = eta <= xi
    cell = j * n + i
    tri = 2 * cell + np.where(lower, 0, 1)
    lam = np.empty((len(x), 3))
    # lower triangle (v00, v10, v11): local vertices (0,0), (1,0), (1,1)
    lam[lower, 0] = 1.0 - xi[lower]
    lam[lower, 1] = xi[lower] - eta[lower]
    lam[lower, 2] = eta[lower]
    up = ~lower
    # upper triangle (v00, v11, v01): local vertices (0,0), (1,1), (0,1)
    lam[up, 0] = 1.0 - eta[up]
    lam[up, 1] = xi[up]
    lam[up, 2] = eta[up] - xi[up]
    return tri, lam
