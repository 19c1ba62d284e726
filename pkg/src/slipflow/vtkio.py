"""Minimal legacy ASCII VTK output for solution fields.

Writes an unstructured triangle grid with nodal point data, which is
enough to look at velocity, pressure and control fields in ParaView
without pulling in a heavier I/O dependency.  Only the piecewise
linear parts of the fields are exported; the midpoint velocity values
are dropped.
"""

from __future__ import annotations

import os

import numpy as np

from .fem import FeSpace
from .meshing import TriMesh


def vertex_velocity(space: FeSpace, u: np.ndarray) -> np.ndarray:
    """Velocity values at mesh vertices from a velocity DOF vector."""
    nv = space.mesh.num_nodes
    ns = space.num_scalar
    return np.column_stack([u[:nv], u[ns:ns + nv]])


def vertex_control(space: FeSpace, f: np.ndarray) -> np.ndarray:
    """Control values at mesh vertices from a control DOF vector."""
    nv = space.mesh.num_nodes
    return np.column_stack([f[:nv], f[nv:2 * nv]])


def write_vtk(path: str, mesh: TriMesh,
              vectors: dict[str, np.ndarray] | None = None,
              scalars: dict[str, np.ndarray] | None = None,
              title: str = "slipflow fields") -> None:
    """Write nodal fields on the mesh as a legacy ASCII VTK file.

    vectors maps names to (num_nodes, 2) arrays, scalars to
    (num_nodes,) arrays; the third vector component is written as zero.
    """
    vectors = vectors or {}
    scalars = scalars or {}
    nv = mesh.num_nodes
    nt = mesh.num_triangles
    for name, arr in vectors.items():
        if arr.shape != (nv, 2):
            raise ValueError(f"vector field {name!r} has shape {arr.shape}")
    for name, arr in scalars.items():
        if arr.shape != (nv,):
            raise ValueError(f"scalar field {name!r} has shape {arr.shape}")

    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} float",
    ]
    for x, y in mesh.nodes:
        lines.append(f"{x:.10g} {y:.10g} 0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in mesh.triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)

    if vectors or scalars:
        lines.append(f"POINT_DATA {nv}")
    for name, arr in vectors.items():
        lines.append(f"VECTORS {name} float")
        for vx, vy in arr:
            lines.append(f"{vx:.10g} {vy:.10g} 0")
    for name, arr in scalars.items():
        lines.append(f"SCALARS {name} float 1")
        lines.append("LOOKUP_TABLE default")
        for v in arr:
            lines.append(f"{v:.10g}")

    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
