import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slipflow.meshing import (GAMMA0, GAMMA1, build_unit_square,
                              locate_points, mesh_size, triangle_areas)


def test_entity_counts():
    for n in (1, 2, 3, 7):
        mesh = build_unit_square(n)
        assert mesh.num_nodes == (n + 1) ** 2
        assert mesh.num_triangles == 2 * n ** 2
        assert len(mesh.boundary_edges) == 4 * n
        assert len(mesh.boundary_tags) == 4 * n


def test_rejects_degenerate_resolution():
    with pytest.raises(ValueError):
        build_unit_square(0)


def test_node_numbering_row_major():
    mesh = build_unit_square(3)
    # node (i, j) sits at index j*(n+1) + i
    assert np.allclose(mesh.nodes[0], (0.0, 0.0))
    assert np.allclose(mesh.nodes[3], (1.0, 0.0))
    assert np.allclose(mesh.nodes[4], (0.0, 1.0 / 3.0))
    assert np.allclose(mesh.nodes[15], (1.0, 1.0))


def test_triangles_counterclockwise_uniform_area():
    for n in (1, 2, 5):
        mesh = build_unit_square(n)
        areas = triangle_areas(mesh)
        assert np.all(areas > 0)
        assert np.allclose(areas, 1.0 / (2 * n ** 2))
        assert np.isclose(areas.sum(), 1.0)


def test_mesh_size_is_diagonal_length():
    for n in (1, 2, 4, 25):
        mesh = build_unit_square(n)
        assert np.isclose(mesh_size(mesh), np.sqrt(2.0) / n)


def test_boundary_tags_top_edge_only():
    mesh = build_unit_square(4)
    mids = mesh.nodes[mesh.boundary_edges].mean(axis=1)
    on_top = np.isclose(mids[:, 1], 1.0)
    assert np.all(mesh.boundary_tags[on_top] == GAMMA1)
    assert np.all(mesh.boundary_tags[~on_top] == GAMMA0)
    assert np.sum(on_top) == 4


def test_arrays_read_only():
    mesh = build_unit_square(2)
    with pytest.raises(ValueError):
        mesh.nodes[0, 0] = 5.0


def test_locate_points_reproduces_coordinates():
    mesh = build_unit_square(3)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.0, 1.0, size=(200, 2))
    tri, lam = locate_points(mesh, pts)
    rebuilt = np.einsum("mk,mkd->md", lam, mesh.nodes[mesh.triangles[tri]])
    assert np.allclose(rebuilt, pts, atol=1e-14)
    assert np.all(lam >= -1e-14) and np.all(lam <= 1.0 + 1e-14)
    assert np.allclose(lam.sum(axis=1), 1.0)


def test_locate_points_clamps_outside_points():
    mesh = build_unit_square(2)
    pts = np.array([[-0.5, 0.3], [1.2, 1.7], [0.5, -2.0]])
    tri, lam = locate_points(mesh, pts)
    rebuilt = np.einsum("mk,mkd->md", lam, mesh.nodes[mesh.triangles[tri]])
    clamped = np.clip(pts, 0.0, 1.0)
    assert np.allclose(rebuilt, clamped, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.integers(min_value=1, max_value=9))
def test_locate_points_roundtrip_property(x, y, n):
    mesh = build_unit_square(n)
    tri, lam = locate_points(mesh, np.array([[x, y]]))
    rebuilt = lam[0] @ mesh.nodes[mesh.triangles[tri[0]]]
    assert np.allclose(rebuilt, (x, y), atol=1e-12)
