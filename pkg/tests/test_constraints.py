import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tetforge.constraints import (
    build_constraints,
    deduplicate_rows,
    project_system,
    projector,
    vertex_normal,
)
from tetforge.driver import Patch, select_patches
from tetforge.fixtures import generate_test_mesh
from tetforge.mesh import VertexClass
from tetforge.topology import build_topology


def _patch_of_all_movable(mesh, adjacency):
    patches = select_patches(mesh, adjacency, target_quality=2.0, surface_motion=True)
    assert len(patches) == 1
    return patches[0]


# --- vertex normals ----------------------------------------------------------

def test_planar_face_vertex_normal():
    mesh = generate_test_mesh("grid", 2)
    adjacency = build_topology(mesh)
    # face centers are the smooth vertices of the 2-cube; find the one on z=1
    smooth = np.flatnonzero(mesh.vertex_class == VertexClass.SURFACE_SMOOTH)
    top = [v for v in smooth if mesh.vertices[v][2] == 1.0]
    assert len(top) == 1
    vn = vertex_normal(int(top[0]), mesh, adjacency)
    assert np.allclose(vn.unit_n, [0.0, 0.0, 1.0], atol=1e-12)


def test_cube_edge_vertex_resultant_normal():
    mesh = generate_test_mesh("grid", 2)
    adjacency = build_topology(mesh)
    # edge midpoint between faces z=1 and x=1: resultant of two equal-area
    # orthogonal fans is the diagonal
    edges = np.flatnonzero(mesh.vertex_class == VertexClass.FEATURE_EDGE)
    target = [v for v in edges
              if mesh.vertices[v][2] == 1.0 and mesh.vertices[v][0] == 1.0]
    assert len(target) == 1
    vn = vertex_normal(int(target[0]), mesh, adjacency)
    assert np.allclose(vn.unit_n, np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0), atol=1e-12)


def test_sphere_vertex_normals_near_radial():
    mesh = generate_test_mesh("sphere", 5)
    adjacency = build_topology(mesh, feature_angle_deg=30.0)
    radius = np.linalg.norm(mesh.vertices, axis=1)
    on_sphere = np.flatnonzero(radius > 1.0 - 1e-9)
    worst = 0.0
    for v in on_sphere:
        vn = vertex_normal(int(v), mesh, adjacency)
        exact = mesh.vertices[v] / radius[v]
        angle = np.degrees(np.arccos(np.clip(vn.unit_n @ exact, -1.0, 1.0)))
        worst = max(worst, angle)
    assert worst < 15.0


# --- constraint rows ----------------------------------------------------------

def test_smooth_vertex_gets_unit_row_and_zero_residual():
    mesh = generate_test_mesh("grid", 2)
    adjacency = build_topology(mesh)
    patch = _patch_of_all_movable(mesh, adjacency)
    system, demoted = build_constraints(patch, mesh, adjacency)
    assert not demoted
    assert system.num_rows > 0
    assert np.allclose(system.g, 0.0)
    assert np.allclose(np.linalg.norm(system.C, axis=1), 1.0, atol=1e-12)
    # every smooth free vertex contributes one row, every crease vertex two
    smooth = sum(mesh.vertex_class[v] == VertexClass.SURFACE_SMOOTH for v in patch.free_vertices)
    crease = sum(mesh.vertex_class[v] == VertexClass.FEATURE_EDGE for v in patch.free_vertices)
    assert system.num_rows == smooth + 2 * crease


def test_feature_edge_null_space_is_crease_direction():
    mesh = generate_test_mesh("grid", 2)
    adjacency = build_topology(mesh)
    patch = _patch_of_all_movable(mesh, adjacency)
    system, _ = build_constraints(patch, mesh, adjacency)
    index_of = {int(v): i for i, v in enumerate(patch.free_vertices)}
    edges = [v for v in patch.free_vertices if mesh.vertex_class[v] == VertexClass.FEATURE_EDGE]
    assert edges
    for v in edges:
        cols = slice(3 * index_of[int(v)], 3 * index_of[int(v)] + 3)
        rows = system.C[np.abs(system.C[:, cols]).sum(axis=1) > 0][:, cols]
        assert rows.shape == (2, 3)
        _, s, vt = np.linalg.svd(rows)
        rank = int((s > 1e-10).sum())
        assert 3 - rank == 1  # admissible motion spans exactly the crease line
        crease = vt[-1]
        # on the cube, a crease runs along a coordinate axis
        assert np.sort(np.abs(crease))[-1] == pytest.approx(1.0, abs=1e-10)


def test_patch_without_surface_vertices_has_no_rows():
    mesh = generate_test_mesh("grid", 4, seed=0, jitter=0.1)
    adjacency = build_topology(mesh)
    interior = np.flatnonzero(mesh.vertex_class == VertexClass.INTERIOR)
    center = int(interior[len(interior) // 2])
    patch = Patch(seed_tets=adjacency.vertex_tets[center],
                  free_vertices=np.array([center]),
                  ring_tets=adjacency.vertex_tets[center])
    system, demoted = build_constraints(patch, mesh, adjacency)
    assert system.num_rows == 0
    assert not demoted
    S = np.eye(3)
    f = np.array([1.0, 2.0, 3.0])
    S2, f2, dropped = project_system(S, f, system.C, system.g)
    assert dropped == 0
    assert np.array_equal(S2, S)
    assert np.array_equal(f2, f)


# --- null-space projection ----------------------------------------------------

def test_axis_constraint_blocks_x_motion():
    C = np.array([[1.0, 0.0, 0.0]])
    g = np.zeros(1)
    S = np.diag([2.0, 3.0, 4.0])
    f = np.array([1.0, 1.0, 1.0])
    Q, R, Ck, keep, dropped = projector(C)
    assert np.allclose(Q, np.diag([0.0, 1.0, 1.0]), atol=1e-14)
    S2, f2, _ = project_system(S, f, C, g)
    dx = np.linalg.solve(S2, -f2)
    assert abs(dx[0]) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(13, 60))
def test_projector_identities_random(seed, m, n):
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(m, n))
    g = rng.normal(size=m)
    Q, R, Ck, keep, dropped = projector(C)
    assert dropped == 0
    assert np.linalg.norm(Q @ Ck.T) <= 1e-10
    assert np.linalg.norm(Q @ Q - Q) <= 1e-10
    assert np.linalg.norm(Q - Q.T) <= 1e-12
    assert np.linalg.norm(Ck @ (R @ g) - g) <= 1e-10 * max(1.0, np.linalg.norm(g))


def test_rank_deficient_rows_dropped():
    C = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0],   # dependent
    ])
    Q, R, Ck, keep, dropped = projector(C)
    assert dropped == 1
    assert Ck.shape[0] == 2
    assert np.linalg.norm(Q @ C.T) <= 1e-10


def test_duplicate_rows_removed_before_projection():
    C = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    g = np.zeros(2)
    C2, g2 = deduplicate_rows(C, g)
    assert C2.shape == (1, 3)
    S = np.eye(3)
    f = np.ones(3)
    S2, f2, dropped = project_system(S, f, C, g)
    assert dropped == 1
    dx = np.linalg.solve(S2, -f2)
    assert abs(dx[2]) < 1e-12


def test_solved_step_is_tangential():
    # with g = 0, the solved update must satisfy C dx = 0
    rng = np.random.default_rng(7)
    for _ in range(20):
        n, m = 12, 4
        C = rng.normal(size=(m, n))
        A = rng.normal(size=(n, n))
        S = A @ A.T + 0.1 * np.eye(n)
        f = rng.normal(size=n)
        S2, f2, _ = project_system(S, f, C, np.zeros(m))
        dx = np.linalg.solve(S2, -f2)
        assert np.linalg.norm(C @ dx) <= 1e-8 * max(1.0, np.linalg.norm(dx))


def test_first_order_volume_preservation_single_vertex():
    # a smooth surface vertex's admissible motion is orthogonal to its
    # area-weighted normal, so the first-order enclosed-volume change
    # (1/3) dx . N vanishes
    mesh = generate_test_mesh("sphere", 4, seed=2, jitter=0.05)
    adjacency = build_topology(mesh)
    patch = select_patches(mesh, adjacency, target_quality=2.0, surface_motion=True)[0]
    system, _ = build_constraints(patch, mesh, adjacency)
    index_of = {int(v): i for i, v in enumerate(patch.free_vertices)}
    rng = np.random.default_rng(0)
    n = 3 * len(patch.free_vertices)
    S = np.eye(n)
    f = rng.normal(size=n)
    S2, f2, _ = project_system(S, f, system.C, system.g)
    dx = np.linalg.solve(S2, -f2)
    checked = 0
    for v in patch.free_vertices:
        if mesh.vertex_class[v] != VertexClass.SURFACE_SMOOTH:
            continue
        vn = vertex_normal(int(v), mesh, adjacency)
        step = dx[3 * index_of[int(v)]:3 * index_of[int(v)] + 3]
        local_volume = abs(np.dot(mesh.vertices[v], vn.n))
        assert abs(step @ vn.n) / 3.0 <= 1e-8 * max(local_volume, 1e-6)
        checked += 1
    assert checked > 0
