import numpy as np
import pytest

from tetforge.barrier import compute_gamma
from tetforge.driver import RunConfig, optimize_mesh, select_patches
from tetforge.fixtures import generate_test_mesh
from tetforge.mesh import VertexClass, dihedral_angles_batch, tet_volumes
from tetforge.quality import quality_batch
from tetforge.topology import build_topology


# --- fixtures ----------------------------------------------------------------

def test_grid_counts_and_volume():
    mesh = generate_test_mesh("grid", 2)
    assert mesh.num_tets == 48
    assert tet_volumes(mesh.tet_points()).sum() == pytest.approx(1.0, rel=1e-12)


def test_grid_deterministic():
    a = generate_test_mesh("grid", 3, seed=12, jitter=0.2)
    b = generate_test_mesh("grid", 3, seed=12, jitter=0.2)
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.tets, b.tets)
    c = generate_test_mesh("grid", 3, seed=13, jitter=0.2)
    assert not np.array_equal(a.vertices, c.vertices)


def test_perturbed_grid_stays_valid():
    for seed in range(8):
        mesh = generate_test_mesh("grid", 4, seed=seed, jitter=0.35)
        assert tet_volumes(mesh.tet_points()).min() > 0.0


def test_sphere_fixture():
    mesh = generate_test_mesh("sphere", 4)
    vols = tet_volumes(mesh.tet_points())
    assert vols.min() > 0.0
    radius = np.linalg.norm(mesh.vertices, axis=1)
    assert radius.max() == pytest.approx(1.0, abs=1e-12)
    assert vols.sum() == pytest.approx(4.0 / 3.0 * np.pi, rel=0.12)


def test_with_inverted_exact_count():
    mesh = generate_test_mesh("with-inverted", 4, seed=0, k=1)
    assert int((tet_volumes(mesh.tet_points()) < 0.0).sum()) == 1
    mesh = generate_test_mesh("with-inverted", 4, seed=1, k=3, jitter=0.05)
    assert int((tet_volumes(mesh.tet_points()) < 0.0).sum()) == 3


def test_with_slivers_dihedral_bound():
    mesh = generate_test_mesh("with-slivers", 4, seed=2, k=3, jitter=0.08)
    angles = dihedral_angles_batch(mesh.tet_points())
    assert int((np.nanmin(angles, axis=1) < 10.0).sum()) >= 3
    assert tet_volumes(mesh.tet_points()).min() > 0.0


def test_infeasible_fixture_spec():
    with pytest.raises(ValueError):
        generate_test_mesh("with-slivers", 2, k=1000)
    with pytest.raises(ValueError):
        generate_test_mesh("grid", 1)
    with pytest.raises(ValueError):
        generate_test_mesh("moebius", 3)


# --- patch selection -----------------------------------------------------------

def test_no_bad_tets_no_patches():
    mesh = generate_test_mesh("grid", 2)
    adjacency = build_topology(mesh)
    assert select_patches(mesh, adjacency, target_quality=0.1) == []


def test_single_sliver_patch_ring():
    # craft a sliver, then select with a threshold that only the very worst
    # element falls under
    mesh = generate_test_mesh("grid", 4)
    adjacency = build_topology(mesh)
    interior_tets = [
        t for t, tet in enumerate(mesh.tets)
        if all(mesh.vertex_class[v] == VertexClass.INTERIOR for v in tet)
    ]
    assert interior_tets
    moved = mesh.tets[interior_tets[0]][0]
    others = mesh.vertices[mesh.tets[interior_tets[0]][1:]]
    mesh.vertices[moved] += 0.9 * (others.mean(axis=0) - mesh.vertices[moved])

    qualities = quality_batch(mesh.tet_points())
    worst = int(np.argmin(qualities))
    assert all(mesh.vertex_class[v] != VertexClass.CORNER for v in mesh.tets[worst])
    target = float(qualities[worst]) + 1e-9  # only the worst falls below
    patches = select_patches(mesh, adjacency, target, surface_motion=True)
    assert len(patches) == 1
    patch = patches[0]
    assert patch.seed_tets.tolist() == [worst]
    assert sorted(patch.free_vertices.tolist()) == sorted(mesh.tets[worst].tolist())
    # oracle: ring = every tet sharing a vertex with the sliver
    expected_ring = {
        t for t, tet in enumerate(mesh.tets)
        if set(tet) & set(mesh.tets[worst].tolist())
    }
    assert set(patch.ring_tets.tolist()) == expected_ring


def test_adjacent_seeds_merge():
    mesh = generate_test_mesh("grid", 3, seed=3, jitter=0.3)
    adjacency = build_topology(mesh)
    patches = select_patches(mesh, adjacency, target_quality=0.5, surface_motion=True)
    assert patches
    # free-vertex sets are pairwise disjoint
    seen = set()
    for patch in patches:
        assert not (seen & set(patch.free_vertices.tolist()))
        seen |= set(patch.free_vertices.tolist())
    # oracle: any two seeds sharing a movable vertex are in the same patch
    movable = {
        int(v) for v in range(mesh.num_vertices)
        if mesh.vertex_class[v] in (VertexClass.INTERIOR, VertexClass.SURFACE_SMOOTH, VertexClass.FEATURE_EDGE)
    }
    patch_of = {}
    for i, patch in enumerate(patches):
        for t in patch.seed_tets:
            patch_of[int(t)] = i
    seeds = list(patch_of)
    for a in seeds:
        for b in seeds:
            if a < b and (set(mesh.tets[a]) & set(mesh.tets[b]) & movable):
                assert patch_of[a] == patch_of[b]


def test_all_patches_mode_covers_every_tet():
    mesh = generate_test_mesh("grid", 2, seed=1, jitter=0.1)
    adjacency = build_topology(mesh)
    patches = select_patches(mesh, adjacency, target_quality=0.3, mode="all-patches")
    seeded = {int(t) for p in patches for t in p.seed_tets}
    has_movable = {
        t for t, tet in enumerate(mesh.tets)
        if any(mesh.vertex_class[v] != VertexClass.CORNER for v in tet)
    }
    assert seeded == has_movable


def test_patches_sorted_worst_first():
    mesh = generate_test_mesh("grid", 4, seed=5, jitter=0.3)
    adjacency = build_topology(mesh)
    patches = select_patches(mesh, adjacency, target_quality=0.4)
    quals = [p.seed_quality for p in patches]
    assert quals == sorted(quals)


# --- optimize_mesh ---------------------------------------------------------------

def test_regular_mesh_converges_immediately():
    mesh = generate_test_mesh("grid", 2)
    before = mesh.vertices.copy()
    report = optimize_mesh(mesh, RunConfig())
    assert len(report.passes) <= 1
    assert report.volume_drift_percent == 0.0
    assert np.abs(mesh.vertices - before).max() < 1e-9


def test_perturbed_grid_improves_and_preserves_volume():
    mesh = generate_test_mesh("with-slivers", 4, seed=6, k=2, jitter=0.08)
    initial_min = np.nanmin(dihedral_angles_batch(mesh.tet_points()))
    report = optimize_mesh(mesh, RunConfig(target_quality=0.5))
    final_min = np.nanmin(dihedral_angles_batch(mesh.tet_points()))
    assert final_min > initial_min
    assert report.volume_drift_percent <= 0.01
    assert report.min_quality_seen > 0.0


def test_gamma_tracks_q_min_between_passes():
    mesh = generate_test_mesh("with-slivers", 4, seed=9, k=3, jitter=0.1)
    report = optimize_mesh(mesh, RunConfig(target_quality=0.5))
    assert len(report.passes) >= 2
    for record in report.passes:
        assert record.gamma == compute_gamma(record.q_min_before, record.b)
        assert record.gamma < record.q_min_before
        # barrier safety: no pass may end below its own gamma
        assert record.q_min > record.gamma


def test_q_min_strictly_increases_until_convergence():
    mesh = generate_test_mesh("with-slivers", 5, seed=14, k=3, jitter=0.1)
    report = optimize_mesh(mesh, RunConfig(target_quality=0.5))
    per_b = {}
    for record in report.passes:
        per_b.setdefault(record.b, []).append(record)
    for records in per_b.values():
        for record in records[:-1]:  # the terminal pass is the convergence signal
            assert record.q_min > record.q_min_before


def test_untangle_within_pass_budget():
    mesh = generate_test_mesh("with-inverted", 4, seed=11, k=2, jitter=0.05)
    assert np.nanmin(quality_batch(mesh.tet_points())) < 0.0
    report = optimize_mesh(mesh, RunConfig(max_passes=50))
    assert np.nanmin(quality_batch(mesh.tet_points())) > 0.0
    assert tet_volumes(mesh.tet_points()).min() > 0.0


def test_no_surface_motion_keeps_surface_bitwise():
    mesh = generate_test_mesh("grid", 3, seed=2, jitter=0.3)
    adjacency = build_topology(mesh)
    surface = np.flatnonzero(mesh.vertex_class != VertexClass.INTERIOR)
    before = mesh.vertices[surface].copy()
    report = optimize_mesh(mesh, RunConfig(surface_motion=False), adjacency=adjacency)
    assert np.array_equal(mesh.vertices[surface], before)
    assert report.volume_drift_percent == 0.0


def test_user_fixed_vertices_never_move():
    mesh = generate_test_mesh("grid", 3, seed=2, jitter=0.3)
    adjacency = build_topology(mesh)
    interior = np.flatnonzero(mesh.vertex_class == VertexClass.INTERIOR)
    pinned = interior[:3]
    mesh.vertex_class[pinned] = VertexClass.USER_FIXED
    before = mesh.vertices[pinned].copy()
    optimize_mesh(mesh, RunConfig(), adjacency=adjacency)
    assert np.array_equal(mesh.vertices[pinned], before)


def test_all_patches_mode_preserves_invertibility():
    mesh = generate_test_mesh("grid", 3, seed=6, jitter=0.3)
    report = optimize_mesh(mesh, RunConfig(mode="all-patches", b_schedule=(0.85,), max_passes=3))
    assert report.min_quality_seen > 0.0
    assert tet_volumes(mesh.tet_points()).min() > 0.0


def test_parallel_dispatch_matches_invariants():
    mesh = generate_test_mesh("with-slivers", 4, seed=3, k=3, jitter=0.1)
    report = optimize_mesh(mesh, RunConfig(target_quality=0.5, jobs=4))
    assert report.min_quality_seen > 0.0
    assert tet_volumes(mesh.tet_points()).min() > 0.0
    assert np.nanmin(quality_batch(mesh.tet_points())) >= 0.5 - 0.2  # improved to near target


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(b_schedule=(0.9, 0.8)).validate()
    with pytest.raises(ValueError):
        RunConfig(b_schedule=(0.0,)).validate()
    with pytest.raises(ValueError):
        RunConfig(mode="bogus").validate()
    with pytest.raises(ValueError):
        RunConfig(max_passes=0).validate()


def test_report_serializable():
    import json

    mesh = generate_test_mesh("with-slivers", 3, seed=1, k=1, jitter=0.05)
    report = optimize_mesh(mesh, RunConfig(target_quality=0.4))
    blob = json.dumps(report.to_dict())
    parsed = json.loads(blob)
    assert parsed["final"]["q_min"] >= parsed["initial"]["q_min"]
    assert len(parsed["passes"]) == len(report.passes)
