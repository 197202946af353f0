"""Outer optimization loop: patch selection, barrier schedule, reporting.

Each pass re-measures the worst quality, re-derives the barrier level from
the current barrier constant, selects the patches seeded by below-target
elements (or every element in all-patches mode) and runs a short Newton
solve on each.  The schedule sweeps the barrier constant upward so early
passes spread improvement while later ones bear down on the worst element.

Volume drift is reported from the divergence-theorem volume of the domain
boundary, so runs that never move a surface vertex report exactly zero
drift.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from tetforge.barrier import BarrierParams, compute_gamma
from tetforge.constraints import build_constraints
from tetforge.mesh import TetMesh, VertexClass, dihedral_angles_batch, surface_enclosed_volume, tet_volumes
from tetforge.metrics import GlobalMetrics, global_metrics
from tetforge.quality import quality_batch
from tetforge.solver import DEFAULT_MAX_INNER, optimize_patch
from tetforge.topology import AdjacencyIndex, build_topology

logger = logging.getLogger("tetforge")

MODES = ("selective", "all-patches")


@dataclass
class Patch:
    """A local optimization unit: bad seed elements plus their surroundings.

    ring_tets covers every element incident to a free vertex, so the patch
    objective sees all elements any free vertex can affect.
    """

    seed_tets: np.ndarray
    free_vertices: np.ndarray
    ring_tets: np.ndarray
    seed_quality: float = np.inf


@dataclass
class RunConfig:
    """Knobs for a full optimization run."""

    b_schedule: tuple = (0.75, 0.85, 0.95)
    target_quality: float = 0.3
    max_passes: int = 30
    mode: str = "selective"
    surface_motion: bool = True
    feature_angle_deg: float = 30.0
    seed: int = 0
    jobs: int = 1
    max_inner: int = DEFAULT_MAX_INNER
    squared_barrier: bool = False
    convergence_tol: float = 1e-4

    def validate(self) -> None:
        sched = tuple(self.b_schedule)
        if not sched or any(not 0.0 < b < 1.0 for b in sched):
            raise ValueError("barrier schedule values must lie in (0,1)")
        if any(b2 < b1 for b1, b2 in zip(sched, sched[1:])):
            raise ValueError("barrier schedule must be nondecreasing")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.max_passes < 1:
            raise ValueError("max_passes must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")


@dataclass
class PassRecord:
    b: float
    pass_index: int
    gamma: float
    q_min_before: float
    q_min: float
    min_dihedral_deg: float
    max_dihedral_deg: float
    volume: float
    drift_percent: float
    elapsed_s: float
    patches: int
    stalled: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class OptimizationReport:
    passes: list = field(default_factory=list)
    initial_metrics: GlobalMetrics | None = None
    final_metrics: GlobalMetrics | None = None
    volume_drift_percent: float = 0.0
    min_quality_seen: float = np.inf
    elapsed_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "passes": [p.to_dict() for p in self.passes],
            "initial": self.initial_metrics.to_dict() if self.initial_metrics else None,
            "final": self.final_metrics.to_dict() if self.final_metrics else None,
            "volume_drift_percent": self.volume_drift_percent,
            "min_quality_seen": self.min_quality_seen,
            "elapsed_s": self.elapsed_s,
        }


def _movable_mask(mesh: TetMesh, surface_motion: bool) -> np.ndarray:
    cls = mesh.vertex_class
    movable = cls == VertexClass.INTERIOR
    if surface_motion:
        movable = movable | (cls == VertexClass.SURFACE_SMOOTH) | (cls == VertexClass.FEATURE_EDGE)
    return movable


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def select_patches(mesh: TetMesh, adjacency: AdjacencyIndex, target_quality: float,
                   mode: str = "selective", surface_motion: bool = True,
                   qualities: np.ndarray | None = None) -> list:
    """Build the patches for one pass, worst seed first.

    Selective mode seeds every element below the target and merges patches
    sharing a movable vertex, so free-vertex sets are disjoint.  All-patches
    mode makes one patch per element and skips merging: the sweep visits
    every element the way a classic smoother does.  Patches with no movable
    vertex are dropped.
    """
    if qualities is None:
        qualities = quality_batch(mesh.tet_points())
    movable = _movable_mask(mesh, surface_motion)
    if mode == "all-patches":
        seeds = np.arange(mesh.num_tets, dtype=np.int64)
    else:
        seeds = np.flatnonzero(qualities < target_quality).astype(np.int64)
    if len(seeds) == 0:
        return []

    patches = []
    if mode == "all-patches":
        for t in seeds:
            free = mesh.tets[t][movable[mesh.tets[t]]]
            if len(free) == 0:
                continue
            free = np.unique(free)
            patches.append(Patch(
                seed_tets=np.array([t]),
                free_vertices=free,
                ring_tets=adjacency.ring_tets(free),
                seed_quality=float(qualities[t]),
            ))
    else:
        uf = _UnionFind(len(seeds))
        owner: dict[int, int] = {}
        for i, t in enumerate(seeds):
            for v in mesh.tets[t]:
                if not movable[v]:
                    continue
                if v in owner:
                    uf.union(owner[v], i)
                else:
                    owner[int(v)] = i
        grouped: dict[int, list] = {}
        for i in range(len(seeds)):
            grouped.setdefault(uf.find(i), []).append(i)
        for members in grouped.values():
            seed_ids = seeds[members]
            free = np.unique(mesh.tets[seed_ids].reshape(-1))
            free = free[movable[free]]
            if len(free) == 0:
                continue
            patches.append(Patch(
                seed_tets=np.sort(seed_ids),
                free_vertices=free,
                ring_tets=adjacency.ring_tets(free),
                seed_quality=float(qualities[seed_ids].min()),
            ))
    patches.sort(key=lambda p: (p.seed_quality, int(p.seed_tets[0])))
    return patches


def _ring_vertex_set(mesh: TetMesh, patch: Patch) -> frozenset:
    return frozenset(np.unique(mesh.tets[patch.ring_tets]).tolist())


def _independent_waves(mesh: TetMesh, patches: list) -> list:
    """Group patches into waves whose ring-vertex sets do not overlap.

    Patches in one wave neither read nor write any vertex another touches,
    so a wave can be dispatched across threads.
    """
    waves, wave_sets = [], []
    for patch in patches:
        verts = _ring_vertex_set(mesh, patch)
        for i, used in enumerate(wave_sets):
            if not (verts & used):
                waves[i].append(patch)
                wave_sets[i] = used | verts
                break
        else:
            waves.append([patch])
            wave_sets.append(verts)
    return waves


def _patch_constraints(mesh: TetMesh, adjacency: AdjacencyIndex, patch: Patch):
    """Constraint system for a patch, dropping vertices whose normal degenerates."""
    system, demoted = build_constraints(patch, mesh, adjacency)
    while demoted:
        keep = np.array([v for v in patch.free_vertices if v not in set(demoted)], dtype=np.int64)
        patch.free_vertices = keep
        patch.ring_tets = adjacency.ring_tets(keep)
        system, demoted = build_constraints(patch, mesh, adjacency)
    return system


def _run_patch(mesh, adjacency, patch, params, config):
    constraints = None
    if config.surface_motion:
        constraints = _patch_constraints(mesh, adjacency, patch)
        if constraints.num_rows == 0:
            constraints = None
    return optimize_patch(
        mesh, patch, params,
        constraints=constraints,
        max_inner=config.max_inner,
        squared=config.squared_barrier,
    )


def optimize_mesh(mesh: TetMesh, config: RunConfig,
                  adjacency: AdjacencyIndex | None = None,
                  on_pass=None) -> OptimizationReport:
    """Improve the mesh in place and return the run report.

    For every barrier constant in the schedule, passes run until the worst
    quality stops improving by more than convergence_tol or max_passes is
    reached.  on_pass, when given, receives each PassRecord as it completes.
    """
    config.validate()
    t0 = time.perf_counter()
    if adjacency is None:
        adjacency = build_topology(mesh, config.feature_angle_deg)
    report = OptimizationReport()
    report.initial_metrics = global_metrics(mesh, adjacency)
    report.min_quality_seen = report.initial_metrics.q_min
    boundary_volume_0 = surface_enclosed_volume(mesh.vertices, adjacency.boundary_faces)

    executor = ThreadPoolExecutor(max_workers=config.jobs) if config.jobs > 1 else None
    try:
        for b in config.b_schedule:
            for pass_index in range(config.max_passes):
                t_pass = time.perf_counter()
                qualities = quality_batch(mesh.tet_points())
                q_min_before = float(np.nanmin(qualities))
                gamma = compute_gamma(q_min_before, b)
                params = BarrierParams(b=b, q_min=q_min_before, gamma=gamma)
                patches = select_patches(
                    mesh, adjacency, config.target_quality,
                    mode=config.mode, surface_motion=config.surface_motion,
                    qualities=qualities,
                )
                if not patches:
                    break
                stalled = 0
                if executor is None:
                    for patch in patches:
                        solve = _run_patch(mesh, adjacency, patch, params, config)
                        stalled += int(solve.stalled)
                        report.min_quality_seen = min(report.min_quality_seen, solve.min_quality)
                else:
                    for wave in _independent_waves(mesh, patches):
                        results = list(executor.map(
                            lambda p: _run_patch(mesh, adjacency, p, params, config), wave))
                        for solve in results:
                            stalled += int(solve.stalled)
                            report.min_quality_seen = min(report.min_quality_seen, solve.min_quality)

                q_after = quality_batch(mesh.tet_points())
                q_min_after = float(np.nanmin(q_after))
                angles = dihedral_angles_batch(mesh.tet_points())
                finite = angles[np.isfinite(angles)]
                volume_now = float(tet_volumes(mesh.tet_points()).sum())
                boundary_now = surface_enclosed_volume(mesh.vertices, adjacency.boundary_faces)
                drift = abs(boundary_now - boundary_volume_0) / abs(boundary_volume_0) * 100.0 \
                    if boundary_volume_0 else 0.0
                record = PassRecord(
                    b=b,
                    pass_index=pass_index,
                    gamma=gamma,
                    q_min_before=q_min_before,
                    q_min=q_min_after,
                    min_dihedral_deg=float(finite.min()) if finite.size else np.nan,
                    max_dihedral_deg=float(finite.max()) if finite.size else np.nan,
                    volume=volume_now,
                    drift_percent=drift,
                    elapsed_s=time.perf_counter() - t_pass,
                    patches=len(patches),
                    stalled=stalled,
                )
                report.passes.append(record)
                report.min_quality_seen = min(report.min_quality_seen, q_min_after)
                if on_pass is not None:
                    on_pass(record)
                logger.info(
                    "pass %d (b=%.2f): q_min %.4f -> %.4f, %d patches, %d stalled, %.3fs",
                    pass_index, b, q_min_before, q_min_after, len(patches), stalled,
                    record.elapsed_s,
                )
                if q_min_after - q_min_before < config.convergence_tol:
                    break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    report.final_metrics = global_metrics(mesh, adjacency)
    boundary_final = surface_enclosed_volume(mesh.vertices, adjacency.boundary_faces)
    report.volume_drift_percent = (
        abs(boundary_final - boundary_volume_0) / abs(boundary_volume_0) * 100.0
        if boundary_volume_0 else 0.0
    )
    report.elapsed_s = time.perf_counter() - t0
    return report
