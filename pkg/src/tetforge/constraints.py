"""Surface motion constraints built from the discretized boundary.

A surface vertex may only move tangentially to the surface the mesh itself
defines: its displacement must be orthogonal to the unit resultant normal
of its incident surface triangles.  Enforcing that per free surface vertex
(collocation, one residual row each) yields a sparse system C dX = g with
g = 0, because the per-vertex constant is captured from the current
position at the start of every pass.  Crease vertices get one row per
normal cluster, which leaves exactly the crease direction free; corners do
not move at all.

The constrained Newton system is formed by null-space projection:

    R  = C^T (C C^T)^-1
    Q  = I - C^T (C C^T)^-1 C
    S' = C^T C + Q^T S Q
    f' = C^T g + Q^T (f - S R g)

so that solving S' dX = -f' keeps the step tangential.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from tetforge.errors import DegenerateNormalError
from tetforge.mesh import TetMesh, VertexClass, triangle_area_normals
from tetforge.topology import AdjacencyIndex

logger = logging.getLogger("tetforge")

PIVOT_TOL = 1e-10


@dataclass
class VertexNormal:
    """Area-weighted resultant normal of a surface vertex."""

    vertex: int
    n: np.ndarray       # sum of incident area-weighted triangle normals
    unit_n: np.ndarray  # n / |n|


@dataclass
class ConstraintSystem:
    """Rows of unit surface normals over patch DOFs, with residuals g.

    c1 holds the per-row captured constant (current position dotted with the
    row normal), which makes g identically zero at capture time.
    """

    C: np.ndarray
    g: np.ndarray
    c1: np.ndarray
    row_vertices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rows_dropped: int = 0

    @property
    def num_rows(self) -> int:
        return self.C.shape[0]


def vertex_normal(v: int, mesh: TetMesh, adjacency: AdjacencyIndex) -> VertexNormal:
    """Resultant of the incident area-weighted triangle normals at v.

    Raises DegenerateNormalError if the resultant vanishes (opposing faces
    cancelling); such a vertex is treated as a corner by the callers.
    """
    tris = adjacency.vertex_tris[v]
    if len(tris) == 0:
        raise DegenerateNormalError(f"vertex {v} has no incident surface triangles")
    n = triangle_area_normals(mesh.vertices, mesh.surface_tris[tris]).sum(axis=0)
    scale = float(np.abs(mesh.vertices).max()) or 1.0
    norm = float(np.linalg.norm(n))
    if norm < 1e-14 * scale * scale:
        raise DegenerateNormalError(f"vertex {v} has a vanishing resultant normal")
    return VertexNormal(vertex=v, n=n, unit_n=n / norm)


def _group_unit_normals(v: int, mesh: TetMesh, adjacency: AdjacencyIndex) -> list:
    """One unit resultant normal per stored normal cluster of vertex v."""
    groups = adjacency.normal_groups.get(v)
    if not groups:
        raise DegenerateNormalError(f"vertex {v} has no normal clusters")
    out = []
    scale = float(np.abs(mesh.vertices).max()) or 1.0
    for tri_ids in groups:
        n = triangle_area_normals(mesh.vertices, mesh.surface_tris[tri_ids]).sum(axis=0)
        norm = float(np.linalg.norm(n))
        if norm < 1e-14 * scale * scale:
            raise DegenerateNormalError(f"vertex {v} has a degenerate cluster normal")
        out.append(n / norm)
    return out


def build_constraints(patch, mesh: TetMesh, adjacency: AdjacencyIndex):
    """Constraint rows for the free surface vertices of a patch.

    Returns (ConstraintSystem, demoted) where demoted lists free vertices
    whose normals degenerated; those are reclassified as corners in place
    and emit no rows, and the caller must drop them from the free set.
    """
    rows, row_vertices, c1, demoted = [], [], [], []
    free = list(patch.free_vertices)
    index_of = {int(v): i for i, v in enumerate(free)}
    n = 3 * len(free)
    for v in free:
        cls = VertexClass(mesh.vertex_class[v])
        if cls not in (VertexClass.SURFACE_SMOOTH, VertexClass.FEATURE_EDGE):
            continue
        try:
            if cls == VertexClass.SURFACE_SMOOTH:
                normals = [vertex_normal(v, mesh, adjacency).unit_n]
            else:
                normals = _group_unit_normals(v, mesh, adjacency)
        except DegenerateNormalError:
            mesh.vertex_class[v] = VertexClass.CORNER
            demoted.append(int(v))
            logger.debug("vertex %d demoted to corner: degenerate normal", v)
            continue
        for unit in normals:
            row = np.zeros(n)
            row[3 * index_of[int(v)]:3 * index_of[int(v)] + 3] = unit
            rows.append(row)
            row_vertices.append(int(v))
            c1.append(float(unit @ mesh.vertices[v]))
    C = np.vstack(rows) if rows else np.zeros((0, n))
    c1 = np.asarray(c1)
    # g = c1 - x . n with c1 captured right here, hence exactly zero.
    system = ConstraintSystem(
        C=C,
        g=np.zeros(len(rows)),
        c1=c1,
        row_vertices=np.asarray(row_vertices, dtype=np.int64),
    )
    return system, demoted


def deduplicate_rows(C: np.ndarray, g: np.ndarray):
    """Drop exactly repeated rows, keeping first occurrences in order."""
    if C.shape[0] == 0:
        return C, g
    seen, keep = set(), []
    for i in range(C.shape[0]):
        key = C[i].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    if len(keep) == C.shape[0]:
        return C, g
    return C[keep], g[keep]


def projector(C: np.ndarray, pivot_tol: float = PIVOT_TOL):
    """Null-space projector Q and right inverse R for a constraint matrix.

    Dependent rows (pivoted-QR pivot below pivot_tol relative to the
    largest) are dropped first.  Returns (Q, R, C_kept, g_keep_indices,
    dropped_count).
    """
    m, n = C.shape
    if m == 0:
        return np.eye(n), np.zeros((n, 0)), C, np.zeros(0, dtype=np.int64), 0
    _, r, piv = scipy.linalg.qr(C.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = pivot_tol * (diag[0] if diag.size and diag[0] > 0 else 1.0)
    rank = int((diag > tol).sum())
    keep = np.sort(piv[:rank])
    dropped = m - rank
    if dropped:
        logger.debug("projector: dropped %d dependent constraint rows", dropped)
    Ck = C[keep]
    M = Ck @ Ck.T
    cho = scipy.linalg.cho_factor(M, check_finite=False)
    R = scipy.linalg.cho_solve(cho, Ck, check_finite=False).T  # C^T (C C^T)^-1
    Q = np.eye(n) - R @ Ck
    return Q, R, Ck, keep, dropped


def project_system(S: np.ndarray, f: np.ndarray, C: np.ndarray, g: np.ndarray):
    """Fold C dX = g into the Newton system; returns (S', f', dropped)."""
    if C is None or C.shape[0] == 0:
        return S, f, 0
    C2, g2 = deduplicate_rows(C, g)
    Q, R, Ck, keep, dropped = projector(C2)
    gk = g2[keep]
    dropped += C.shape[0] - C2.shape[0]
    S_p = Ck.T @ Ck + Q.T @ S @ Q
    f_p = Ck.T @ gk + Q.T @ (f - S @ (R @ gk))
    return S_p, f_p, dropped
