"""Tetrahedral mesh data model and geometric primitives.

Coordinates are float64 Cartesian, connectivity is 0-based.  Signed volumes
follow the right-hand rule: a tet (p0, p1, p2, p3) is positively oriented
when p3 lies on the positive side of the oriented face (p0, p1, p2).
Negative volumes are representable on purpose so that tangled meshes can be
loaded and untangled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from tetforge.errors import DegenerateTetError, MeshStructureError


class VertexClass(IntEnum):
    INTERIOR = 0
    SURFACE_SMOOTH = 1
    FEATURE_EDGE = 2
    CORNER = 3
    USER_FIXED = 4


# Vertex-slot order of the six edges of a tet, and the two remaining slots
# opposite each edge.  dihedral_angles() reports angles in this edge order.
TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TET_EDGE_OPPOSITE = ((2, 3), (1, 3), (1, 2), (0, 3), (0, 2), (0, 1))

# Faces of a positively oriented tet, wound so their normals point outward.
TET_FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))


@dataclass
class TetMesh:
    """A tetrahedral mesh with an optional oriented surface triangulation.

    vertices : (nv, 3) float64
    tets : (nt, 4) int64, four distinct vertex ids per element
    surface_tris : (ns, 3) int64, outward-oriented by the right-hand rule
    vertex_class : (nv,) uint8 VertexClass codes, filled by build_topology
    vertex_refs / tet_refs / tri_refs : integer tags carried through file I/O
    """

    vertices: np.ndarray
    tets: np.ndarray
    surface_tris: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    vertex_class: np.ndarray | None = None
    vertex_refs: np.ndarray | None = None
    tet_refs: np.ndarray | None = None
    tri_refs: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        self.tets = np.ascontiguousarray(np.asarray(self.tets, dtype=np.int64).reshape(-1, 4))
        self.surface_tris = np.ascontiguousarray(np.asarray(self.surface_tris, dtype=np.int64).reshape(-1, 3))
        if self.vertex_refs is None:
            self.vertex_refs = np.zeros(len(self.vertices), dtype=np.int64)
        if self.tet_refs is None:
            self.tet_refs = np.zeros(len(self.tets), dtype=np.int64)
        if self.tri_refs is None:
            self.tri_refs = np.zeros(len(self.surface_tris), dtype=np.int64)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_tets(self) -> int:
        return len(self.tets)

    def tet_points(self, ids=None) -> np.ndarray:
        """Coordinates of tets as an (m, 4, 3) array."""
        tets = self.tets if ids is None else self.tets[ids]
        return self.vertices[tets]

    def copy(self) -> "TetMesh":
        return TetMesh(
            vertices=self.vertices.copy(),
            tets=self.tets.copy(),
            surface_tris=self.surface_tris.copy(),
            vertex_class=None if self.vertex_class is None else self.vertex_class.copy(),
            vertex_refs=self.vertex_refs.copy(),
            tet_refs=self.tet_refs.copy(),
            tri_refs=self.tri_refs.copy(),
        )

    def validate(self, allow_internal_surfaces: bool = True) -> None:
        """Check structural invariants, raising MeshStructureError on failure.

        Internal surfaces (triangles shared by two tets, e.g. crack faces)
        are tolerated by default; a triangle matching no tet face never is.
        """
        nv = self.num_vertices
        if not np.all(np.isfinite(self.vertices)):
            raise MeshStructureError("non-finite vertex coordinates")
        if self.num_tets:
            if self.tets.min() < 0 or self.tets.max() >= nv:
                raise MeshStructureError("tet vertex index out of range")
            sorted_tets = np.sort(self.tets, axis=1)
            if np.any(sorted_tets[:, :-1] == sorted_tets[:, 1:]):
                raise MeshStructureError("tet with repeated vertex")
        if len(self.surface_tris):
            if self.surface_tris.min() < 0 or self.surface_tris.max() >= nv:
                raise MeshStructureError("surface triangle index out of range")
            counts = _face_incidence(self.tets)
            max_owned = 2 if allow_internal_surfaces else 1
            for i, tri in enumerate(self.surface_tris):
                key = tuple(sorted(tri.tolist()))
                owners = counts.get(key, 0)
                if owners == 0:
                    raise MeshStructureError(f"surface triangle {i} is not a face of any tet")
                if owners > max_owned:
                    raise MeshStructureError(f"surface triangle {i} is shared by {owners} tets")


def _face_incidence(tets: np.ndarray) -> dict:
    counts: dict = {}
    for tet in tets:
        t = tet.tolist()
        for fa, fb, fc in TET_FACES:
            key = tuple(sorted((t[fa], t[fb], t[fc])))
            counts[key] = counts.get(key, 0) + 1
    return counts


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cross product for (m, 3) arrays, faster than np.cross."""
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def tet_signed_volume(p0, p1, p2, p3) -> float:
    """Signed volume det[p1-p0, p2-p0, p3-p0] / 6."""
    p0 = np.asarray(p0, dtype=np.float64)
    e1 = np.asarray(p1, dtype=np.float64) - p0
    e2 = np.asarray(p2, dtype=np.float64) - p0
    e3 = np.asarray(p3, dtype=np.float64) - p0
    return float(np.dot(e1, np.cross(e2, e3)) / 6.0)


def tet_volumes(points: np.ndarray) -> np.ndarray:
    """Signed volumes for a batch of tets, points shaped (m, 4, 3)."""
    e1 = points[:, 1] - points[:, 0]
    e2 = points[:, 2] - points[:, 0]
    e3 = points[:, 3] - points[:, 0]
    return np.einsum("ij,ij->i", e1, _cross_rows(e2, e3)) / 6.0


def dihedral_angles_batch(points: np.ndarray) -> np.ndarray:
    """Six interior dihedral angles in degrees for each tet in (m, 4, 3).

    Angle k lies along TET_EDGES[k].  Degenerate edges produce NaN rather
    than raising; the scalar wrapper turns those into errors.
    """
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    out = np.empty((m, 6))
    for k, ((i, j), (a, b)) in enumerate(zip(TET_EDGES, TET_EDGE_OPPOSITE)):
        e = points[:, j] - points[:, i]
        elen = np.linalg.norm(e, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            ehat = e / elen[:, None]
            va = points[:, a] - points[:, i]
            vb = points[:, b] - points[:, i]
            va = va - np.einsum("ij,ij->i", va, ehat)[:, None] * ehat
            vb = vb - np.einsum("ij,ij->i", vb, ehat)[:, None] * ehat
            cosv = np.einsum("ij,ij->i", va, vb)
            sinv = np.linalg.norm(_cross_rows(va, vb), axis=1)
            ang = np.degrees(np.arctan2(sinv, cosv))
            bad = (np.linalg.norm(va, axis=1) == 0.0) | (np.linalg.norm(vb, axis=1) == 0.0) | (elen == 0.0)
        ang[bad] = np.nan
        out[:, k] = ang
    return out


def dihedral_angles(p0, p1, p2, p3) -> np.ndarray:
    """Six interior dihedral angles in degrees, one per TET_EDGES entry.

    Raises DegenerateTetError when the tet has zero volume (the angles are
    undefined there).
    """
    points = np.asarray([p0, p1, p2, p3], dtype=np.float64)[None]
    if tet_volumes(points)[0] == 0.0:
        raise DegenerateTetError("dihedral angles undefined for a zero-volume tet")
    angles = dihedral_angles_batch(points)[0]
    if np.any(np.isnan(angles)):
        raise DegenerateTetError("dihedral angles undefined: degenerate edge or face")
    return angles


def triangle_area_normals(vertices: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Area-weighted normals (cross/2) of oriented triangles, (ns, 3)."""
    p = vertices[tris]
    return 0.5 * _cross_rows(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def surface_enclosed_volume(vertices: np.ndarray, tris: np.ndarray) -> float:
    """Volume enclosed by an outward-oriented closed triangulation.

    Discrete divergence theorem: V = (1/3) sum over triangles of
    (centroid . area-weighted normal).  Exact for flat triangles.
    """
    if len(tris) == 0:
        return 0.0
    p = vertices[tris]
    centroids = p.mean(axis=1)
    n = triangle_area_normals(vertices, tris)
    return float(np.einsum("ij,ij->i", centroids, n).sum() / 3.0)
