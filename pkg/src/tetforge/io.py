"""Medit (.mesh) and legacy-VTK (.vtk) readers and writers.

Indices are 1-based on disk for Medit and 0-based for VTK; in memory both
map to 0-based TetMesh connectivity.  Coordinates are printed with 17
significant digits, which round-trips float64 exactly.  Writers go through
a temp file in the destination directory followed by an atomic rename.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from tetforge.errors import MeshFormatError
from tetforge.mesh import TetMesh

FORMATS = ("medit", "vtk")

_VTK_TET = 10
_VTK_TRI = 5


def infer_format(path) -> str:
    ext = Path(path).suffix.lower()
    if ext == ".mesh":
        return "medit"
    if ext == ".vtk":
        return "vtk"
    raise MeshFormatError(f"cannot infer mesh format from extension {ext!r} of {path}")


def load_mesh(path, fmt: str | None = None) -> TetMesh:
    """Read a tetrahedral mesh; fmt is 'medit', 'vtk', or None to infer."""
    fmt = fmt or infer_format(path)
    if fmt == "medit":
        return _load_medit(path)
    if fmt == "vtk":
        return _load_vtk(path)
    raise MeshFormatError(f"unknown mesh format {fmt!r}")


def save_mesh(mesh: TetMesh, path, fmt: str | None = None) -> None:
    """Write a mesh atomically; fmt is 'medit', 'vtk', or None to infer."""
    mesh.validate()
    fmt = fmt or infer_format(path)
    if fmt == "medit":
        text = _format_medit(mesh)
    elif fmt == "vtk":
        text = _format_vtk(mesh)
    else:
        raise MeshFormatError(f"unknown mesh format {fmt!r}")
    atomic_write_text(path, text)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _g17(x: float) -> str:
    return f"{x:.17g}"


# --- Medit ---------------------------------------------------------------

# Sections we skip: keyword followed by a count and that many records.
_MEDIT_SKIP = {"Edges": 3, "Corners": 1, "RequiredVertices": 1, "Ridges": 1,
               "Quadrilaterals": 5, "Hexahedra": 9, "Normals": 3, "Tangents": 3}


class _Lines:
    """Line cursor that tracks 1-based line numbers and skips blank lines.

    Medit files may carry '#' comments; VTK must keep them (its header line
    starts with one).
    """

    def __init__(self, path, strip_comments=True):
        with open(path, "r") as fh:
            self.lines = fh.readlines()
        self.pos = 0
        self.strip_comments = strip_comments

    def next_tokens(self):
        while self.pos < len(self.lines):
            self.pos += 1
            raw = self.lines[self.pos - 1]
            if self.strip_comments:
                raw = raw.split("#", 1)[0]
            raw = raw.strip()
            if raw:
                return raw.split(), self.pos
        return None, self.pos


def _medit_count(cursor: _Lines, tokens, lineno: int, keyword: str) -> int:
    if len(tokens) > 1:
        value, where = tokens[1], lineno
    else:
        nxt, where = cursor.next_tokens()
        if nxt is None:
            raise MeshFormatError(f"missing count after {keyword!r}", line=lineno)
        value = nxt[0]
    try:
        return int(value)
    except ValueError:
        raise MeshFormatError(f"bad count {value!r} after {keyword!r}", line=where) from None


def _medit_rows(cursor: _Lines, count: int, width: int, kind: str, keyword: str):
    rows = np.empty((count, width + 1), dtype=np.float64 if kind == "float" else np.int64)
    row_lines = np.empty(count, dtype=np.int64)
    for i in range(count):
        tokens, lineno = cursor.next_tokens()
        if tokens is None:
            raise MeshFormatError(f"unexpected end of file inside {keyword!r}", line=lineno)
        if len(tokens) < width:
            raise MeshFormatError(f"expected at least {width} fields in {keyword!r} record", line=lineno)
        try:
            vals = [float(t) if kind == "float" else int(t) for t in tokens[:width]]
            ref = int(float(tokens[width])) if len(tokens) > width else 0
        except ValueError:
            raise MeshFormatError(f"malformed {keyword!r} record", line=lineno) from None
        rows[i, :width] = vals
        rows[i, width] = ref
        row_lines[i] = lineno
    return rows, row_lines


def _load_medit(path) -> TetMesh:
    cursor = _Lines(path)
    tokens, lineno = cursor.next_tokens()
    if tokens is None or tokens[0] != "MeshVersionFormatted":
        raise MeshFormatError("expected 'MeshVersionFormatted' header", line=lineno)
    vertices = tets = tris = None
    vrefs = trefs = srefs = None
    while True:
        tokens, lineno = cursor.next_tokens()
        if tokens is None:
            break
        keyword = tokens[0]
        if keyword == "End":
            break
        if keyword == "Dimension":
            dim = _medit_count(cursor, tokens, lineno, keyword)
            if dim != 3:
                raise MeshFormatError(f"only Dimension 3 supported, got {dim}", line=lineno)
        elif keyword == "Vertices":
            count = _medit_count(cursor, tokens, lineno, keyword)
            rows, _ = _medit_rows(cursor, count, 3, "float", keyword)
            vertices, vrefs = rows[:, :3], rows[:, 3].astype(np.int64)
        elif keyword == "Tetrahedra":
            count = _medit_count(cursor, tokens, lineno, keyword)
            rows, tet_lines = _medit_rows(cursor, count, 4, "int", keyword)
            tets, trefs = rows[:, :4] - 1, rows[:, 4]
        elif keyword == "Triangles":
            count = _medit_count(cursor, tokens, lineno, keyword)
            rows, tri_lines = _medit_rows(cursor, count, 3, "int", keyword)
            tris, srefs = rows[:, :3] - 1, rows[:, 3]
        elif keyword in _MEDIT_SKIP:
            count = _medit_count(cursor, tokens, lineno, keyword)
            for _ in range(count):
                cursor.next_tokens()
        else:
            raise MeshFormatError(f"unrecognized Medit keyword {keyword!r}", line=lineno)
    if vertices is None:
        raise MeshFormatError("file has no Vertices section", line=lineno)
    if tets is None:
        raise MeshFormatError("file has no Tetrahedra section", line=lineno)
    nv = len(vertices)
    if tets.size:
        bad_rows = np.flatnonzero(((tets < 0) | (tets >= nv)).any(axis=1))
        if bad_rows.size:
            raise MeshFormatError(f"tetrahedron vertex index out of range 1..{nv}",
                                  line=int(tet_lines[bad_rows[0]]))
    if tris is not None and tris.size:
        bad_rows = np.flatnonzero(((tris < 0) | (tris >= nv)).any(axis=1))
        if bad_rows.size:
            raise MeshFormatError(f"triangle vertex index out of range 1..{nv}",
                                  line=int(tri_lines[bad_rows[0]]))
    return TetMesh(
        vertices=vertices,
        tets=tets,
        surface_tris=tris if tris is not None else np.zeros((0, 3), dtype=np.int64),
        vertex_refs=vrefs,
        tet_refs=trefs,
        tri_refs=srefs,
    )


def _format_medit(mesh: TetMesh) -> str:
    out = ["MeshVersionFormatted 2", "Dimension 3", "Vertices", str(mesh.num_vertices)]
    for p, r in zip(mesh.vertices, mesh.vertex_refs):
        out.append(f"{_g17(p[0])} {_g17(p[1])} {_g17(p[2])} {r}")
    if len(mesh.surface_tris):
        out.append("Triangles")
        out.append(str(len(mesh.surface_tris)))
        for t, r in zip(mesh.surface_tris + 1, mesh.tri_refs):
            out.append(f"{t[0]} {t[1]} {t[2]} {r}")
    out.append("Tetrahedra")
    out.append(str(mesh.num_tets))
    for t, r in zip(mesh.tets + 1, mesh.tet_refs):
        out.append(f"{t[0]} {t[1]} {t[2]} {t[3]} {r}")
    out.append("End")
    return "\n".join(out) + "\n"


# --- VTK legacy ----------------------------------------------------------

def _load_vtk(path) -> TetMesh:
    cursor = _Lines(path, strip_comments=False)
    header, lineno = cursor.next_tokens()
    if header is None or header[0] != "#":
        raise MeshFormatError("expected '# vtk DataFile' header", line=lineno)
    cursor.next_tokens()  # title
    encoding, lineno = cursor.next_tokens()
    if encoding is None or encoding[0].upper() != "ASCII":
        raise MeshFormatError("only ASCII VTK files supported", line=lineno)
    dataset, lineno = cursor.next_tokens()
    if dataset is None or dataset[:2] != ["DATASET", "UNSTRUCTURED_GRID"]:
        raise MeshFormatError("expected 'DATASET UNSTRUCTURED_GRID'", line=lineno)

    def read_values(count, kind, what):
        vals = []
        while len(vals) < count:
            tokens, ln = cursor.next_tokens()
            if tokens is None:
                raise MeshFormatError(f"unexpected end of file inside {what}", line=ln)
            try:
                vals.extend(float(t) if kind == "float" else int(t) for t in tokens)
            except ValueError:
                raise MeshFormatError(f"malformed {what} value", line=ln) from None
        if len(vals) > count:
            raise MeshFormatError(f"too many values in {what}", line=cursor.pos)
        return vals

    tokens, lineno = cursor.next_tokens()
    if tokens is None or tokens[0] != "POINTS":
        raise MeshFormatError("expected POINTS section", line=lineno)
    npts = int(tokens[1])
    vertices = np.array(read_values(3 * npts, "float", "POINTS")).reshape(npts, 3)

    tokens, lineno = cursor.next_tokens()
    if tokens is None or tokens[0] != "CELLS":
        raise MeshFormatError("expected CELLS section", line=lineno)
    ncells, nints = int(tokens[1]), int(tokens[2])
    flat = read_values(nints, "int", "CELLS")
    cells, pos = [], 0
    for _ in range(ncells):
        k = flat[pos]
        cells.append(flat[pos + 1:pos + 1 + k])
        pos += 1 + k
    if pos != nints:
        raise MeshFormatError("CELLS size field disagrees with cell records", line=cursor.pos)

    tokens, lineno = cursor.next_tokens()
    if tokens is None or tokens[0] != "CELL_TYPES":
        raise MeshFormatError("expected CELL_TYPES section", line=lineno)
    types = read_values(int(tokens[1]), "int", "CELL_TYPES")
    if len(types) != ncells:
        raise MeshFormatError("CELL_TYPES count disagrees with CELLS", line=lineno)

    tets, tris = [], []
    for cell, ctype in zip(cells, types):
        if ctype == _VTK_TET:
            if len(cell) != 4:
                raise MeshFormatError("tetra cell without 4 points", line=lineno)
            tets.append(cell)
        elif ctype == _VTK_TRI:
            if len(cell) != 3:
                raise MeshFormatError("triangle cell without 3 points", line=lineno)
            tris.append(cell)
        else:
            raise MeshFormatError(f"unsupported VTK cell type {ctype}", line=lineno)
    tets = np.asarray(tets, dtype=np.int64).reshape(-1, 4)
    tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
    if tets.size and (tets.min() < 0 or tets.max() >= npts):
        raise MeshFormatError(f"cell vertex index out of range 0..{npts - 1}", line=lineno)
    if tris.size and (tris.min() < 0 or tris.max() >= npts):
        raise MeshFormatError(f"cell vertex index out of range 0..{npts - 1}", line=lineno)
    return TetMesh(vertices=vertices, tets=tets, surface_tris=tris)


def _format_vtk(mesh: TetMesh) -> str:
    out = [
        "# vtk DataFile Version 3.0",
        "tetforge mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.num_vertices} double",
    ]
    for p in mesh.vertices:
        out.append(f"{_g17(p[0])} {_g17(p[1])} {_g17(p[2])}")
    ncells = mesh.num_tets + len(mesh.surface_tris)
    nints = 5 * mesh.num_tets + 4 * len(mesh.surface_tris)
    out.append(f"CELLS {ncells} {nints}")
    for t in mesh.tets:
        out.append(f"4 {t[0]} {t[1]} {t[2]} {t[3]}")
    for t in mesh.surface_tris:
        out.append(f"3 {t[0]} {t[1]} {t[2]}")
    out.append(f"CELL_TYPES {ncells}")
    out.extend([str(_VTK_TET)] * mesh.num_tets)
    out.extend([str(_VTK_TRI)] * len(mesh.surface_tris))
    return "\n".join(out) + "\n"
