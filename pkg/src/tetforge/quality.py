"""Volume-length element quality and its analytic derivatives.

The quality of a tet is q = 6*sqrt(2) * V / l_rms^3 where V is the signed
volume and l_rms the root mean square of the six edge lengths.  It is 1 for
a regular tet, 0 for a degenerate one and negative for an inverted one, and
is smooth in the vertex positions wherever at least one edge has nonzero
length.

Derivatives are exact closed forms assembled from the volume (a trilinear
polynomial) and the edge-length sum of squares (a quadratic), written in
batch form over (m, 4, 3) point arrays.  The 12 derivative slots are the
x,y,z coordinates of p0..p3 in order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tetforge.errors import DegenerateTetError
from tetforge.mesh import _cross_rows as _cross

# q = QCOEF * V / S^(3/2) with S the sum of squared edge lengths:
# 6*sqrt(2) * V / (S/6)^(3/2) = 6^(5/2)*sqrt(2) * V * S^(-3/2).
QCOEF = 72.0 * np.sqrt(3.0)

# d2S/dx2 is constant: each vertex pairs with the other three.
_HESS_S = 2.0 * np.kron(4.0 * np.eye(4) - np.ones((4, 4)), np.eye(3))


@dataclass
class QualityDiff:
    """Quality with its 12-gradient and symmetric 12x12 Hessian."""

    q: float
    grad: np.ndarray
    hess: np.ndarray


def _skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrices for (m, 3) vectors, shaped (m, 3, 3)."""
    m = v.shape[0]
    out = np.zeros((m, 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def _volume_parts(points: np.ndarray):
    u = points[:, 1] - points[:, 0]
    v = points[:, 2] - points[:, 0]
    w = points[:, 3] - points[:, 0]
    vxw = _cross(v, w)
    vol = np.einsum("ij,ij->i", u, vxw) / 6.0
    grad = np.empty((points.shape[0], 4, 3))
    grad[:, 1] = vxw / 6.0
    grad[:, 2] = _cross(w, u) / 6.0
    grad[:, 3] = _cross(u, v) / 6.0
    grad[:, 0] = -(grad[:, 1] + grad[:, 2] + grad[:, 3])
    return vol, grad.reshape(-1, 12), (u, v, w)


def _volume_hessian(uvw) -> np.ndarray:
    """Hessian of the signed volume, (m, 12, 12).

    V is linear in each vertex, so diagonal blocks vanish and cross blocks
    are scaled cross-product matrices of the opposite edge vectors; the p0
    blocks are the signed sums forced by u,v,w = p1-p0, p2-p0, p3-p0.
    """
    u, v, w = uvw
    m = u.shape[0]
    su, sv, sw = _skew(u) / 6.0, _skew(v) / 6.0, _skew(w) / 6.0
    hess = np.zeros((m, 12, 12))

    def put(a, b, blk):
        hess[:, 3 * a:3 * a + 3, 3 * b:3 * b + 3] = blk

    put(1, 2, -sw)
    put(2, 1, sw)
    put(1, 3, sv)
    put(3, 1, -sv)
    put(2, 3, -su)
    put(3, 2, su)
    put(0, 1, sv - sw)
    put(1, 0, sw - sv)
    put(0, 2, sw - su)
    put(2, 0, su - sw)
    put(0, 3, su - sv)
    put(3, 0, sv - su)
    return hess


def _edge_sq_parts(points: np.ndarray):
    diffs = points[:, :, None, :] - points[:, None, :, :]
    ssum = 0.5 * np.einsum("mabk,mabk->m", diffs, diffs)  # each edge counted twice
    grad = 2.0 * (4.0 * points - points.sum(axis=1, keepdims=True))
    return ssum, grad.reshape(-1, 12)


def quality_batch(points: np.ndarray) -> np.ndarray:
    """Volume-length quality for each tet in an (m, 4, 3) array.

    Rows with all vertices coincident produce NaN.
    """
    points = np.asarray(points, dtype=np.float64)
    u = points[:, 1] - points[:, 0]
    v = points[:, 2] - points[:, 0]
    w = points[:, 3] - points[:, 0]
    vol = np.einsum("ij,ij->i", u, _cross(v, w)) / 6.0
    uv = v - u
    uw = w - u
    vw = w - v
    ssum = (
        np.einsum("ij,ij->i", u, u) + np.einsum("ij,ij->i", v, v)
        + np.einsum("ij,ij->i", w, w) + np.einsum("ij,ij->i", uv, uv)
        + np.einsum("ij,ij->i", uw, uw) + np.einsum("ij,ij->i", vw, vw)
    )
    with np.errstate(invalid="ignore", divide="ignore"):
        return QCOEF * vol / np.power(ssum, 1.5)


def quality_diff_batch(points: np.ndarray):
    """Quality, gradient (m, 12) and Hessian (m, 12, 12) per tet."""
    points = np.asarray(points, dtype=np.float64)
    vol, gv, uvw = _volume_parts(points)
    ssum, gs = _edge_sq_parts(points)
    with np.errstate(invalid="ignore", divide="ignore"):
        s32 = np.power(ssum, -1.5)
        s52 = np.power(ssum, -2.5)
        s72 = np.power(ssum, -3.5)
        q = QCOEF * vol * s32
        grad = QCOEF * (s32[:, None] * gv - 1.5 * (vol * s52)[:, None] * gs)
        hess = s32[:, None, None] * _volume_hessian(uvw)
        cross = np.einsum("mi,mj->mij", gv, gs)
        hess -= 1.5 * s52[:, None, None] * (cross + cross.transpose(0, 2, 1))
        hess += 3.75 * (vol * s72)[:, None, None] * np.einsum("mi,mj->mij", gs, gs)
        hess -= 1.5 * (vol * s52)[:, None, None] * _HESS_S[None]
        hess *= QCOEF
    return q, grad, hess


def volume_length_quality(p0, p1, p2, p3) -> float:
    """Quality of one tet; raises DegenerateTetError if all vertices coincide."""
    points = np.asarray([p0, p1, p2, p3], dtype=np.float64)[None]
    q = quality_batch(points)[0]
    if not np.isfinite(q):
        raise DegenerateTetError("quality undefined: all vertices coincident")
    return float(q)


def volume_length_diff(p0, p1, p2, p3) -> QualityDiff:
    """Quality with analytic first and second derivatives for one tet."""
    points = np.asarray([p0, p1, p2, p3], dtype=np.float64)[None]
    q, grad, hess = quality_diff_batch(points)
    if not np.isfinite(q[0]):
        raise DegenerateTetError("quality undefined: all vertices coincident")
    return QualityDiff(q=float(q[0]), grad=grad[0], hess=hess[0])
