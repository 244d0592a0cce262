"""Upper and lower infinity-Laplacian envelopes by quadratic extremisation over faces.

For a norm ``φ``, a gradient ``p`` and a symmetric matrix ``X`` the upper
envelope is ``max {Q_X(q - α p/|p|) : q ∈ ∂φ*(p)}`` and the lower one is the
corresponding minimum; ``α = 0`` gives the unshifted operators.  Faces have
affine dimension at most two, so the extremum is found exactly by checking
every stratum (interior stationary point, edges, vertices).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geometry as geo
from .norms import Face, FinslerNorm, make_face

__all__ = [
    "SymQuadratic",
    "OperatorResult",
    "extremize_quadratic_over_face",
    "infinity_operator",
    "envelope_faces",
]


class SymQuadratic:
    """Quadratic form ``Q_X(v) = <X v, v>`` with ``X`` symmetrised on construction."""

    def __init__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] != X.shape[1]:
            raise ValueError("X must be square")
        self.X = 0.5 * (X + X.T)

    @property
    def dim(self) -> int:
        return self.X.shape[0]

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        return np.einsum("...i,ij,...j->...", v, self.X, v)

    def __repr__(self):
        return f"SymQuadratic({self.X.tolist()})"


def _as_quadratic(X) -> SymQuadratic:
    return X if isinstance(X, SymQuadratic) else SymQuadratic(X)


@dataclass
class OperatorResult:
    """Extremal value of ``Q_X(q - shift)`` and the face point ``q`` attaining it."""

    value: float
    point: np.ndarray
    face: Face | None
    flags: dict = field(default_factory=dict)


def _pick(values, points, mode):
    k = int(np.argmax(values)) if mode == "max" else int(np.argmin(values))
    return float(values[k]), points[k]


def _segment_candidates(Q: SymQuadratic, a, b, shift):
    """Endpoints plus the parabola vertex of ``t -> Q(a + t(b-a) - shift)`` if inside."""
    d = b - a
    a0 = a - shift
    qd = float(d @ Q.X @ d)
    cands = [a, b]
    if qd != 0.0:
        t = -float(a0 @ Q.X @ d) / qd
        if 0.0 < t < 1.0:
            cands.append(a + t * d)
    return cands


def _polygon_candidates(Q: SymQuadratic, verts, normal, shift):
    """Candidates for a planar polygon in 3D: stationary point, edge vertices, vertices."""
    cands = []
    k = len(verts)
    for i in range(k):
        cands.extend(_segment_candidates(Q, verts[i], verts[(i + 1) % k], shift))
    basis = geo.orthonormal_complement(normal)  # (2, 3): in-plane directions
    H = basis @ Q.X @ basis.T
    if abs(np.linalg.det(H)) > 1e-14:
        c0 = verts[0] - shift
        s = np.linalg.solve(H, -basis @ Q.X @ c0)
        q = verts[0] + s @ basis
        if _in_polygon(q, verts, basis):
            cands.append(q)
    return cands


def _in_polygon(q, verts, basis, tol=1e-12):
    loc = (verts - verts.mean(axis=0)) @ basis.T
    x = basis @ (q - verts.mean(axis=0))
    k = len(loc)
    signs = []
    for i in range(k):
        a, b = loc[i], loc[(i + 1) % k]
        signs.append((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]))
    signs = np.array(signs)
    return bool(np.all(signs >= -tol) or np.all(signs <= tol))


def extremize_quadratic_over_face(X, face: Face, shift=None, mode: str = "max") -> OperatorResult:
    """Exact max or min of ``Q_X(q - shift)`` over a face of dimension at most two.

    Parameters
    ----------
    X : array_like or SymQuadratic
    face : Face
    shift : array_like, optional
        Subtracted from every face point before evaluating ``Q_X``.
    mode : {"max", "min"}

    Raises
    ------
    ValueError
        If ``face.affine_dim > 2`` or ``mode`` is unknown.
    """
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    Q = _as_quadratic(X)
    v = face.vertices
    shift = np.zeros(v.shape[1]) if shift is None else np.asarray(shift, dtype=float)
    if face.affine_dim == 0:
        cands = [v[0]]
    elif face.affine_dim == 1:
        cands = _segment_candidates(Q, v[0], v[-1], shift)
    elif face.affine_dim == 2 and v.shape[1] == 3:
        cands = _polygon_candidates(Q, v, face.normal, shift)
    else:
        raise ValueError(f"unsupported face dimension {face.affine_dim}")
    pts = np.array(cands)
    value, point = _pick(Q(pts - shift), pts, mode)
    return OperatorResult(value, point, face)


def envelope_faces(norm: FinslerNorm):
    """All facets of a polytope unit ball as :class:`Face` objects."""
    ball = norm.polytope
    out = []
    for f, a in zip(ball.facets, _facet_normals(ball)):
        out.append(make_face(ball.vertices[f], a))
    return out


def _facet_normals(ball):
    if ball.dim == 2:
        normals = []
        for f in ball.facets:
            a, b = ball.vertices[f[0]], ball.vertices[f[1]]
            t = b - a
            n = np.array([t[1], -t[0]])
            if n @ a < 0:
                n = -n
            normals.append(n)
        return normals
    normals = []
    for f in ball.facets:
        pts = ball.vertices[f]
        n = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        if n @ pts[0] < 0:
            n = -n
        normals.append(n)
    return normals


def _boundary_extremum(norm: FinslerNorm, Q: SymQuadratic, mode: str):
    sign = 1.0 if mode == "max" else -1.0

    def objective(U, rows):
        b = norm.boundary_points(U.reshape(-1, norm.dim)).reshape(U.shape)
        return sign * Q(b)

    val, u = geo.maximize_over_sphere(objective, 1, norm.dim)
    q = norm.boundary_points(u)[0]
    return sign * float(val[0]), q


def infinity_operator(norm: FinslerNorm, kind: str, alpha: float, p, X) -> OperatorResult:
    """Shifted envelope ``G^{*,α}`` (``kind="upper"``) or ``G_{*,α}`` (``"lower"``).

    For ``p != 0`` the quadratic ``Q_X(q - α p/|p|)`` is extremised over the
    face ``∂φ*(p)``.  For ``p = 0`` the extremum is taken over the whole
    unit sphere ``{φ = 1}``: all facets for polytopes, a sampled and refined
    boundary otherwise.  In that case ``flags["origin_beats_boundary"]``
    records whether ``q = 0`` would give a larger (upper) or smaller (lower)
    value than the boundary.
    """
    if kind not in ("upper", "lower"):
        raise ValueError("kind must be 'upper' or 'lower'")
    mode = "max" if kind == "upper" else "min"
    Q = _as_quadratic(X)
    p = np.asarray(p, dtype=float).reshape(norm.dim)
    if Q.dim != norm.dim:
        raise ValueError("dimension mismatch between X and the norm")
    if np.any(p != 0.0):
        face = norm.face(p)
        shift = alpha * p / np.linalg.norm(p)
        return extremize_quadratic_over_face(Q, face, shift, mode)

    if norm.polytope is not None:
        best = None
        for face in envelope_faces(norm):
            r = extremize_quadratic_over_face(Q, face, None, mode)
            if best is None or (r.value > best.value if mode == "max" else r.value < best.value):
                best = r
        result = best
    else:
        value, q = _boundary_extremum(norm, Q, mode)
        result = OperatorResult(value, q, None)
    beats = result.value < 0.0 if mode == "max" else result.value > 0.0
    result.flags = {"envelope": True, "origin_beats_boundary": bool(beats)}
    return result
