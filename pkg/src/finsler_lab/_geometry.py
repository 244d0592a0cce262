"""Low-level convex geometry helpers shared by the norm and cone modules.

Everything here is vectorised over leading axes: points are arrays of
shape ``(..., d)``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def as_points(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise ValueError("expected a point or an array of points")
    if dim is not None and x.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {x.shape[-1]}")
    return x


def orthonormal_complement(e: np.ndarray) -> np.ndarray:
    """Rows form an orthonormal basis of the hyperplane ``{e}^perp``."""
    e = np.asarray(e, dtype=float)
    e = e / np.linalg.norm(e)
    d = e.size
    if d == 2:
        return np.array([[-e[1], e[0]]])
    # Householder-free: QR on [e | I] gives a completion of e.
    q, _ = np.linalg.qr(np.column_stack([e, np.eye(d)]))
    basis = q[:, 1:d].T
    # make the basis deterministic in sign
    for i in range(basis.shape[0]):
        k = np.argmax(np.abs(basis[i]))
        if basis[i, k] < 0:
            basis[i] = -basis[i]
    return basis


def unit_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors (circle or Fibonacci sphere)."""
    if dim == 2:
        t = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(t), np.sin(t)])
    if dim == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        t = np.pi * (1.0 + math.sqrt(5.0)) * i
        return np.column_stack([r * np.cos(t), r * np.sin(t), z])
    rng = np.random.default_rng(12345)
    u = rng.standard_normal((n, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def maximize_over_sphere(objective, batch: int, dim: int, n_init: int | None = None,
                         step_tol: float = 1e-11):
    """Maximise an objective over unit directions, independently per batch row.

    ``objective(U, rows)`` receives directions ``U`` of shape ``(n, K, dim)``
    for the batch rows selected by the slice ``rows`` (``n`` of them) and
    returns values of shape ``(n, K)``.  A dense direction sweep is followed
    by a compass search on the sphere with step halving.

    Returns ``(best_value, best_direction)`` of shapes ``(batch,)`` and
    ``(batch, dim)``.
    """
    if n_init is None:
        n_init = 4096 if dim == 2 else 20000
    dirs = unit_directions(dim, n_init)
    chunk = max(1, 4_000_000 // (n_init * dim))
    best_val = np.empty(batch)
    best_dir = np.empty((batch, dim))
    for s in range(0, batch, chunk):
        sl = slice(s, min(batch, s + chunk))
        nb = sl.stop - sl.start
        vals = objective(np.broadcast_to(dirs, (nb, n_init, dim)), sl)
        k = np.argmax(vals, axis=1)
        best_val[sl] = vals[np.arange(nb), k]
        best_dir[sl] = dirs[k]

    everything = slice(0, batch)
    rows = np.arange(batch)
    if dim == 2:
        ang = np.arctan2(best_dir[:, 1], best_dir[:, 0])
        step = np.full(batch, 2.0 * np.pi / n_init)
        while np.max(step) > step_tol:
            cand = np.stack([ang - step, ang + step], axis=1)
            vals = objective(np.stack([np.cos(cand), np.sin(cand)], axis=-1), everything)
            k = np.argmax(vals, axis=1)
            v = vals[rows, k]
            better = v > best_val
            ang = np.where(better, cand[rows, k], ang)
            best_val = np.where(better, v, best_val)
            step = np.where(better, step, 0.5 * step)
        return best_val, np.column_stack([np.cos(ang), np.sin(ang)])

    step = np.full(batch, 2.0 * math.sqrt(4.0 * np.pi / n_init))
    for _ in range(2000):
        if np.max(step) <= step_tol:
            break
        tang = np.stack([orthonormal_complement(u) for u in best_dir])
        moves = np.concatenate([tang, -tang], axis=1)
        cand = best_dir[:, None, :] + step[:, None, None] * moves
        cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
        vals = objective(cand, everything)
        k = np.argmax(vals, axis=1)
        v = vals[rows, k]
        better = v > best_val
        best_dir = np.where(better[:, None], cand[rows, k], best_dir)
        best_val = np.where(better, v, best_val)
        step = np.where(better, step, 0.5 * step)
    return best_val, best_dir


def golden_max(fun, lo, hi, iters: int = 80):
    """Vectorised golden-section maximisation of unimodal ``fun`` on ``[lo, hi]``."""
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    a = hi - GOLDEN * (hi - lo)
    b = lo + GOLDEN * (hi - lo)
    fa = fun(a)
    fb = fun(b)
    for _ in range(iters):
        left = fa >= fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        b_new = np.where(left, a, lo + GOLDEN * (hi - lo))
        a_new = np.where(left, hi - GOLDEN * (hi - lo), b)
        fb_new = np.where(left, fa, np.nan)
        fa_new = np.where(left, np.nan, fb)
        need_a = left
        need_b = ~left
        a, b = a_new, b_new
        if np.any(need_a):
            fa_new = np.where(need_a, fun(a), fa_new)
        if np.any(need_b):
            fb_new = np.where(need_b, fun(b), fb_new)
        fa, fb = fa_new, fb_new
    x = np.where(fa >= fb, a, b)
    return x, np.maximum(fa, fb)


# --------------------------------------------------------------------------
# polytopes


def enumerate_vertices(rows: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Vertices of ``{q : rows @ q <= 1}`` by solving all d-subsets of constraints."""
    m, d = rows.shape
    found = []
    for idx in itertools.combinations(range(m), d):
        a = rows[list(idx)]
        if abs(np.linalg.det(a)) < 1e-12:
            continue
        q = np.linalg.solve(a, np.ones(d))
        if np.all(rows @ q <= 1.0 + tol):
            found.append(q)
    if not found:
        raise ValueError("constraint rows do not describe a bounded polytope")
    return unique_points(np.array(found))


def unique_points(pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    out = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= tol for q in out):
            out.append(p)
    return np.array(out)


class PolytopeBall:
    """A convex polytope containing the origin in its interior (d = 2 or 3).

    Holds both descriptions: ``rows`` (``{q : <a_i, q> <= 1}``) and
    ``vertices``.  In 2D the vertices are stored counter-clockwise; in 3D
    ``facets`` lists counter-clockwise vertex-index cycles.
    """

    def __init__(self, rows=None, vertices=None):
        if (rows is None) == (vertices is None):
            raise ValueError("give exactly one of rows / vertices")
        if rows is not None:
            rows = np.atleast_2d(np.asarray(rows, dtype=float))
            if np.any(np.linalg.norm(rows, axis=1) == 0):
                raise ValueError("constraint rows must be nonzero")
            vertices = enumerate_vertices(rows)
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        d = vertices.shape[1]
        if d not in (2, 3):
            raise ValueError("polytope norms are supported in dimension 2 or 3 only")
        if np.any(np.linalg.norm(vertices, axis=1) == 0):
            raise ValueError("vertices must be nonzero")
        try:
            hull = ConvexHull(vertices)
        except QhullError as exc:
            raise ValueError(f"degenerate polytope: {str(exc).splitlines()[0]}") from None
        normals = hull.equations[:, :d]
        offsets = hull.equations[:, d]
        if np.any(offsets >= -1e-12):
            raise ValueError("the origin must lie in the interior of the unit ball")
        all_rows = normals / (-offsets)[:, None]
        self.dim = d
        self.vertices = vertices[np.sort(hull.vertices)]
        self.rows = unique_points(all_rows, tol=1e-9)
        if d == 2:
            self.vertices = vertices[hull.vertices]  # scipy: ccw order in 2D
            c = self.vertices.mean(axis=0)
            ang = np.arctan2(self.vertices[:, 1] - c[1], self.vertices[:, 0] - c[0])
            self.vertices = self.vertices[np.argsort(ang)]
            self.vertices = _drop_collinear(self.vertices)
            self.facets = [np.array([i, (i + 1) % len(self.vertices)])
                           for i in range(len(self.vertices))]
            self._edge_a = self.vertices
            self._edge_ab = np.roll(self.vertices, -1, axis=0) - self.vertices
            self._edge_l2 = np.sum(self._edge_ab ** 2, axis=1)
        else:
            self.facets = []
            for a in self.rows:
                on = np.where(np.abs(self.vertices @ a - 1.0) <= 1e-9)[0]
                self.facets.append(order_planar(self.vertices, on, a))
        self.triangles = np.array(
            [[f[0], f[i], f[i + 1]] for f in self.facets if len(f) >= 3
             for i in range(1, len(f) - 1)], dtype=int).reshape(-1, 3)

    def gauge(self, x):
        v = np.max(x @ self.rows.T, axis=-1)
        return np.maximum(v, 0.0)

    def support(self, p):
        return np.max(p @ self.vertices.T, axis=-1)

    def contains(self, x, tol: float = 0.0):
        return np.all(x @ self.rows.T <= 1.0 + tol, axis=-1)

    def distance(self, x):
        """Euclidean distance from points to the polytope (0 inside)."""
        x = np.asarray(x, dtype=float)
        inside = self.contains(x)
        if self.dim == 2:
            # all edges at once: points (..., 1, 2) against edges (m, 2)
            AB = self._edge_ab
            d = x[..., None, :] - self._edge_a
            t = np.einsum("...mi,mi->...m", d, AB)
            d = d - np.minimum(np.maximum(t / self._edge_l2, 0.0), 1.0)[..., None] * AB
            best = np.sqrt(np.einsum("...mi,...mi->...m", d, d).min(axis=-1))
        else:
            best = np.full(x.shape[:-1], np.inf)
            for t in self.triangles:
                best = np.minimum(best, triangle_distance(x, *self.vertices[t]))
        return np.where(inside, 0.0, best)

    def face_indices(self, p, tol: float = 1e-9):
        vals = self.vertices @ np.asarray(p, dtype=float)
        h = np.max(vals)
        return np.where(vals >= h - tol * abs(h))[0], h


def _drop_collinear(v: np.ndarray) -> np.ndarray:
    keep = []
    n = len(v)
    for i in range(n):
        a, b, c = v[i - 1], v[i], v[(i + 1) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) > 1e-12:
            keep.append(i)
    return v[keep]


def order_planar(points: np.ndarray, idx, normal) -> np.ndarray:
    """Order coplanar points counter-clockwise around ``normal``."""
    idx = np.asarray(idx)
    if len(idx) < 3:
        return idx
    pts = points[idx]
    c = pts.mean(axis=0)
    basis = orthonormal_complement(np.asarray(normal, dtype=float))
    loc = (pts - c) @ basis.T
    ang = np.arctan2(loc[:, 1], loc[:, 0])
    n = np.asarray(normal, dtype=float)
    # orientation: basis rows (b0, b1) with b0 x b1 parallel to n?
    if np.dot(np.cross(basis[0], basis[1]), n) < 0:
        ang = -ang
    return idx[np.argsort(ang)]


def segment_distance(x, a, b):
    """Distance from points ``x`` to the segment ``[a, b]``."""
    ab = b - a
    L2 = float(ab @ ab)
    d = x - a
    if L2 == 0.0:
        return np.sqrt(np.sum(d * d, axis=-1))
    # plain ufuncs: this sits in the innermost loop of membership bisection
    t = np.minimum(np.maximum((d @ ab) / L2, 0.0), 1.0)
    d = d - t[..., None] * ab
    return np.sqrt(np.sum(d * d, axis=-1))


def segment_closest(x, a, b):
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.broadcast_to(a, x.shape).copy()
    t = np.clip(((x - a) @ ab) / L2, 0.0, 1.0)
    return a + t[..., None] * ab


def triangle_closest(x, a, b, c):
    """Closest points on triangle ``abc`` (3D) to points ``x``."""
    n = np.cross(b - a, c - a)
    nn = float(n @ n)
    if nn == 0.0:
        cands = [segment_closest(x, a, b), segment_closest(x, b, c), segment_closest(x, a, c)]
        d = np.stack([np.linalg.norm(x - q, axis=-1) for q in cands])
        k = np.argmin(d, axis=0)
        return np.choose(k[..., None], cands)
    proj = x - (((x - a) @ n) / nn)[..., None] * n
    s0 = np.cross(b - a, proj - a) @ n
    s1 = np.cross(c - b, proj - b) @ n
    s2 = np.cross(a - c, proj - c) @ n
    inside = (s0 >= 0) & (s1 >= 0) & (s2 >= 0)
    cands = [segment_closest(x, a, b), segment_closest(x, b, c), segment_closest(x, c, a)]
    d = np.stack([np.linalg.norm(x - q, axis=-1) for q in cands])
    k = np.argmin(d, axis=0)
    edge = np.take_along_axis(np.stack(cands), k[None, ..., None], axis=0)[0]
    return np.where(inside[..., None], proj, edge)


def triangle_distance(x, a, b, c):
    return np.linalg.norm(x - triangle_closest(x, a, b, c), axis=-1)


def affine_rank(points: np.ndarray, tol: float = 1e-9) -> int:
    if len(points) <= 1:
        return 0
    diffs = points[1:] - points[0]
    s = np.linalg.svd(diffs, compute_uv=False)
    return int(np.sum(s > tol))
