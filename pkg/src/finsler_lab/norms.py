"""Finsler norms: evaluation, dual norms and subdifferential faces.

A Finsler norm is a convex, positively one-homogeneous function that is
positive away from the origin; it need not be symmetric.  Every norm here
evaluates vectorised over points of shape ``(..., d)``.

Variants
--------
PolytopeH   unit ball ``{q : <a_i, q> <= 1}``
PolytopeV   unit ball ``conv{v_1, ..., v_k}``
PNorm       ``x -> ||A x||_p``
Inverted    ``x -> base(-x)``
Regularized see :mod:`finsler_lab.regularize`
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _geometry as geo

FACE_TOL = 1e-9


class BracketError(ValueError):
    """The bracket handed to :func:`gauge_bisect` does not straddle the gauge."""


@dataclass(frozen=True, eq=False)
class Face:
    """Exposed face ``∂φ*(p)`` of a unit ball, stored by its vertices.

    ``vertices`` has shape ``(k, d)``; for two-dimensional faces the vertices
    are ordered around the polygon.
    """

    vertices: np.ndarray
    affine_dim: int
    normal: np.ndarray

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def translated(self, shift) -> "Face":
        return Face(self.vertices + np.asarray(shift, dtype=float), self.affine_dim, self.normal)

    def negated(self) -> "Face":
        return Face(-self.vertices[::-1], self.affine_dim, -self.normal)

    def closest(self, x):
        """Nearest points of the face to ``x`` (shape ``(..., d)``)."""
        x = np.asarray(x, dtype=float)
        v = self.vertices
        if self.affine_dim == 0:
            return np.broadcast_to(v[0], x.shape).copy()
        if self.affine_dim == 1:
            return geo.segment_closest(x, v[0], v[-1])
        if self.affine_dim == 2 and self.dim == 2:
            # a full-dimensional face only occurs for degenerate inputs
            raise ValueError("two-dimensional face in the plane is not an exposed face")
        best = None
        bestd = None
        for i in range(1, len(v) - 1):
            q = geo.triangle_closest(x, v[0], v[i], v[i + 1])
            d = np.linalg.norm(x - q, axis=-1)
            if best is None:
                best, bestd = q, d
            else:
                better = d < bestd
                best = np.where(better[..., None], q, best)
                bestd = np.minimum(d, bestd)
        return best

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.closest(x), axis=-1)

    def hausdorff(self, other: "Face") -> float:
        """Hausdorff distance between two convex faces (attained at vertices)."""
        a = np.max(other.distance(self.vertices))
        b = np.max(self.distance(other.vertices))
        return float(max(a, b))


def make_face(points, normal, tol: float = FACE_TOL) -> Face:
    """Build a :class:`Face` from points lying on a common supporting plane."""
    pts = geo.unique_points(np.atleast_2d(np.asarray(points, dtype=float)), tol=tol)
    k = geo.affine_rank(pts, tol)
    normal = np.asarray(normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    if k == 1:
        direction = pts[-1] - pts[0]
        s = pts @ direction
        pts = pts[[int(np.argmin(s)), int(np.argmax(s))]]
    elif k == 2 and pts.shape[1] == 3:
        pts = pts[geo.order_planar(pts, np.arange(len(pts)), normal)]
    return Face(pts, k, normal)


class FinslerNorm:
    """Common interface; concrete variants override the three primitives."""

    dim: int

    def __call__(self, x):
        x = geo.as_points(x, self.dim)
        return self.value(x)

    def value(self, x):
        raise NotImplementedError

    def dual(self, p):
        raise NotImplementedError

    def face(self, p, tol: float = FACE_TOL) -> Face:
        raise NotImplementedError

    def ball_distance(self, x):
        """Euclidean distance from ``x`` to the unit ball ``{φ <= 1}``."""
        return support_distance(self, x)

    def boundary_points(self, directions):
        """Points of ``{φ = 1}`` along the given (nonzero) directions."""
        u = np.asarray(directions, dtype=float)
        return u / self.value(u)[..., None]

    @property
    def is_polytope(self) -> bool:
        return self.polytope is not None

    @property
    def polytope(self):
        return None

    @property
    def is_smooth(self) -> bool:
        """True when every face ``∂φ*(p)``, ``p != 0``, is a single point."""
        return False


def support_distance(norm: FinslerNorm, x):
    """Distance to ``{norm <= 1}`` via ``max_u <u, x> - φ*(u)`` over unit ``u``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    shape = x.shape[:-1]
    flat = x.reshape(-1, norm.dim)

    def objective(U, rows):
        return np.einsum("bkd,bd->bk", U, flat[rows]) - norm.dual(U)

    val, _ = geo.maximize_over_sphere(objective, flat.shape[0], norm.dim, n_init=720 if norm.dim == 2 else 4000)
    return np.maximum(val, 0.0).reshape(shape)


# ---------------------------------------------------------------------------
# polytopes


class _PolytopeNorm(FinslerNorm):
    @property
    def polytope(self) -> geo.PolytopeBall:
        return self._ball

    @property
    def dim(self) -> int:
        return self._ball.dim

    @property
    def rows(self) -> np.ndarray:
        return self._ball.rows

    @property
    def vertices(self) -> np.ndarray:
        return self._ball.vertices

    def value(self, x):
        return self._ball.gauge(np.asarray(x, dtype=float))

    def dual(self, p):
        return self._ball.support(np.asarray(p, dtype=float))

    def ball_distance(self, x):
        return self._ball.distance(np.asarray(x, dtype=float))

    def face(self, p, tol: float = FACE_TOL) -> Face:
        p = _nonzero(p, self.dim)
        idx, _ = self._ball.face_indices(p, tol)
        return make_face(self._ball.vertices[idx], p)


@dataclass(frozen=True, eq=False)
class PolytopeH(_PolytopeNorm):
    """Norm ``φ(x) = max_i <a_i, x>`` whose unit ball is ``{<a_i, q> <= 1}``."""

    rows_in: np.ndarray

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows_in, dtype=float))
        object.__setattr__(self, "rows_in", rows)
        ball = geo.PolytopeBall(rows=rows)
        # every facet of the hull must come from a given constraint, otherwise
        # the constraint set was unbounded and the enumeration saw only part of it
        for a in ball.rows:
            if not np.any(np.linalg.norm(rows - a, axis=1) <= 1e-7):
                raise ValueError("constraint rows do not describe a bounded unit ball")
        object.__setattr__(self, "_ball", ball)


@dataclass(frozen=True, eq=False)
class PolytopeV(_PolytopeNorm):
    """Norm whose unit ball is the convex hull of ``vertices_in``."""

    vertices_in: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices_in, dtype=float))
        object.__setattr__(self, "vertices_in", v)
        object.__setattr__(self, "_ball", geo.PolytopeBall(vertices=v))


# ---------------------------------------------------------------------------
# p-norms


@dataclass(frozen=True, eq=False)
class PNorm(FinslerNorm):
    """``φ(x) = ||A x||_p`` with ``p`` in ``[1, inf]`` and ``A`` invertible."""

    p: float
    dim: int = 2
    A: np.ndarray | None = None

    def __post_init__(self):
        p = float(self.p)
        if not (p >= 1.0):
            raise ValueError("exponent p must lie in [1, inf]")
        object.__setattr__(self, "p", p)
        if self.A is None:
            A = np.eye(self.dim)
        else:
            A = np.atleast_2d(np.asarray(self.A, dtype=float))
            if A.shape[0] != A.shape[1]:
                raise ValueError("A must be square")
            object.__setattr__(self, "dim", A.shape[0])
        if abs(np.linalg.det(A)) < 1e-12:
            raise ValueError("A must be invertible")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "_Ainv", np.linalg.inv(A))
        ball = None
        if p == 1.0 or math.isinf(p):
            if self.dim not in (2, 3):
                raise ValueError("polytope p-norms are supported in dimension 2 or 3 only")
            if p == 1.0:
                signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * self.dim)).reshape(self.dim, -1).T
                ball = geo.PolytopeBall(rows=signs @ A)
            else:
                ball = geo.PolytopeBall(rows=np.vstack([A, -A]))
        object.__setattr__(self, "_ball", ball)

    @property
    def conjugate(self) -> float:
        p = self.p
        if p == 1.0:
            return math.inf
        if math.isinf(p):
            return 1.0
        return p / (p - 1.0)

    @property
    def polytope(self):
        return self._ball

    @property
    def is_smooth(self) -> bool:
        return 1.0 < self.p < math.inf

    def value(self, x):
        y = np.asarray(x, dtype=float) @ self.A.T
        return _pnorm(y, self.p)

    def dual(self, p):
        w = np.asarray(p, dtype=float) @ self._Ainv
        return _pnorm(w, self.conjugate)

    def ball_distance(self, x):
        x = np.asarray(x, dtype=float)
        if self._ball is not None:
            return self._ball.distance(x)
        if self.p == 2.0 and np.allclose(self.A, np.eye(self.dim)):
            return np.maximum(np.linalg.norm(x, axis=-1) - 1.0, 0.0)
        return support_distance(self, x)

    def face(self, p, tol: float = FACE_TOL) -> Face:
        p = _nonzero(p, self.dim)
        if self._ball is not None:
            idx, _ = self._ball.face_indices(p, tol)
            return make_face(self._ball.vertices[idx], p)
        q = self.conjugate
        w = self._Ainv.T @ p
        g = np.sign(w) * np.abs(w) ** (q - 1.0) / _pnorm(w, q) ** (q - 1.0)
        point = self._Ainv @ g
        return Face(point[None, :], 0, p / np.linalg.norm(p))


def _pnorm(y, p):
    if math.isinf(p):
        return np.max(np.abs(y), axis=-1)
    if p == 1.0:
        return np.sum(np.abs(y), axis=-1)
    if p == 2.0:
        return np.linalg.norm(y, axis=-1)
    m = np.max(np.abs(y), axis=-1, keepdims=True)
    safe = np.where(m == 0.0, 1.0, m)
    return (m[..., 0] * np.sum((np.abs(y) / safe) ** p, axis=-1) ** (1.0 / p))


# ---------------------------------------------------------------------------
# inversion


@dataclass(frozen=True, eq=False)
class Inverted(FinslerNorm):
    """The inverted norm ``x -> base(-x)``."""

    base: FinslerNorm

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def is_smooth(self) -> bool:
        return self.base.is_smooth

    @cached_property
    def _inverted_ball(self):
        b = self.base.polytope
        if b is None:
            return None
        return geo.PolytopeBall(vertices=-b.vertices)

    @property
    def polytope(self):
        return self._inverted_ball

    def value(self, x):
        return self.base.value(-np.asarray(x, dtype=float))

    def dual(self, p):
        return self.base.dual(-np.asarray(p, dtype=float))

    def ball_distance(self, x):
        return self.base.ball_distance(-np.asarray(x, dtype=float))

    def face(self, p, tol: float = FACE_TOL) -> Face:
        p = _nonzero(p, self.dim)
        return self.base.face(-p, tol).negated()


# ---------------------------------------------------------------------------
# dual norm objects


@dataclass(frozen=True, eq=False)
class SupportNorm(FinslerNorm):
    """A norm given by an arbitrary support rule ``x -> support(x)``.

    Used to represent ``φ*`` as a norm in its own right when it has no
    closed-form family; its own dual is computed by direction search.
    """

    support: object
    dim: int = 2

    def value(self, x):
        return self.support(np.asarray(x, dtype=float))

    def dual(self, p):
        return dual_by_search(self, p)


def dual_norm(norm: FinslerNorm) -> FinslerNorm:
    """The dual ``φ*`` as a norm object.

    Polytopes swap their vertex and constraint descriptions (the vertices of
    ``{φ <= 1}`` become the constraint rows of ``{φ* <= 1}``); p-norms map to
    the conjugate exponent with ``A^{-T}``.
    """
    if isinstance(norm, Inverted):
        return Inverted(dual_norm(norm.base))
    if isinstance(norm, PNorm):
        return PNorm(norm.conjugate, norm.dim, np.linalg.inv(norm.A).T)
    if norm.polytope is not None:
        return PolytopeH(norm.polytope.vertices)
    return SupportNorm(norm.dual, norm.dim)


def dual_by_search(norm: FinslerNorm, p):
    """``sup_q <p, q> / φ(q)``: dense direction sweep plus compass refinement."""
    p = np.asarray(p, dtype=float)
    shape = p.shape[:-1]
    flat = np.atleast_2d(p).reshape(-1, norm.dim)

    def objective(U, rows):
        return np.einsum("bkd,bd->bk", U, flat[rows]) / norm.value(U)

    val, _ = geo.maximize_over_sphere(objective, flat.shape[0], norm.dim)
    val = np.maximum(val, 0.0)
    return val.reshape(shape) if shape else val[0]


# ---------------------------------------------------------------------------
# module-level operations


def eval_norm(norm: FinslerNorm, x):
    """``φ(x)``; raises ``ValueError`` on a dimension mismatch."""
    return norm(x)


def dual_eval(norm: FinslerNorm, p):
    """``φ*(p) = max{<p, q> : φ(q) <= 1}``."""
    p = geo.as_points(p, norm.dim)
    return norm.dual(p)


def subdifferential_face(norm: FinslerNorm, p, tol: float = FACE_TOL) -> Face:
    """The exposed face ``∂φ*(p) = {q : φ(q) = 1, <p, q> = φ*(p)}``.

    Ball vertices within ``tol * φ*(p)`` of the support maximum join the
    face, so near-ties resolve to the larger face.
    """
    return norm.face(p, tol)


def _nonzero(p, dim):
    p = geo.as_points(p, dim).reshape(dim)
    if not np.any(p):
        raise ValueError("∂φ*(0) is the whole unit ball; p must be nonzero")
    return p


def gauge_bisect(membership, x, bracket, tol: float = 1e-12):
    """Minkowski gauge ``inf{α > 0 : x/α ∈ K}`` of a convex set by bisection.

    Parameters
    ----------
    membership : callable
        Maps points ``(n, d)`` to booleans; ``K`` must be closed and convex.
    x : array_like, shape ``(d,)`` or ``(n, d)``
    bracket : pair of scalars or arrays
        ``(lo, hi)`` with ``x/lo`` outside ``K`` and ``x/hi`` inside.
    tol : float
        Absolute tolerance on the returned gauge.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    zero = ~np.any(X != 0.0, axis=1)
    lo = np.broadcast_to(np.asarray(bracket[0], dtype=float), zero.shape).copy()
    hi = np.broadcast_to(np.asarray(bracket[1], dtype=float), zero.shape).copy()
    active = ~zero
    if np.any(active):
        if np.any(lo[active] <= 0) or np.any(hi[active] < lo[active]):
            raise BracketError("bracket must satisfy 0 < lo <= hi")
        ok_lo = ~membership(X[active] / lo[active, None])
        ok_hi = membership(X[active] / hi[active, None])
        if not (np.all(ok_lo) and np.all(ok_hi)):
            raise BracketError("bracket does not straddle the boundary crossing")
    while True:
        width = np.where(active, hi - lo, 0.0)
        if np.max(width, initial=0.0) <= tol:
            break
        mid = 0.5 * (lo + hi)
        sel = np.where(active & (width > tol))[0]
        inside = membership(X[sel] / mid[sel, None])
        hi[sel] = np.where(inside, mid[sel], hi[sel])
        lo[sel] = np.where(inside, lo[sel], mid[sel])
        if np.all((hi[sel] - lo[sel]) == width[sel]):
            break  # floating point resolution reached
    out = np.where(zero, 0.0, 0.5 * (lo + hi))
    return out[0] if single else out


@dataclass
class ValidationReport:
    homogeneity: float
    triangle: float
    positivity_min: float
    delta_in: float
    delta_out: float
    duality_roundtrip: float
    samples: int
    extra: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        """Largest δ with ``B_δ ⊆ {φ <= 1} ⊆ B_{1/δ}``."""
        return min(self.delta_in, 1.0 / self.delta_out)

    def ok(self, tol: float = 1e-9) -> bool:
        return (self.homogeneity <= tol and self.triangle <= tol and self.positivity_min > 0
                and self.duality_roundtrip <= 1e-6)


def radii(norm: FinslerNorm, n: int | None = None):
    """Inscribed and circumscribed Euclidean radii of ``{φ <= 1}``.

    ``δ_in = min_u 1/φ(u)`` and ``δ_out = max_u 1/φ(u)`` over unit ``u``;
    a dense sweep refined by compass search.
    """
    def big(U, rows):
        return norm.value(U)

    def small(U, rows):
        return -norm.value(U)

    phimax, _ = geo.maximize_over_sphere(big, 1, norm.dim, n_init=n)
    phimin, _ = geo.maximize_over_sphere(small, 1, norm.dim, n_init=n)
    return 1.0 / phimax[0], 1.0 / (-phimin[0])


def validate_norm(norm: FinslerNorm, samples: int = 1000, seed: int = 0) -> ValidationReport:
    """Sampled checks of the Finsler-norm axioms plus δ radii and φ** = φ."""
    rng = np.random.default_rng(seed)
    d = norm.dim
    x = rng.standard_normal((samples, d))
    y = rng.standard_normal((samples, d))
    lam = rng.uniform(0.1, 10.0, samples)
    fx = norm(x)
    hom = np.max(np.abs(norm(lam[:, None] * x) - lam * fx) / (lam * fx))
    tri = max(0.0, float(np.max(norm(x + y) - fx - norm(y))))
    pos = float(np.min(fx / np.linalg.norm(x, axis=1)))
    d_in, d_out = radii(norm)
    rt = float(np.max(np.abs(dual_eval(dual_norm(norm), x) - fx)))
    return ValidationReport(float(hom), tri, pos, d_in, d_out, rt, samples)
