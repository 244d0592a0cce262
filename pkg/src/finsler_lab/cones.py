"""Conical test functions, their graph representation and mollified perturbations.

Given a unit direction ``e``, a face ``F`` lying in the hyperplane
``<x, e> = c`` and a radius ``ν``, the set

    F_(e,ν) = {y : dist(y + ν e, F) <= ν}

is the union of the radius-``ν`` balls tangent from inside along ``F``.  Its
gauge ``ψ_ν`` touches a norm from above on the cone over ``F`` whenever the
unit ball satisfies an interior ball condition of radius at least ``ν``.

The origin typically lies on the boundary of ``F_(e,ν)``, so the gauge along
a ray is governed by the *far* exit point: ``ψ(x) = 1/sup{t : t x ∈ K}``.
Rays meeting the set only tangentially (zero-width chords) are reported as
infinite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _geometry as geo
from .norms import Face, FinslerNorm

__all__ = [
    "ConicalTestFn",
    "MollifiedGraph",
    "conical_test_fn",
    "psi_gauge",
    "graph_g",
    "mollified_graph",
    "perturbed_psi_gauge",
    "admissible_radius",
    "touching_check",
    "TouchingReport",
    "bump_rule",
]

GRAZE_TOL = 1e-12
RAY_GRID = 64


@dataclass(frozen=True, eq=False)
class ConicalTestFn:
    """``ψ_{e,F,ν}``: gauge of the set of radius-``ν`` balls tangent along ``F``."""

    e: np.ndarray
    F: Face
    nu: float
    c: float | None = None

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        e = e / np.linalg.norm(e)
        object.__setattr__(self, "e", e)
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        heights = self.F.vertices @ e
        c = float(np.mean(heights)) if self.c is None else float(self.c)
        if np.max(np.abs(heights - c)) > 1e-9:
            raise ValueError("face does not lie in the hyperplane <x, e> = c")
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.e.size

    @cached_property
    def Gp(self) -> Face:
        """The face projected into ``{e}^perp``: ``F - c e``."""
        return self.F.translated(-self.c * self.e)

    @cached_property
    def basis(self) -> np.ndarray:
        return geo.orthonormal_complement(self.e)

    def project(self, x):
        """Component of ``x`` orthogonal to ``e``."""
        x = np.asarray(x, dtype=float)
        return x - (x @ self.e)[..., None] * self.e

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        return self.F.distance(y + self.nu * self.e) <= self.nu

    def margin(self, y):
        """``ν - dist(y + ν e, F)``: concave, nonnegative exactly on the set."""
        y = np.asarray(y, dtype=float)
        return self.nu - self.F.distance(y + self.nu * self.e)


def conical_test_fn(norm: FinslerNorm, p, nu: float) -> ConicalTestFn:
    """Test function built on the face ``∂φ*(p)`` with ``c = φ*(p/|p|)``."""
    p = np.asarray(p, dtype=float)
    e = p / np.linalg.norm(p)
    return ConicalTestFn(e, norm.face(p), nu, float(norm.dual(e)))


# ---------------------------------------------------------------------------
# gauges along rays


def _far_exit(margin, X, t_hi, grid: int = RAY_GRID, graze_tol: float = GRAZE_TOL):
    """``sup{t in [0, t_hi] : margin(t X) >= 0}`` per row, ``nan`` if the ray misses.

    ``margin`` must have superlevel set ``{>= 0}`` an interval along each ray
    and be concave near its maximum.  A coarse grid finds the best parameter,
    golden section refines it, and bisection locates the far crossing.
    """
    n = X.shape[0]
    t_hi = np.broadcast_to(np.asarray(t_hi, dtype=float), (n,)).copy()
    ts = np.linspace(0.0, 1.0, grid + 1)[None, :] * t_hi[:, None]
    vals = margin(ts[..., None] * X[:, None, :])
    k = np.argmax(vals, axis=1)
    step = t_hi / grid
    lo = np.clip(ts[np.arange(n), k] - step, 0.0, None)
    hi = np.minimum(ts[np.arange(n), k] + step, t_hi)
    t_best, m_best = geo.golden_max(lambda t: margin(t[:, None] * X), lo, hi, iters=60)
    grid_best = vals[np.arange(n), k]
    use_grid = grid_best > m_best
    t_best = np.where(use_grid, ts[np.arange(n), k], t_best)
    m_best = np.maximum(m_best, grid_best)
    hit = m_best > graze_tol

    a = t_best.copy()
    b = t_hi.copy()
    inside_hi = margin(b[:, None] * X) >= 0
    a = np.where(inside_hi, b, a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        live = hit & ~inside_hi & (mid != a) & (mid != b)
        if not np.any(live):
            break
        ins = margin(mid[:, None] * X) >= 0
        a = np.where(live & ins, mid, a)
        b = np.where(live & ~ins, mid, b)
    return np.where(hit, a, np.nan)


def psi_gauge(cone: ConicalTestFn, x, tol: float = GRAZE_TOL):
    """Gauge of ``F_(e,ν)`` at ``x``; ``inf`` where the ray misses the set.

    Parameters
    ----------
    cone : ConicalTestFn
    x : array_like, shape ``(d,)`` or ``(n, d)``
    tol : float
        Chords along which the membership margin never exceeds ``tol`` count
        as misses (grazing rays).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    out = np.zeros(X.shape[0])
    nz = np.any(X != 0.0, axis=1)
    if np.any(nz):
        Xn = X[nz]
        # the set lies inside the ball of radius max|F| around the origin
        R = float(np.max(np.linalg.norm(cone.F.vertices, axis=1))) + 2.0 * cone.nu
        t_hi = 1.01 * R / np.linalg.norm(Xn, axis=1)
        t = _far_exit(cone.margin, Xn, t_hi, graze_tol=tol)
        out[nz] = np.where(np.isnan(t), np.inf, 1.0 / np.where(np.isnan(t), 1.0, t))
    return out[0] if single else out


def graph_g(cone: ConicalTestFn, xp):
    """Upper boundary of ``F_(e,ν)`` as a graph over ``{e}^perp``.

    ``g_ν(x') = c - ν + sqrt(ν² - dist(x', G_p)²)`` with ``x'`` given as a
    point of ``R^d`` (its ``e`` component is discarded).

    Raises
    ------
    ValueError
        If ``dist(x', G_p) > ν``.
    """
    xp = cone.project(np.asarray(xp, dtype=float))
    d = cone.Gp.distance(xp)
    if np.any(d > cone.nu * (1.0 + 1e-12)):
        raise ValueError("graph_g: point farther than nu from the projected face")
    return cone.c - cone.nu + np.sqrt(np.maximum(cone.nu ** 2 - d ** 2, 0.0))


# ---------------------------------------------------------------------------
# mollification


def bump_rule(dim: int, order: int = 32):
    """Quadrature nodes and weights for ``ρ(y) dy`` on the unit ball of ``R^dim``.

    ``ρ(y) = Z exp(-1/(1 - |y|²))`` with ``Z`` chosen so that the weights sum
    to one exactly (up to rounding).  Tensor Gauss–Legendre: on ``[-1, 1]`` in
    one dimension, in polar coordinates ``(r, θ)`` in two.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    if dim == 1:
        nodes = x[:, None]
        weights = w * np.exp(-1.0 / (1.0 - x ** 2))
    elif dim == 2:
        r = 0.5 * (x + 1.0)
        wr = 0.5 * w * r * np.exp(-1.0 / (1.0 - r ** 2))
        th = np.pi * (x + 1.0)
        wt = np.pi * w
        R, T = np.meshgrid(r, th, indexing="ij")
        nodes = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1).reshape(-1, 2)
        weights = np.outer(wr, wt).ravel()
    else:
        raise ValueError("mollifier quadrature is implemented for dim 1 and 2")
    return nodes, weights / np.sum(weights)


@dataclass(frozen=True, eq=False)
class MollifiedGraph:
    """``g^ε_ν = g_ν * ρ_ε`` over ``{e}^perp`` with a fixed quadrature rule."""

    cone: ConicalTestFn
    eps: float
    order: int = 32
    _rule: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 < self.eps < self.cone.nu):
            raise ValueError("mollification scale must lie in (0, nu)")
        nodes, weights = bump_rule(self.cone.dim - 1, self.order)
        offsets = nodes @ self.cone.basis  # (m, d) vectors in {e}^perp
        object.__setattr__(self, "_rule", (offsets, weights))

    @property
    def weights(self):
        return self._rule[1]

    def evaluate(self, xp, check: bool = True):
        cone = self.cone
        xp = cone.project(np.asarray(xp, dtype=float))
        if check and np.any(cone.Gp.distance(xp) > (cone.nu - self.eps) * (1.0 + 1e-12)):
            raise ValueError("mollified_graph: point outside dist(x', G_p) <= nu - eps")
        offsets, w = self._rule
        pts = xp[..., None, :] + self.eps * offsets
        d = cone.Gp.distance(pts)
        g = cone.c - cone.nu + np.sqrt(np.maximum(cone.nu ** 2 - d ** 2, 0.0))
        return g @ w


def mollified_graph(mg: MollifiedGraph, xp):
    """Quadrature of ``g_ν(x' + ε y') ρ(y')`` over the unit ball of ``{e}^perp``."""
    return mg.evaluate(xp)


def _hypograph_margin(mg: MollifiedGraph):
    cone = mg.cone

    def margin(Y):
        Y = np.asarray(Y, dtype=float)
        s = Y @ cone.e
        yp = Y - s[..., None] * cone.e
        dom = (cone.nu - mg.eps) - cone.Gp.distance(yp)
        # clamp into the domain before evaluating the mollified graph; outside
        # the domain the margin is already negative through ``dom``
        g = mg.evaluate(_clamp_to_domain(cone, yp, cone.nu - mg.eps), check=False)
        return np.minimum(np.minimum(dom, g - s), s)

    return margin


def _clamp_to_domain(cone, yp, radius):
    q = cone.Gp.closest(yp)
    diff = yp - q
    d = np.linalg.norm(diff, axis=-1)
    scale = np.where(d > radius, radius / np.where(d > 0, d, 1.0), 1.0)
    return q + diff * scale[..., None]


def in_cone(cone: ConicalTestFn, x, r: float):
    """``<x, e> > 0`` and ``dist(c x'/<x, e>, G_p) < r``."""
    x = np.asarray(x, dtype=float)
    s = x @ cone.e
    ok = s > 0
    xp = cone.project(x)
    scaled = cone.c * xp / np.where(ok, s, 1.0)[..., None]
    return ok & (cone.Gp.distance(scaled) < r)


def perturbed_psi_gauge(mg: MollifiedGraph, r: float, x, tol: float = GRAZE_TOL):
    """Gauge of the mollified hypograph restricted to the cone of radius ``r``.

    ``H = {x' + s e : dist(x', G_p) <= ν - ε, 0 <= s <= g^ε_ν(x')}``.  Points
    outside the cone ``{<x,e> > 0, dist(c x'/<x,e>, G_p) < r}`` get ``inf``.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    cone = mg.cone
    out = np.full(X.shape[0], np.inf)
    inside = in_cone(cone, X, r)
    if np.any(inside):
        Xi = X[inside]
        s = Xi @ cone.e
        # g^ε <= c, so the ray leaves H no later than height c
        t_hi = cone.c / s
        t = _far_exit(_hypograph_margin(mg), Xi, t_hi, graze_tol=tol)
        out[inside] = np.where(np.isnan(t), np.inf, 1.0 / np.where(np.isnan(t), 1.0, t))
    return out[0] if single else out


def admissible_radius(cone: ConicalTestFn, probes: int = 64, tol: float = 1e-9,
                      seed: int = 0, max_halvings: int = 30) -> float:
    """Largest ``r = ν/4 · 2^-k`` for which graph points have ``ψ_ν = 1``.

    Probe points ``x' + g_ν(x') e`` with ``dist(x', G_p) < r`` must be far
    exits of their rays, so the graph and the gauge describe the same surface.
    """
    rng = np.random.default_rng(seed)
    r = cone.nu / 4.0
    for _ in range(max_halvings):
        xp = _sample_near_face(cone, rng, probes, r)
        x = xp + graph_g(cone, xp)[:, None] * cone.e
        if np.max(np.abs(psi_gauge(cone, x) - 1.0)) <= tol:
            return r
        r *= 0.5
    raise RuntimeError("no admissible radius found")


def _sample_near_face(cone: ConicalTestFn, rng, n: int, r: float):
    """Points of ``{e}^perp`` within distance ``< r`` of ``G_p``."""
    v = cone.Gp.vertices
    lam = rng.dirichlet(np.ones(len(v)), size=n)
    base = lam @ v
    u = rng.standard_normal((n, cone.dim - 1)) @ cone.basis
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = r * rng.uniform(0.0, 1.0, n) * 0.999
    return base + rad[:, None] * u


# ---------------------------------------------------------------------------
# touching


@dataclass
class TouchingReport:
    min_gap: float             # min(ψ_ν - φ) over the sample cloud
    ray_error: float           # max |ψ_ν - φ| on the cone over the face
    strict_margin: float       # min(ψ_ν - φ)/|x| away from the cone (nan if ν >= ζ)
    samples: int
    ray_samples: int


def touching_check(norm: FinslerNorm, p, nu: float, samples: int = 10_000, seed: int = 0,
                   ray_samples: int = 100, zeta: float | None = None,
                   off_cone: float = 0.05) -> TouchingReport:
    """Check that ``ψ_ν`` built on ``∂φ*(p)`` touches ``φ`` from above along the cone.

    Parameters
    ----------
    norm : FinslerNorm
        Must satisfy an interior ball condition of radius at least ``nu``.
    p : array_like
        Nonzero direction selecting the face.
    nu : float
    zeta : float, optional
        Interior-ball radius of ``norm``; when ``nu < zeta`` the report also
        gives a strictness margin for samples whose direction is at least
        ``off_cone`` (Euclidean, on the unit sphere) away from the cone.
    """
    rng = np.random.default_rng(seed)
    cone = conical_test_fn(norm, p, nu)
    x = rng.standard_normal((samples, norm.dim))
    x *= rng.uniform(0.2, 2.0, samples)[:, None] / np.linalg.norm(x, axis=1, keepdims=True)
    psi = psi_gauge(cone, x)
    phi = norm(x)
    gap = psi - phi
    min_gap = float(np.min(gap))

    lam = rng.dirichlet(np.ones(len(cone.F.vertices)), size=ray_samples)
    q = lam @ cone.F.vertices
    t = rng.uniform(0.5, 2.0, ray_samples)
    xr = t[:, None] * q
    ray_err = float(np.max(np.abs(psi_gauge(cone, xr) - norm(xr))))

    strict = float("nan")
    if zeta is not None and nu < zeta:
        u = x / np.linalg.norm(x, axis=1, keepdims=True)
        far = _angular_distance_to_cone(u, cone.F) > off_cone
        if np.any(far):
            strict = float(np.min(gap[far] / np.linalg.norm(x[far], axis=1)))
    return TouchingReport(min_gap, ray_err, strict, samples, ray_samples)


def _angular_distance_to_cone(u, F: Face):
    """Distance from unit vectors to the set of normalised face points (sampled)."""
    lam = np.linspace(0.0, 1.0, 65)
    v = F.vertices
    if F.affine_dim == 0:
        pts = v[:1]
    else:
        pts = np.concatenate([(1 - lam)[:, None] * v[i] + lam[:, None] * v[(i + 1) % len(v)]
                              for i in range(len(v))])
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    d = np.linalg.norm(u[:, None, :] - pts[None, :, :], axis=-1)
    return np.min(d, axis=1)
