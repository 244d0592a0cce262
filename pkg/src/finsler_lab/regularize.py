"""C^{1,1} regularisation of a Finsler norm by Minkowski sum with a ball.

``E_ζ`` is the set of points within Euclidean distance ``ζ`` of the unit ball
``{φ <= 1}``; ``φ_ζ`` is its gauge.  Support functions add under Minkowski
sums, so ``φ_ζ*(p) = φ*(p) + ζ||p||`` and every exposed face of ``E_ζ`` is
the corresponding face of the base ball pushed out by ``ζ p/||p||``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geometry as geo
from .norms import FACE_TOL, Face, FinslerNorm, dual_by_search, gauge_bisect, make_face, radii

GRAD_STEP = 1e-5
HESS_STEP = 1e-3


@dataclass(frozen=True, eq=False)
class Regularized(FinslerNorm):
    """Gauge of ``{x : dist(x, {base <= 1}) <= zeta}`` for ``0 < zeta < 1``."""

    base: FinslerNorm
    zeta: float
    tol: float = 1e-14

    def __post_init__(self):
        z = float(self.zeta)
        if not (0.0 < z < 1.0):
            raise ValueError("zeta must lie in (0, 1)")
        object.__setattr__(self, "zeta", z)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def is_smooth(self) -> bool:
        return self.base.is_smooth

    @property
    def exact_projection(self) -> bool:
        """False when distances to the base ball come from a direction search."""
        b = self.base
        return b.polytope is not None or (getattr(b, "p", None) == 2.0
                                           and np.allclose(getattr(b, "A", 0), np.eye(b.dim)))

    def contains(self, x):
        return self.base.ball_distance(x) <= self.zeta

    def value(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, self.dim)
        out = np.zeros(flat.shape[0])
        nz = np.any(flat != 0.0, axis=1)
        if np.any(nz):
            X = flat[nz]
            # φ_ζ <= φ, and the ball of radius 1+... bounds give a safe bracket
            hi = self.base.value(X) * (1.0 + 1e-12) + 1e-300
            lo = hi * 1e-3
            # widen lo until outside
            for _ in range(60):
                outside = ~self.contains(X / lo[:, None])
                if np.all(outside):
                    break
                lo = np.where(outside, lo, lo * 1e-2)
            g = gauge_bisect(self.contains, X, (lo, hi), tol=0.0)
            out[nz] = g
        return out.reshape(shape) if shape else out[0]

    def dual(self, p):
        p = np.asarray(p, dtype=float)
        return self.base.dual(p) + self.zeta * np.linalg.norm(p, axis=-1)

    def ball_distance(self, x):
        # the ball of φ_ζ is itself a Minkowski sum; fall back to the support rule
        from .norms import support_distance
        return support_distance(self, x)

    def face(self, p, tol: float = FACE_TOL) -> Face:
        p = np.asarray(p, dtype=float).reshape(self.dim)
        f = self.base.face(p, tol)
        return f.translated(self.zeta * p / np.linalg.norm(p))


def regularize(base: FinslerNorm, zeta: float) -> Regularized:
    """``φ_ζ`` for ``0 < zeta < 1``; raises ``ValueError`` otherwise."""
    return Regularized(base, zeta)


def dual_rule_value(reg: Regularized, x):
    """``φ_ζ(x) = sup_u <u, x> / (φ*(u) + ζ||u||)``, an independent route to the gauge."""
    from .norms import SupportNorm
    return dual_by_search(SupportNorm(reg.dual, reg.dim), x)


def face_by_membership(reg: Regularized, p, n_dirs: int = 2048):
    """Extract ``∂φ_ζ*(p)`` in 2D from the membership oracle alone.

    The support value is found by maximising ``<p, b(θ)>`` over boundary
    points ``b(θ)`` of ``E_ζ`` (gauge by bisection); the face is then the
    intersection of the supporting line with ``E_ζ``, whose two endpoints are
    located by bisection along the line.  Neither the face-shift identity nor
    the additive dual rule is used.

    ``p`` may be a single direction (returns a :class:`Face`) or an array of
    shape ``(n, 2)`` (returns a list of faces).
    """
    if reg.dim != 2:
        raise ValueError("membership face extraction is implemented in 2D only")
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    E = P / np.linalg.norm(P, axis=1, keepdims=True)
    T = np.column_stack([-E[:, 1], E[:, 0]])
    n = len(P)

    theta = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    B = reg.boundary_points(np.column_stack([np.cos(theta), np.sin(theta)]))
    k = np.argmax(E @ B.T, axis=1)
    step = 2.0 * np.pi / n_dirs

    def support_at(th):
        b = reg.boundary_points(np.column_stack([np.cos(th), np.sin(th)]))
        return np.sum(b * E, axis=1)

    th, h = geo.golden_max(support_at, theta[k] - step, theta[k] + step, iters=40)
    anchor = reg.boundary_points(np.column_stack([np.cos(th), np.sin(th)]))
    s0 = np.sum(anchor * T, axis=1)
    base_pt = h[:, None] * E
    # boundary points sit at distance exactly ζ; a relative slack of 1e-13
    # keeps round-off from splitting the flat face, and costs at most
    # sqrt(2e-13)·ζ of extra length past each tangential endpoint
    limit = reg.zeta * (1.0 + 1e-13)

    def inside(s):
        return reg.base.ball_distance(base_pt + s[:, None] * T) <= limit

    R = 4.0 * float(np.max(np.linalg.norm(B, axis=1)))
    start_ok = inside(s0)
    ends = []
    for sign in (+1.0, -1.0):
        lo = s0.copy()
        hi = s0 + sign * R
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            live = start_ok & (mid != lo) & (mid != hi)
            if not np.any(live):
                break
            ins = inside(mid)
            lo = np.where(live & ins, mid, lo)
            hi = np.where(live & ~ins, mid, hi)
        ends.append(base_pt + lo[:, None] * T)
    faces = [make_face(np.array([ends[0][i], ends[1][i]]), P[i], tol=1e-10) for i in range(n)]
    return faces[0] if single else faces


@dataclass
class RegularizationReport:
    zeta: float
    shift_error: float          # (ii) max Hausdorff error of the face-shift identity
    monotone_excess: float      # (iii) max of φ_ζ - φ (should be <= 0)
    kappa: float                # (iv) min φ*(Dφ_ζ) over boundary samples
    delta_in: float             # (v)
    delta_out: float
    interior_ball_defect: float  # (i) most negative ball-probe margin
    exact_projection: bool
    extra: dict = field(default_factory=dict)


def regularization_report(reg: Regularized, samples: int = 64, seed: int = 0) -> RegularizationReport:
    rng = np.random.default_rng(seed)
    d = reg.dim
    dirs = rng.standard_normal((samples, d))

    shift_err = 0.0
    if d == 2:
        for p, f_oracle in zip(dirs, face_by_membership(reg, dirs)):
            f_shift = reg.base.face(p).translated(reg.zeta * p / np.linalg.norm(p))
            shift_err = max(shift_err, f_oracle.hausdorff(f_shift))
    else:
        for p in dirs:
            shift_err = max(shift_err, _face_by_support_clustering(reg, p).hausdorff(reg.face(p)))

    x = rng.standard_normal((max(samples, 256), d))
    excess = float(np.max(reg(x) - reg.base(x)))

    u = geo.unit_directions(d, 256 if d == 2 else 400)
    q = reg.boundary_points(u)
    grads = numerical_gradient(reg, q)
    kappa = float(np.min(reg.base.dual(grads)))

    d_in, d_out = radii(reg, 2048 if d == 2 else 8000)
    defect = interior_ball_probe(reg, rng, n_points=min(samples, 32))
    return RegularizationReport(reg.zeta, shift_err, excess, kappa, d_in, d_out, defect,
                                reg.exact_projection)


def _face_by_support_clustering(reg: Regularized, p, n: int = 20000) -> Face:
    # 3D fallback oracle: boundary samples whose support value ties the max
    u = geo.unit_directions(reg.dim, n)
    b = reg.boundary_points(u)
    e = np.asarray(p, float) / np.linalg.norm(p)
    s = b @ e
    h = reg.dual(e)
    close = b[s >= h - 1e-6]
    return make_face(close, e, tol=1e-3)


def numerical_gradient(norm: FinslerNorm, x, step: float = GRAD_STEP):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = np.empty_like(x)
    for i in range(x.shape[1]):
        dx = np.zeros(x.shape[1])
        dx[i] = step
        g[:, i] = (norm(x + dx) - norm(x - dx)) / (2.0 * step)
    return g


def interior_ball_probe(reg: Regularized, rng, n_points: int = 32, patch: int = 64) -> float:
    """Most negative ``||q' - (q - ζn)|| - ζ`` over boundary patches.

    For each sampled boundary point ``q`` with outward normal ``n`` the ball
    of radius ζ centred at ``q - ζn`` must lie inside ``E_ζ``: every boundary
    point ``q'`` is at distance at least ζ from the centre.
    """
    d = reg.dim
    u = rng.standard_normal((n_points, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    q = reg.boundary_points(u)
    n = numerical_gradient(reg, q)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    worst = np.inf
    for qi, ni, ui in zip(q, n, u):
        centre = qi - reg.zeta * ni
        w = ui + 0.3 * rng.standard_normal((patch, d))
        qq = reg.boundary_points(w)
        worst = min(worst, float(np.min(np.linalg.norm(qq - centre, axis=1) - reg.zeta)))
    return worst


@dataclass
class HessianReport:
    worst_ratio: float
    max_curvature: float     # max of φ_ζ D²_vv φ_ζ
    bound: float             # Γ(δ) / ζ
    gamma: float
    delta: float


def gamma_constant(delta: float) -> float:
    return 4.0 * (1.0 + delta ** -2) ** 3


def hessian_bound_check(reg: Regularized, samples: int = 256, seed: int = 0,
                        points=None, step: float = HESS_STEP) -> HessianReport:
    """Second central differences of ``φ_ζ`` against ``Γ(δ)/ζ``."""
    rng = np.random.default_rng(seed)
    d = reg.dim
    if points is None:
        points = rng.standard_normal((samples, d))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    v = rng.standard_normal(points.shape)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    f0 = reg(points)
    second = (reg(points + step * v) - 2.0 * f0 + reg(points - step * v)) / step ** 2
    curv = float(np.max(f0 * second))
    d_in, d_out = radii(reg, 2048 if d == 2 else 8000)
    delta = min(d_in, 1.0 / d_out)
    gam = gamma_constant(delta)
    bound = gam / reg.zeta
    return HessianReport(curv / bound, curv, bound, gam, delta)
