"""Reference computations written independently of ``finsler_lab``.

Nothing here imports the package.  Everything is brute force: dense angle
sweeps, vertex enumeration over explicitly listed polygons, point-to-segment
distances and plain bisection.  ``freeze_oracles.py`` runs these once and
stores the numbers in ``data/oracle_values.json``; the tests compare the
library against the frozen numbers.
"""

from __future__ import annotations

import numpy as np

# polygons as counter-clockwise vertex lists of the unit ball
POLYGONS = {
    "l1": [(1, 0), (0, 1), (-1, 0), (0, -1)],
    "linf": [(1, 1), (-1, 1), (-1, -1), (1, -1)],
    "hexagon": [(np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)) for k in range(6)],
    "triangle": [(1, 0), (0, 1), (-0.5, -0.5)],
}

ANISO_A = np.array([[2.0, 0.5], [0.0, 1.0]])


def polygon(name):
    return np.array(POLYGONS[name], dtype=float)


def polygon_rows(V):
    """Outward constraint rows ``a`` with ``<a, q> <= 1`` for each edge of a CCW polygon."""
    rows = []
    for k in range(len(V)):
        a, b = V[k], V[(k + 1) % len(V)]
        n = np.array([b[1] - a[1], a[0] - b[0]])  # outward for CCW order
        rows.append(n / np.dot(n, a))
    return np.array(rows)


def gauge_polygon(V, x):
    x = np.asarray(x, dtype=float)
    return np.max(x @ polygon_rows(V).T, axis=-1)


def gauge_pnorm(p, x, A=None):
    x = np.asarray(x, dtype=float)
    if A is not None:
        x = x @ np.asarray(A, float).T
    if np.isinf(p):
        return np.max(np.abs(x), axis=-1)
    return np.sum(np.abs(x) ** p, axis=-1) ** (1.0 / p)


def norm_fn(name):
    """Oracle evaluation for the named test norms."""
    if name in POLYGONS:
        V = polygon(name)
        return lambda x: gauge_polygon(V, x)
    if name == "euclidean":
        return lambda x: gauge_pnorm(2.0, x)
    if name == "l3":
        return lambda x: gauge_pnorm(3.0, x)
    if name == "aniso":
        return lambda x: gauge_pnorm(2.0, x, ANISO_A)
    raise KeyError(name)


def circle(n):
    t = 2 * np.pi * np.arange(n) / n
    return t, np.stack([np.cos(t), np.sin(t)], axis=1)


def dual_sweep(phi, p, n=400_000, refine=True):
    """``max_u <p, u>/φ(u)`` over a dense circle sweep, then ternary refinement."""
    p = np.asarray(p, dtype=float)
    t, U = circle(n)
    vals = (U @ p) / phi(U)
    k = int(np.argmax(vals))
    best = vals[k]
    if refine:
        lo, hi = t[k] - 2 * np.pi / n, t[k] + 2 * np.pi / n
        f = lambda s: (np.array([np.cos(s), np.sin(s)]) @ p) / phi(np.array([np.cos(s), np.sin(s)]))
        for _ in range(200):
            m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
            if f(m1) < f(m2):
                lo = m1
            else:
                hi = m2
        best = max(best, f(0.5 * (lo + hi)))
    return float(best)


def radii_sweep(phi, n=1_000_000):
    _, U = circle(n)
    v = phi(U)
    return float(1.0 / np.max(v)), float(1.0 / np.min(v))


def polygon_face(V, p, tol=1e-9):
    """Vertices of the polygon maximising ``<p, v>``."""
    s = V @ np.asarray(p, float)
    return V[s >= np.max(s) - tol]


# ---------------------------------------------------------------------------
# distances and the regularised gauge


def dist_point_segment(x, a, b):
    x, a, b = (np.asarray(v, float) for v in (x, a, b))
    d = b - a
    L = np.dot(d, d)
    t = 0.0 if L == 0 else np.clip(np.dot(x - a, d) / L, 0.0, 1.0)
    return float(np.linalg.norm(x - (a + t * d)))


def dist_to_polygon(V, x):
    if gauge_polygon(V, x) <= 1.0:
        return 0.0
    return min(dist_point_segment(x, V[k], V[(k + 1) % len(V)]) for k in range(len(V)))


def regularized_gauge(V, zeta, x, iters=200):
    """Gauge of ``{y : dist(y, ball) <= ζ}`` by plain bisection on the ray scale."""
    x = np.asarray(x, float)
    lo, hi = 1e-6, 1e6
    for _ in range(iters):
        mid = np.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if dist_to_polygon(V, x / mid) <= zeta:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# quadratic forms over faces


def quad_over_segment(X, a, b, shift, mode, n=200_001):
    X = np.asarray(X, float)
    t = np.linspace(0.0, 1.0, n)[:, None]
    q = (1 - t) * np.asarray(a, float) + t * np.asarray(b, float) - np.asarray(shift, float)
    v = np.einsum("ni,ij,nj->n", q, X, q)
    return float(np.max(v) if mode == "max" else np.min(v))


def quad_over_sphere(phi, X, mode, n=400_000, corners=None):
    """Extremum of ``<X q, q>`` over ``{φ = 1}``; polygon corners are added explicitly
    because the sweep only approaches a kink to within its angular step."""
    _, U = circle(n)
    q = U / phi(U)[:, None]
    if corners is not None:
        q = np.concatenate([q, np.asarray(corners, float)])
    v = np.einsum("ni,ij,nj->n", q, np.asarray(X, float), q)
    return float(np.max(v) if mode == "max" else np.min(v))


def euclid_face_point(p):
    p = np.asarray(p, float)
    return p / np.linalg.norm(p)


def l3_face_point(p):
    """Unit-ball point exposed by ``p`` for ``||.||_3``: gradient of the dual ``||.||_{3/2}``."""
    p = np.asarray(p, float)
    r = 1.5
    nrm = np.sum(np.abs(p) ** r) ** (1 / r)
    return np.sign(p) * (np.abs(p) / nrm) ** (r - 1)


# ---------------------------------------------------------------------------
# scheme values by dense ball sampling


def ball_points(phi, eps, n_theta=20_000, n_r=400):
    """Boundary ring plus a polar interior grid of ``{φ <= ε}``."""
    _, U = circle(n_theta)
    B = eps * U / phi(U)[:, None]
    r = np.linspace(0.0, 1.0, n_r)[:, None, None]
    _, U2 = circle(720)
    inner = (r * (eps * U2 / phi(U2)[:, None])[None]).reshape(-1, 2)
    return np.concatenate([B, inner])


def scheme_value(phi, f, x0, eps):
    """``ε⁻²[f(x0) - ½ max_{B} f(x0 + z) - ½ min_{B} f(x0 - z)]``."""
    Z = ball_points(phi, eps)
    x0 = np.asarray(x0, float)
    up = np.max(f(x0 + Z))
    down = np.min(f(x0 - Z))
    return float((f(x0) - 0.5 * (up + down)) / eps ** 2)


def barrier_radial(alpha, r, eps):
    """1D radial value ``ε⁻²[r^α - ½(r+ε)^α - ½(r-ε)^α]`` for ``φ^α``."""
    return (r ** alpha - 0.5 * (r + eps) ** alpha - 0.5 * (r - eps) ** alpha) / eps ** 2


# ---------------------------------------------------------------------------
# conical test function gauge


def cone_margin(e, a, b, nu, y):
    """``ν - dist(y + ν e, [a, b])``."""
    return nu - dist_point_segment(np.asarray(y, float) + nu * np.asarray(e, float), a, b)


def cone_gauge(e, a, b, nu, x, n=20_000):
    """``1 / sup{t : t x ∈ F_(e,ν)}`` from a dense ``t`` grid and bisection."""
    x = np.asarray(x, float)
    R = max(np.linalg.norm(a), np.linalg.norm(b)) + 2 * nu
    t_hi = 1.01 * R / np.linalg.norm(x)
    ts = np.linspace(0.0, t_hi, n)
    m = np.array([cone_margin(e, a, b, nu, t * x) for t in ts])
    inside = np.flatnonzero(m >= 0)
    if len(inside) == 0 or np.max(m) <= 1e-12:
        return np.inf
    k = inside[-1]
    if k == n - 1:
        return 1.0 / t_hi
    lo, hi = ts[k], ts[k + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cone_margin(e, a, b, nu, mid * x) >= 0:
            lo = mid
        else:
            hi = mid
    return 1.0 / lo


# ---------------------------------------------------------------------------
# lattice counts and boundary distance


def stencil_count(phi, ratio):
    R = int(np.ceil(2 * ratio)) + 2
    a, b = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1))
    Z = np.stack([a.ravel(), b.ravel()], axis=1).astype(float)
    return int(np.sum(phi(Z) <= ratio * (1 + 1e-12)))


def max_boundary_distance(phi, h):
    """``max_x min_{y ∈ ∂square} φ(x - y)`` over grid nodes of the unit square."""
    n = int(round(1 / h))
    s = np.arange(n + 1) * h
    X, Y = np.meshgrid(s, s)
    P = np.stack([X.ravel(), Y.ravel()], axis=1)
    edge = np.concatenate([np.stack([s, np.zeros_like(s)], 1), np.stack([s, np.ones_like(s)], 1),
                           np.stack([np.zeros_like(s), s], 1), np.stack([np.ones_like(s), s], 1)])
    best = 0.0
    for k in range(0, len(P), 256):
        d = phi(P[k:k + 256, None, :] - edge[None, :, :]).min(axis=1)
        best = max(best, float(d.max()))
    return best
