"""Finite-difference tug-of-war scheme on a rectangular grid (2D).

The scheme on the interior node set ``U_ε`` is

    μ u + ε⁻² c (u - M u) = f,        u = G on the collar,

with ``M u(x) = ½ max_{z ∈ Z⁺} u(x + z) + ½ min_{z ∈ Z⁺} u(x - z)`` and
``Z⁺ = {lattice z : φ(z) <= ε}``.  Equivalently ``u = T(u)`` with

    T(u) = (f + ε⁻² c M u) / (μ + ε⁻² c),

a strict contraction when ``μ > 0``.  For ``μ = 0`` the damped iteration
``u <- (1 - ω) u + ω T(u)`` is used.

Arrays are indexed ``[j, i]`` with ``x = xmin + i h`` and ``y = ymin + j h``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .functions import Cone, Field
from .norms import FinslerNorm

__all__ = [
    "Grid",
    "Stencil",
    "SolveReport",
    "ConfigurationError",
    "IterationLimitError",
    "build",
    "build_stencil",
    "interior_slice",
    "interior_mask",
    "apply_M",
    "apply_M_field",
    "update_map",
    "scheme_residual",
    "solve_dirichlet",
    "convergence_study",
    "write_field_csv",
    "write_trace_csv",
]

STENCIL_SLACK = 1e-12


class ConfigurationError(ValueError):
    """Invalid grid, stencil or solver configuration."""


class IterationLimitError(RuntimeError):
    """The fixed-point iteration did not reach the tolerance."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class Grid:
    """Uniform grid over ``[xmin, xmax] x [ymin, ymax]`` with spacing ``h``."""

    xmin: float
    xmax: float
    ymin: float
    ymax: float
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError("h must be positive")
        for lo, hi in ((self.xmin, self.xmax), (self.ymin, self.ymax)):
            if not hi > lo:
                raise ConfigurationError("box must have positive extent")
            n = (hi - lo) / self.h
            if abs(n - round(n)) > 1e-9 * max(1.0, n):
                raise ConfigurationError("box side is not a multiple of h")

    @property
    def nx(self) -> int:
        return int(round((self.xmax - self.xmin) / self.h)) + 1

    @property
    def ny(self) -> int:
        return int(round((self.ymax - self.ymin) / self.h)) + 1

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def x(self):
        return self.xmin + self.h * np.arange(self.nx)

    @property
    def y(self):
        return self.ymin + self.h * np.arange(self.ny)

    def points(self):
        X, Y = np.meshgrid(self.x, self.y)
        return np.stack([X, Y], axis=-1)

    def node_of(self, point):
        """Nearest node indices ``(j, i)`` to a physical point."""
        i = int(round((point[0] - self.xmin) / self.h))
        j = int(round((point[1] - self.ymin) / self.h))
        return j, i

    def evaluate(self, fun):
        """Evaluate a field, array or scalar on all nodes."""
        if isinstance(fun, Field) or callable(fun):
            return np.asarray(fun(self.points()), dtype=float)
        arr = np.asarray(fun, dtype=float)
        if arr.ndim == 0:
            return np.full(self.shape, float(arr))
        if arr.shape != self.shape:
            raise ConfigurationError(f"field shape {arr.shape} does not match grid {self.shape}")
        return arr


@dataclass(frozen=True, eq=False)
class Stencil:
    """Lattice offsets ``Z⁺ = {z : φ(z) <= ε}`` in index units ``(a, b)``.

    ``rows`` maps each vertical offset ``b`` to the contiguous horizontal
    range ``(lo, hi)`` of ``a`` (contiguous because the ball is convex).
    ``Z⁻ = -Z⁺`` is implicit.
    """

    offsets: np.ndarray
    eps: float
    h: float
    rows: dict = field(repr=False)

    @property
    def wx(self) -> int:
        return int(np.max(np.abs(self.offsets[:, 0])))

    @property
    def wy(self) -> int:
        return int(np.max(np.abs(self.offsets[:, 1])))

    @property
    def backward(self) -> np.ndarray:
        return -self.offsets

    def __len__(self):
        return len(self.offsets)


def build_stencil(norm: FinslerNorm, h: float, eps: float) -> Stencil:
    if norm.dim != 2:
        raise ConfigurationError("the grid solver is two-dimensional")
    if not (eps > 0 and h > 0):
        raise ConfigurationError("eps and h must be positive")
    from .norms import radii
    _, d_out = radii(norm, 720)
    R = int(math.ceil(eps * d_out * 1.01 / h)) + 1
    a, b = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1))
    Z = np.stack([a.ravel(), b.ravel()], axis=1)
    phi = norm(Z * h)
    keep = phi <= eps * (1.0 + STENCIL_SLACK)
    Z = Z[keep]
    if len(Z) <= 1:
        raise ConfigurationError("stencil is empty: eps too small relative to h")
    rows = {}
    for bb in np.unique(Z[:, 1]):
        aa = np.sort(Z[Z[:, 1] == bb, 0])
        if not np.array_equal(aa, np.arange(aa[0], aa[-1] + 1)):
            raise ConfigurationError("stencil row is not contiguous; is the norm convex?")
        rows[int(bb)] = (int(aa[0]), int(aa[-1]))
    order = np.lexsort((Z[:, 0], Z[:, 1]))
    return Stencil(Z[order], float(eps), float(h), rows)


def build(norm: FinslerNorm, box, h: float, eps: float):
    """Grid over ``box = (xmin, xmax, ymin, ymax)`` and the stencil of ``φ`` at scale ``ε``.

    Raises
    ------
    ConfigurationError
        Empty stencil, box incompatible with ``h``, or no interior node.
    """
    grid = Grid(*map(float, box), float(h))
    st = build_stencil(norm, h, eps)
    if grid.nx <= 2 * st.wx or grid.ny <= 2 * st.wy:
        raise ConfigurationError("no interior nodes: the stencil is wider than the box")
    return grid, st


def interior_slice(grid: Grid, st: Stencil):
    return (slice(st.wy, grid.ny - st.wy), slice(st.wx, grid.nx - st.wx))


def interior_mask(grid: Grid, st: Stencil):
    m = np.zeros(grid.shape, dtype=bool)
    m[interior_slice(grid, st)] = True
    return m


# ---------------------------------------------------------------------------
# the operator M


def apply_M(st: Stencil, u, node) -> float:
    """``M u`` at one interior node ``(j, i)`` by direct enumeration."""
    u = np.asarray(u, dtype=float)
    j, i = node
    ny, nx = u.shape
    if not (st.wy <= j < ny - st.wy and st.wx <= i < nx - st.wx):
        raise IndexError("node is not interior: an offset would leave the grid")
    a, b = st.offsets[:, 0], st.offsets[:, 1]
    return 0.5 * float(np.max(u[j + b, i + a])) + 0.5 * float(np.min(u[j - b, i - a]))


def apply_M_field(st: Stencil, u):
    """``M u`` on every interior node, via sliding max/min filters along rows."""
    u = np.asarray(u, dtype=float)
    ny, nx = u.shape
    wx, wy = st.wx, st.wy
    out_shape = (ny - 2 * wy, nx - 2 * wx)
    mx = np.full(out_shape, -np.inf)
    mn = np.full(out_shape, np.inf)
    fmax, fmin = {}, {}
    for b, (lo, hi) in st.rows.items():
        W = hi - lo + 1
        if W not in fmax:
            fmax[W] = maximum_filter1d(u, W, axis=1, mode="nearest")
            fmin[W] = minimum_filter1d(u, W, axis=1, mode="nearest")
        k = lo + W // 2
        np.maximum(mx, fmax[W][wy + b: ny - wy + b, wx + k: nx - wx + k], out=mx)
        k = -hi + W // 2
        np.minimum(mn, fmin[W][wy - b: ny - wy - b, wx + k: nx - wx + k], out=mn)
    return 0.5 * (mx + mn)


def update_map(st: Stencil, u, mu: float, c, f):
    """``T(u) = (f + ε⁻² c M u)/(μ + ε⁻² c)`` on interior nodes (``f/μ`` where ``c = 0``)."""
    s = st.eps ** -2
    Mu = apply_M_field(st, u)
    return (f + s * c * Mu) / (mu + s * c)


def scheme_residual(grid: Grid, st: Stencil, u, mu: float, c, f) -> float:
    """``max |T(u) - u|`` over interior nodes."""
    sl = interior_slice(grid, st)
    c = grid.evaluate(c)[sl]
    f = grid.evaluate(f)[sl]
    return float(np.max(np.abs(update_map(st, u, mu, c, f) - np.asarray(u)[sl])))


# ---------------------------------------------------------------------------
# Gauss-Seidel kernel


def _gs_kernel():
    import numba

    @numba.njit(cache=True)
    def sweep(u, f, c, mu, s, rb, rlo, rhi, wx, wy, omega, reverse):
        ny, nx = u.shape
        nj = ny - 2 * wy
        ni = nx - 2 * wx
        change = 0.0
        for jj in range(nj):
            j = ny - wy - 1 - jj if reverse else wy + jj
            for ii in range(ni):
                i = nx - wx - 1 - ii if reverse else wx + ii
                mx = -np.inf
                mn = np.inf
                for r in range(rb.shape[0]):
                    b = rb[r]
                    for a in range(rlo[r], rhi[r] + 1):
                        v = u[j + b, i + a]
                        if v > mx:
                            mx = v
                        w = u[j - b, i - a]
                        if w < mn:
                            mn = w
                cc = c[j, i]
                t = (f[j, i] + s * cc * 0.5 * (mx + mn)) / (mu + s * cc)
                new = (1.0 - omega) * u[j, i] + omega * t
                d = abs(new - u[j, i])
                if d > change:
                    change = d
                u[j, i] = new
        return change

    return sweep


_GS = None


def _gauss_seidel_sweep(*args):
    global _GS
    if _GS is None:
        _GS = _gs_kernel()
    return _GS(*args)


# ---------------------------------------------------------------------------
# solver


@dataclass
class SolveReport:
    u: np.ndarray
    iterations: int
    residual: float
    wall_time: float
    trace: list
    converged: bool = True
    init: str = "G"
    extra: dict = field(default_factory=dict)


def mcshane_lower(grid: Grid, st: Stencil, norm: FinslerNorm, G):
    """``max_y [G(y) - L φ(y - x)]`` over collar nodes ``y`` with the collar Lipschitz constant ``L``."""
    pts = grid.points()
    collar = ~interior_mask(grid, st)
    Y = pts[collar]
    g = G[collar]
    L = 0.0
    for k in range(0, len(Y), 512):
        D = norm(Y[k:k + 512, None, :] - Y[None, :, :])
        num = g[k:k + 512, None] - g[None, :]
        ok = D > 0
        if np.any(ok):
            L = max(L, float(np.max(num[ok] / D[ok])))
    X = pts.reshape(-1, 2)
    out = np.empty(len(X))
    for k in range(0, len(X), 256):
        D = norm(Y[None, :, :] - X[k:k + 256, None, :])
        out[k:k + 256] = np.max(g[None, :] - L * D, axis=1)
    u = out.reshape(grid.shape)
    u[collar] = G[collar]
    return u


def solve_dirichlet(grid: Grid, st: Stencil, mu: float, c, f, G, tol: float = 1e-10,
                    max_iters: int = 200_000, sweep: str = "jacobi", omega: float | None = None,
                    init=None, norm: FinslerNorm | None = None, stall_window: int = 5000,
                    keep_trace: bool = True) -> SolveReport:
    """Solve ``u = T(u)`` on interior nodes with ``u = G`` on the collar.

    Parameters
    ----------
    mu : float
        Discount ``μ >= 0``; ``μ = 0`` switches on damping ``ω = 0.9``.
    c, f, G : Field, array or scalar
        Coefficient ``c >= 0``, running cost and boundary data.
    tol : float
        Stop once ``max |T(u) - u| <= tol`` on interior nodes.
    sweep : {"jacobi", "gauss_seidel"}
    init : {"G", "mcshane", "zero"} or array, optional
        Initial field; defaults to ``"mcshane"`` for ``μ = 0`` (needs
        ``norm``) and ``"G"`` otherwise.

    Raises
    ------
    ConfigurationError
        Negative ``μ`` or ``c``, or ``μ + ε⁻² c = 0`` somewhere.
    IterationLimitError
        ``max_iters`` reached or the residual stagnated.
    """
    t0 = time.perf_counter()
    if mu < 0:
        raise ConfigurationError("mu must be nonnegative")
    if sweep not in ("jacobi", "gauss_seidel"):
        raise ConfigurationError("sweep must be 'jacobi' or 'gauss_seidel'")
    cc = grid.evaluate(c)
    ff = grid.evaluate(f)
    GG = grid.evaluate(G)
    if np.any(cc < 0):
        raise ConfigurationError("c must be nonnegative")
    sl = interior_slice(grid, st)
    s = st.eps ** -2
    if np.any(mu + s * cc[sl] == 0):
        raise ConfigurationError("mu + c/eps^2 vanishes: the update is undefined")
    if omega is None:
        omega = 0.9 if mu == 0 else 1.0
    if init is None:
        init = "mcshane" if (mu == 0 and norm is not None) else "G"
    if isinstance(init, str):
        if init == "G":
            u = GG.copy()
        elif init == "zero":
            u = np.zeros(grid.shape)
        elif init == "mcshane":
            if norm is None:
                raise ConfigurationError("mcshane initialisation needs the norm")
            u = mcshane_lower(grid, st, norm, GG)
        else:
            raise ConfigurationError(f"unknown init {init!r}")
        init_name = init
    else:
        u = np.array(init, dtype=float, copy=True)
        init_name = "array"
    collar = ~interior_mask(grid, st)
    u[collar] = GG[collar]
    f_in, c_in = ff[sl], cc[sl]

    trace = []
    best = np.inf
    best_at = 0
    it = 0
    res = np.inf
    if sweep == "gauss_seidel":
        rb = np.array(sorted(st.rows), dtype=np.int64)
        rlo = np.array([st.rows[b][0] for b in rb], dtype=np.int64)
        rhi = np.array([st.rows[b][1] for b in rb], dtype=np.int64)
        fc = np.ascontiguousarray(ff)
        ccc = np.ascontiguousarray(cc)
    while True:
        Tu = update_map(st, u, mu, c_in, f_in)
        res = float(np.max(np.abs(Tu - u[sl])))
        if keep_trace:
            trace.append(res)
        if res <= tol:
            break
        if it >= max_iters:
            raise IterationLimitError(f"no convergence after {it} iterations (residual {res:.3e})", trace)
        if res < best * (1.0 - 1e-3):
            best, best_at = res, it
        elif it - best_at > stall_window:
            raise IterationLimitError(f"residual stagnated at {res:.3e} after {it} iterations", trace)
        if sweep == "jacobi":
            u[sl] = (1.0 - omega) * u[sl] + omega * Tu
            it += 1
        else:
            # a forward and a reverse sweep between residual evaluations
            for rev in (False, True):
                _gauss_seidel_sweep(u, fc, ccc, float(mu), s, rb, rlo, rhi, st.wx, st.wy,
                                    float(omega), rev)
            it += 2
    return SolveReport(u, it, res, time.perf_counter() - t0, trace, True, init_name)


# ---------------------------------------------------------------------------
# convergence against exact cones


def cone_fixed_point_errors(norm: FinslerNorm, box, h: float, eps: float, v, mu: float = 1.0,
                            tol: float = 1e-11, sweep: str = "jacobi"):
    """Raw and residual-absorbed errors for cone data ``f = μ φ(· - v)``, ``G = φ(· - v)``.

    The cone solves the continuum problem exactly.  On the lattice ``M``
    misses the cone by the measured residual ``r = cone - M cone``; adding
    ``ε⁻² c r`` to ``f`` makes the cone an exact discrete fixed point, so
    the solve with that data must reproduce the cone to solver tolerance.
    """
    grid, st = build(norm, box, h, eps)
    cone = Cone(norm, np.asarray(v, dtype=float))
    K = grid.evaluate(cone)
    sl = interior_slice(grid, st)
    r = np.zeros(grid.shape)
    r[sl] = K[sl] - apply_M_field(st, K)
    raw = solve_dirichlet(grid, st, mu, 1.0, mu * K, K, tol=tol, sweep=sweep, init="G")
    absorbed = solve_dirichlet(grid, st, mu, 1.0, mu * K + eps ** -2 * r, K, tol=tol, sweep=sweep,
                               init="G")
    return {
        "grid": grid,
        "stencil": st,
        "raw_error": float(np.max(np.abs(raw.u - K))),
        "cone_referenced_error": float(np.max(np.abs(absorbed.u - K))),
        "m_residual": float(np.max(np.abs(r))),
        "raw": raw,
        "absorbed": absorbed,
    }


def convergence_study(norm: FinslerNorm, ladder, box=(0.0, 1.0, 0.0, 1.0), v=(-0.5, 0.5),
                      mu: float = 1.0, tol: float = 1e-10, sweep: str = "jacobi", data: str = "cone"):
    """Sup-error per ``(ε, h)`` level against an exact reference.

    ``data`` selects the reference: ``"cone"`` (``f = μ φ(·-v)``, ``G = φ(·-v)``),
    ``"linear"`` or ``"constant"`` (both exact discrete solutions).

    Returns a list of dicts with keys ``eps, h, error, ratio, iterations, seconds``.
    """
    rows = []
    for eps, h in ladder:
        grid, st = build(norm, box, h, eps)
        if data == "cone":
            ref = grid.evaluate(Cone(norm, np.asarray(v, dtype=float)))
        elif data == "linear":
            ref = grid.points() @ np.array([0.7, -0.3]) + 0.1
        elif data == "constant":
            ref = np.full(grid.shape, 0.5)
        else:
            raise ConfigurationError(f"unknown reference data {data!r}")
        rep = solve_dirichlet(grid, st, mu, 1.0, mu * ref, ref, tol=tol, sweep=sweep, init="G",
                              keep_trace=False)
        err = float(np.max(np.abs(rep.u - ref)))
        ratio = err / rows[-1]["error"] if rows and rows[-1]["error"] > 0 else float("nan")
        rows.append({"eps": eps, "h": h, "error": err, "ratio": ratio,
                     "iterations": rep.iterations, "seconds": rep.wall_time})
    return rows


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    """Shortest round-trip decimal for a float (``repr``), integers unchanged."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_field_csv(grid: Grid, u, path) -> None:
    """Dump ``x,y,u`` row-major over nodes (``y`` outer, ``x`` inner)."""
    u = np.asarray(u, dtype=float)
    xs, ys = grid.x, grid.y
    with open(path, "w", newline="") as fh:
        fh.write("x,y,u\n")
        for j in range(grid.ny):
            yj = fmt(ys[j])
            fh.write("".join(f"{fmt(xs[i])},{yj},{fmt(u[j, i])}\n" for i in range(grid.nx)))


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("iter,residual\n")
        for k, r in enumerate(trace):
            fh.write(f"{k},{fmt(r)}\n")
