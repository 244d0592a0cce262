"""Post-hoc checks on computed fields: cones, Lipschitz constants, eigenvalue.

All checks work on a :class:`~finsler_lab.grid.Grid` field ``u`` of shape
``(ny, nx)``.  Sub-boxes are given in node indices ``(i0, i1, j0, j1)``
(inclusive); their closure ``V̄`` adds the stencil collar around ``V`` and
``∂V = V̄ \\ V``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .consistency import barrier_check  # noqa: F401  (re-exported)
from .grid import Grid, Stencil, fmt
from .norms import FinslerNorm

__all__ = [
    "ConeProbe",
    "ProbeResult",
    "cone_comparison_check",
    "make_cone_probes",
    "comparison_tolerance",
    "lipschitz_seminorm",
    "amle_check",
    "EigenReport",
    "eigenvalue_estimate",
    "barrier_check",
    "write_probe_csv",
]


@dataclass(frozen=True)
class ConeProbe:
    """Sub-box ``V`` (physical coordinates), cone vertex ``v ∉ V``, slope ``λ > 0``."""

    box: tuple            # (xmin, xmax, ymin, ymax) of V
    v: tuple
    lam: float
    orientation: str = "above"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("cone slope must be positive")
        if self.orientation not in ("above", "below"):
            raise ValueError("orientation must be 'above' or 'below'")
        x0, x1, y0, y1 = self.box
        if x0 <= self.v[0] <= x1 and y0 <= self.v[1] <= y1:
            raise ValueError("cone vertex must lie outside V")

    def node_box(self, grid: Grid):
        """Inclusive index box of the nodes inside ``V``."""
        x0, x1, y0, y1 = self.box
        h = grid.h
        i0 = int(np.ceil((x0 - grid.xmin) / h - 1e-9))
        i1 = int(np.floor((x1 - grid.xmin) / h + 1e-9))
        j0 = int(np.ceil((y0 - grid.ymin) / h - 1e-9))
        j1 = int(np.floor((y1 - grid.ymin) / h + 1e-9))
        return i0, i1, j0, j1


def comparison_tolerance(eps: float, h: float, C: float = 5.0) -> float:
    """``C (ε + h/ε)``."""
    return C * (eps + h / eps)


@dataclass
class ProbeResult:
    id: int
    delta: float
    threshold: float
    passed: bool


def _closure(grid: Grid, st: Stencil | None, nb):
    i0, i1, j0, j1 = nb
    wx = st.wx if st is not None else 1
    wy = st.wy if st is not None else 1
    return (max(0, i0 - wx), min(grid.nx - 1, i1 + wx), max(0, j0 - wy), min(grid.ny - 1, j1 + wy))


def _probe_delta(grid: Grid, u, norm: FinslerNorm, probe: ConeProbe, st: Stencil | None) -> float:
    nb = probe.node_box(grid)
    i0, i1, j0, j1 = nb
    if i1 < i0 or j1 < j0:
        return 0.0
    c0, c1, d0, d1 = _closure(grid, st, nb)
    pts = grid.points()[d0:d1 + 1, c0:c1 + 1]
    uu = np.asarray(u)[d0:d1 + 1, c0:c1 + 1]
    v = np.asarray(probe.v, dtype=float)
    inner = np.zeros(uu.shape, dtype=bool)
    inner[j0 - d0:j1 - d0 + 1, i0 - c0:i1 - c0 + 1] = True
    if probe.orientation == "above":
        w = uu - probe.lam * norm(pts - v)
        return float(np.max(w) - np.max(w[~inner]))
    w = uu + probe.lam * norm(v - pts)
    return float(np.min(w[~inner]) - np.min(w))


def cone_comparison_check(grid: Grid, u, norm: FinslerNorm, probes, tol: float,
                          stencil: Stencil | None = None, threads: int = 1):
    """``Δ`` per probe: how far the extremum over ``V̄`` exceeds the one over ``∂V``.

    Above: ``Δ = max_{V̄}(u - λφ(·-v)) - max_{∂V}(u - λφ(·-v))``.
    Below: ``Δ = min_{∂V}(u + λφ(v-·)) - min_{V̄}(u + λφ(v-·))``.
    ``Δ >= 0`` always; a probe passes iff ``Δ <= tol``.
    """
    def one(k):
        d = _probe_delta(grid, u, norm, probes[k], stencil)
        return ProbeResult(k, d, tol, d <= tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, range(len(probes))))
    return [one(k) for k in range(len(probes))]


def make_cone_probes(n: int, seed: int, domain=(0.0, 1.0, 0.0, 1.0), margin: float = 0.25,
                     min_size: float = 0.1, max_size: float = 0.4, lam_range=(0.2, 3.0)):
    """Seeded probes in physical coordinates (independent of the grid resolution).

    Sub-boxes lie inside the domain shrunk by ``margin``; vertices are drawn
    from the domain enlarged by 0.5 and rejected while inside ``V``.
    """
    rng = np.random.default_rng(seed)
    X0, X1, Y0, Y1 = domain
    out = []
    while len(out) < n:
        wx, wy = rng.uniform(min_size, max_size, 2)
        x0 = rng.uniform(X0 + margin, max(X0 + margin, X1 - margin - wx))
        y0 = rng.uniform(Y0 + margin, max(Y0 + margin, Y1 - margin - wy))
        box = (x0, min(x0 + wx, X1 - margin), y0, min(y0 + wy, Y1 - margin))
        v = (rng.uniform(X0 - 0.5, X1 + 0.5), rng.uniform(Y0 - 0.5, Y1 + 0.5))
        if box[0] <= v[0] <= box[1] and box[2] <= v[1] <= box[3]:
            continue
        lam = float(rng.uniform(*lam_range))
        orient = "above" if rng.random() < 0.5 else "below"
        out.append(ConeProbe(box, v, lam, orient))
    return out


# ---------------------------------------------------------------------------
# Lipschitz seminorms


NEIGHBOURS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]


def _pair_quotients(norm, pa, pb, ua, ub):
    d = norm(pa - pb)
    ok = d > 0
    q1 = np.where(ok, (ua - ub) / np.where(ok, d, 1.0), -np.inf)
    d2 = norm(pb - pa)
    q2 = np.where(d2 > 0, (ub - ua) / np.where(d2 > 0, d2, 1.0), -np.inf)
    return max(float(np.max(q1, initial=-np.inf)), float(np.max(q2, initial=-np.inf)))


def lipschitz_seminorm(grid: Grid, u, norm: FinslerNorm, region=None, pair_budget: int = 20000,
                       seed: int = 0) -> float:
    """``max (u(x) - u(y))/φ(x - y)`` over sampled pairs and all short-range pairs.

    ``region`` is a boolean mask or an index box ``(i0, i1, j0, j1)``; the
    default is the whole grid.  Asymmetric norms are handled by testing both
    orders of every pair.
    """
    u = np.asarray(u, dtype=float)
    mask = _region_mask(grid, region)
    pts = grid.points()
    best = 0.0
    for di, dj in NEIGHBOURS:
        # pairs (node, node + (di, dj)) with both ends inside the region
        ja, ia = slice(max(0, -dj), grid.ny - max(0, dj)), slice(max(0, -di), grid.nx - max(0, di))
        jb, ib = slice(ja.start + dj, ja.stop + dj), slice(ia.start + di, ia.stop + di)
        both = mask[ja, ia] & mask[jb, ib]
        if np.any(both):
            best = max(best, _pair_quotients(norm, pts[ja, ia][both], pts[jb, ib][both],
                                             u[ja, ia][both], u[jb, ib][both]))
    idx = np.flatnonzero(mask.ravel())
    if len(idx) > 1 and pair_budget > 0:
        rng = np.random.default_rng(seed)
        ia = rng.choice(idx, pair_budget)
        ib = rng.choice(idx, pair_budget)
        P = pts.reshape(-1, 2)
        U = u.ravel()
        best = max(best, _pair_quotients(norm, P[ia], P[ib], U[ia], U[ib]))
    return best


def _region_mask(grid: Grid, region):
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    region = np.asarray(region)
    if region.dtype == bool:
        return region
    i0, i1, j0, j1 = (int(t) for t in region)
    m = np.zeros(grid.shape, dtype=bool)
    m[j0:j1 + 1, i0:i1 + 1] = True
    return m


def _all_pairs_lip(norm, P, U):
    best = 0.0
    for k in range(0, len(P), 256):
        D = norm(P[k:k + 256, None, :] - P[None, :, :])
        num = U[k:k + 256, None] - U[None, :]
        ok = D > 0
        if np.any(ok):
            best = max(best, float(np.max(num[ok] / D[ok])))
    return best


@dataclass
class AmleResult:
    id: int
    lip_closure: float
    lip_boundary: float
    difference: float
    threshold: float
    passed: bool


def amle_check(grid: Grid, u, norm: FinslerNorm, subdomains, tol: float):
    """``Lip(u; V̄) - Lip(u; ∂V)`` per index box ``V̄ = (i0, i1, j0, j1)``.

    ``∂V`` is the outer ring of the box; both seminorms use every pair of
    the respective node sets, so the difference is exact on the grid.
    """
    u = np.asarray(u, dtype=float)
    pts = grid.points()
    out = []
    for k, (i0, i1, j0, j1) in enumerate(subdomains):
        P = pts[j0:j1 + 1, i0:i1 + 1]
        U = u[j0:j1 + 1, i0:i1 + 1]
        ring = np.ones(U.shape, dtype=bool)
        ring[1:-1, 1:-1] = False
        L_all = _all_pairs_lip(norm, P.reshape(-1, 2), U.ravel())
        L_bd = _all_pairs_lip(norm, P[ring], U[ring])
        diff = L_all - L_bd
        out.append(AmleResult(k, L_all, L_bd, diff, tol, diff <= tol))
    return out


# ---------------------------------------------------------------------------
# eigenvalue


@dataclass
class EigenReport:
    Lambda: float
    max_rho: float
    argmax: tuple
    rho: np.ndarray = field(repr=False)
    field: np.ndarray = field(repr=False)
    lipschitz: float = float("nan")
    boundary_max: float = float("nan")
    admissible: bool = False


def eigenvalue_estimate(norm: FinslerNorm, box=(0.0, 1.0, 0.0, 1.0), h: float = 1 / 64,
                        tol: float = 1e-12, pair_budget: int = 20000, seed: int = 0) -> EigenReport:
    """``Λ = 1/max ρ`` with ``ρ(x) = min_{y ∈ ∂U} φ(x - y)`` over boundary nodes.

    The extremal field is ``ρ / max ρ``.  Admissibility: ``ρ = 0`` on the
    boundary nodes and ``Lip_φ(ρ) <= 1 + tol``; the latter holds on the grid
    by the triangle inequality since ``ρ`` is a minimum of ``φ(· - y)``.
    """
    grid = Grid(*map(float, box), float(h))
    pts = grid.points()
    bd = np.zeros(grid.shape, dtype=bool)
    bd[0, :] = bd[-1, :] = bd[:, 0] = bd[:, -1] = True
    Y = pts[bd]
    X = pts.reshape(-1, 2)
    rho = np.empty(len(X))
    for k in range(0, len(X), 512):
        rho[k:k + 512] = np.min(norm(X[k:k + 512, None, :] - Y[None, :, :]), axis=1)
    rho = rho.reshape(grid.shape)
    m = float(np.max(rho))
    j, i = np.unravel_index(int(np.argmax(rho)), rho.shape)
    lip = lipschitz_seminorm(grid, rho, norm, pair_budget=pair_budget, seed=seed)
    bmax = float(np.max(np.abs(rho[bd])))
    return EigenReport(1.0 / m, m, (float(grid.x[i]), float(grid.y[j])), rho, rho / m, lip, bmax,
                       bool(bmax == 0.0 and lip <= 1.0 + tol))


# ---------------------------------------------------------------------------
# output


def write_probe_csv(results, path, quantity: str = "delta") -> None:
    """One row per probe, sorted by id: ``id,quantity,value,threshold,pass``."""
    with open(path, "w", newline="") as fh:
        fh.write("id,quantity,value,threshold,pass\n")
        for r in sorted(results, key=lambda r: r.id):
            value = r.delta if hasattr(r, "delta") else r.difference
            fh.write(f"{r.id},{quantity},{fmt(value)},{fmt(r.threshold)},{fmt(bool(r.passed))}\n")
