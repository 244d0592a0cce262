"""Continuum evaluation of the scheme operator and its consistency bracket.

For a smooth ``f`` the continuum version of ``ε⁻²[f - M f](x₀)`` extremises
``f`` over the φ-ball of radius ``ε`` directly (no lattice).  As ``ε -> 0``
it must land in the bracket ``[-κ G*_φ, -κ G^φ_*]`` evaluated at
``(Df(x₀), D²f(x₀))``.  A Taylor expansion on quadratics gives ``κ = ½``:
the half comes from averaging the sup and inf branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _geometry as geo
from .norms import FinslerNorm, Inverted
from .operators import infinity_operator

__all__ = [
    "KAPPA",
    "ball_extremum",
    "scheme_value",
    "ConsistencyReport",
    "consistency_probe",
    "random_quadratic_probes",
    "BarrierReport",
    "barrier_check",
]

KAPPA = 0.5
N_BOUNDARY = 4096


def ball_extremum(norm: FinslerNorm, fun, x0, eps: float, mode: str = "max", sign: float = 1.0,
                  interior=None, n_dirs: int = N_BOUNDARY):
    """``max`` or ``min`` of ``fun(x0 + sign z)`` over ``{z : φ(z) <= ε}`` (2D).

    Candidates: a dense sweep of boundary points ``ε u/φ(u)`` refined by
    golden section, the scaled ball vertices for polytopes, and optional
    interior candidates ``interior(x0) -> (k, 2)`` array of offsets ``z``.
    """
    if norm.dim != 2:
        raise ValueError("ball extremisation is implemented in 2D")
    x0 = np.asarray(x0, dtype=float)
    s = 1.0 if mode == "max" else -1.0

    def obj(theta):
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        z = eps * norm.boundary_points(u)
        return s * fun(x0 + sign * z)

    theta = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    vals = obj(theta)
    best = float(np.max(vals))
    # refine around the best few sweep points (ties on flat pieces are common)
    order = np.argsort(vals)[::-1][:8]
    step = 2.0 * np.pi / n_dirs
    _, refined = geo.golden_max(obj, theta[order] - step, theta[order] + step, iters=60)
    best = max(best, float(np.max(refined)))
    extra = []
    if norm.polytope is not None:
        extra.append(eps * norm.polytope.vertices)
    if interior is not None:
        z = np.atleast_2d(np.asarray(interior, dtype=float))
        if len(z):
            z = z[norm(z) <= eps]
            extra.append(z)
    if extra:
        Z = np.concatenate(extra)
        if len(Z):
            best = max(best, float(np.max(s * fun(x0 + sign * Z))))
    return s * best


def _quadratic_stationary(f, x0):
    """Offsets to the stationary point of the second-order model of ``f`` at ``x0``."""
    try:
        H = np.asarray(f.hess(x0), dtype=float)
        g = np.asarray(f.grad(x0), dtype=float)
    except (AttributeError, NotImplementedError):
        return np.empty((0, 2))
    if abs(np.linalg.det(H)) < 1e-14:
        return np.empty((0, 2))
    return -np.linalg.solve(H, g)[None, :]


def scheme_value(norm: FinslerNorm, f, x0, eps: float) -> float:
    """``ε⁻²[f(x0) - M_ε f(x0)]`` with ``M`` using the continuum φ-ball.

    ``M f(x0) = ½ max_{φ(z)<=ε} f(x0 + z) + ½ min_{φ(z)<=ε} f(x0 - z)``.
    """
    x0 = np.asarray(x0, dtype=float)
    zs = _quadratic_stationary(f, x0)
    up = ball_extremum(norm, f, x0, eps, "max", +1.0, interior=zs)
    down = ball_extremum(norm, f, x0, eps, "min", -1.0, interior=-zs)
    f0 = float(f(x0))
    return (f0 - 0.5 * (up + down)) / eps ** 2


@dataclass
class ConsistencyReport:
    eps: list
    values: list
    lower: float              # -κ G*  (bracket lower end)
    upper: float              # -κ G_* (bracket upper end)
    kappa: float
    limit: float              # polynomial extrapolation to ε = 0
    in_bracket: list
    margin: float             # distance of the limit inside the bracket (negative = outside)
    envelope_mode: bool = False
    extra: dict = field(default_factory=dict)


def consistency_probe(norm: FinslerNorm, f, x0, eps_list=(0.02, 0.01, 0.005),
                      kappa: float = KAPPA) -> ConsistencyReport:
    """Scheme values on an ε ladder against the κ-scaled operator bracket.

    ``f`` needs ``grad`` and ``hess``.  If ``Df(x0) = 0`` the bracket uses
    the ``p = 0`` envelopes and the report is flagged.
    """
    x0 = np.asarray(x0, dtype=float)
    p = np.asarray(f.grad(x0), dtype=float)
    X = np.asarray(f.hess(x0), dtype=float)
    G_up = infinity_operator(norm, "upper", 0.0, p, X).value
    G_lo = infinity_operator(norm, "lower", 0.0, p, X).value
    lower, upper = -kappa * G_up, -kappa * G_lo
    eps_list = list(eps_list)
    values = [scheme_value(norm, f, x0, e) for e in eps_list]
    if len(values) >= 2 and abs(values[-1] - values[-2]) <= 1e-12 * max(1.0, abs(values[-1])):
        # polytope balls: the value is exact once ε is below the local kink scale
        limit = values[-1]
    elif len(values) >= 2:
        # Richardson: polynomial through all ladder points, evaluated at ε = 0
        limit = float(np.polyfit(eps_list, values, len(values) - 1)[-1])
    else:
        limit = values[-1]
    inside = [lower - 1e-12 <= v <= upper + 1e-12 for v in values]
    margin = min(limit - lower, upper - limit)
    return ConsistencyReport(eps_list, values, lower, upper, kappa, limit, inside, margin,
                             envelope_mode=not np.any(p != 0))


def random_quadratic_probes(norm: FinslerNorm, n: int = 20, seed: int = 0,
                            eps_list=(0.02, 0.01, 0.005), kappa: float = KAPPA):
    """Consistency reports for ``n`` seeded quadratics ``½<Xx,x> + <p,x>`` at the origin.

    ``p`` is uniform on the unit circle and ``X`` has standard normal entries
    (symmetrised).
    """
    from .functions import Quadratic
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        t = rng.uniform(0.0, 2.0 * np.pi)
        p = np.array([np.cos(t), np.sin(t)])
        X = rng.standard_normal((2, 2))
        X = 0.5 * (X + X.T)
        out.append(consistency_probe(norm, Quadratic(X, p), np.zeros(2), eps_list, kappa))
    return out


# ---------------------------------------------------------------------------
# barriers


@dataclass
class BarrierReport:
    alpha: float
    eps: list
    plus_min: list            # min over samples of ε⁻²[u₊ - M u₊] per ε
    minus_max: list           # max over samples of ε⁻²[u₋ - M u₋] per ε
    C_plus: float             # α(1-α) r_max^(α-2), r_max = max φ(x) over samples
    C_minus: float            # same with φ(-x)
    sign_flips: int
    skipped: int
    kappa: float = KAPPA

    def ok(self, tol: float = 0.0) -> bool:
        return (self.sign_flips == 0
                and min(self.plus_min) >= self.kappa * self.C_plus - tol
                and max(self.minus_max) <= -self.kappa * self.C_minus + tol)


class _Power:
    def __init__(self, norm, alpha, sign):
        self.norm, self.alpha, self.sign = norm, alpha, sign

    def __call__(self, x):
        return self.sign * self.norm(x) ** self.alpha


def barrier_check(norm: FinslerNorm, alpha: float = 0.5, R: float = 1.0, samples: int = 20,
                  seed: int = 0, eps_list=(0.1, 0.05, 0.025), min_ratio: float = 4.0,
                  kappa: float = KAPPA) -> BarrierReport:
    """Sign of the scheme operator on the conical barriers ``φ^α`` and ``-φ(-·)^α``.

    ``u₊ = φ^α`` must give ``ε⁻²[u₊ - M u₊] > 0`` and ``u₋(x) = -φ(-x)^α``
    the opposite sign, at sampled ``x`` with ``0 < |x| <= R``.  Samples with
    ``φ(x) < min_ratio · ε`` (resp. ``φ(-x)``) are skipped for that ε.

    Along the ray through ``x`` the ball extremes of ``φ^α`` are
    ``(r ± ε)^α`` with ``r = φ(x)``, and the second difference of the concave
    ``r^α`` dominates ``α(1-α) r^(α-2)``.  Hence the positive constant
    ``C₊ = α(1-α) r_max^(α-2)`` bounds the values from below by ``κ C₊``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, norm.dim))
    x *= (R * np.sqrt(rng.uniform(0.05, 1.0, samples)))[:, None] / np.linalg.norm(x, axis=1, keepdims=True)
    up = _Power(norm, alpha, 1.0)
    inv = Inverted(norm)
    down = _Power(inv, alpha, -1.0)
    plus_min, minus_max = [], []
    skipped = 0
    signs = []
    for e in eps_list:
        pv, mv = [], []
        for xi in x:
            if norm(xi) >= min_ratio * e:
                pv.append(scheme_value(norm, up, xi, e))
            else:
                skipped += 1
            if inv(xi) >= min_ratio * e:
                mv.append(scheme_value(norm, down, xi, e))
            else:
                skipped += 1
        plus_min.append(float(np.min(pv)) if pv else float("nan"))
        minus_max.append(float(np.max(mv)) if mv else float("nan"))
        signs.append((np.sign(plus_min[-1]), np.sign(minus_max[-1])))
    flips = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    C_plus = alpha * (1.0 - alpha) * float(np.max(norm(x))) ** (alpha - 2.0)
    C_minus = alpha * (1.0 - alpha) * float(np.max(inv(x))) ** (alpha - 2.0)
    return BarrierReport(alpha, list(eps_list), plus_min, minus_max, C_plus, C_minus, flips,
                         skipped, kappa)
