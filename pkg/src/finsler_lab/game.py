"""Monte Carlo tug-of-war on the lattice stencil, cross-checking the grid solver.

At a node ``x`` in ``U_ε`` a fair coin picks the mover: Player I moves to
``x + z`` and Player II to ``x - z`` with ``z ∈ Z⁺``.  The payoff is
normalised to the discrete equation actually solved,

    u(x) = a(x) + β(x) (½ u(x + z_I) + ½ u(x - z_II)),
    a = f / (μ + ε⁻² c),   β = ε⁻² c / (μ + ε⁻² c),

so an episode ``x_0, ..., x_{n+1}`` (first exit at ``x_{n+1}``) pays

    Σ_m (Π_{k<m} β(x_k)) a(x_m) + (Π_{k<=n} β(x_k)) G(x_{n+1}).

With greedy strategies on the exact discrete solution the expected payoff
equals ``u(x_0)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import STENCIL_SLACK, build, fmt, interior_mask, solve_dirichlet
from .norms import FinslerNorm

__all__ = [
    "GameConfig",
    "EpisodeTrace",
    "Game",
    "simulate_episode",
    "estimate_value",
    "dp_one_step",
    "check_moves",
    "write_episode_csv",
]

CHUNK = 256


@dataclass
class GameConfig:
    norm: FinslerNorm
    box: tuple
    eps: float
    h: float
    mu: float
    f: object
    G: object
    c: object = 1.0
    strategy: str = "greedy"      # "greedy" or "random" (both players)
    cap: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("the game needs a positive discount mu")
        if self.strategy not in ("greedy", "random"):
            raise ValueError("strategy must be 'greedy' or 'random'")


@dataclass
class EpisodeTrace:
    states: np.ndarray          # (n+2, 2) node coordinates, exit node last
    coins: np.ndarray           # (n+1,) True when Player I moved
    costs: np.ndarray           # (n+1,) discounted running cost of each step
    terminal: float             # discounted terminal payout
    payoff: float
    truncated: bool = False


class Game:
    """Precomputed grid, stencil, weights and greedy move tables."""

    def __init__(self, cfg: GameConfig, field_I=None, field_II=None):
        self.cfg = cfg
        self.grid, self.st = build(cfg.norm, cfg.box, cfg.h, cfg.eps)
        g = self.grid
        c = g.evaluate(cfg.c)
        s = cfg.eps ** -2
        self.a = g.evaluate(cfg.f) / (cfg.mu + s * c)
        self.beta = s * c / (cfg.mu + s * c)
        self.G = g.evaluate(cfg.G)
        self.interior = interior_mask(g, self.st)
        self.solution = None
        if cfg.strategy == "greedy" and (field_I is None or field_II is None):
            self.solution = solve_dirichlet(g, self.st, cfg.mu, cfg.c, cfg.f, cfg.G, tol=1e-13,
                                            init="G", keep_trace=False)
        self.field_I = self.solution.u if field_I is None and self.solution else field_I
        self.field_II = self.solution.u if field_II is None and self.solution else field_II
        if cfg.strategy == "greedy":
            self.move_I = self._greedy_table(self.field_I, +1)
            self.move_II = self._greedy_table(self.field_II, -1)

    def _greedy_table(self, u, sign):
        """Per node, the stencil index maximising (``sign=+1``: ``u(x+z)``) or
        minimising (``sign=-1``: ``u(x-z)``) over ``Z⁺``; first index on ties."""
        u = np.asarray(u, dtype=float)
        Z = self.st.offsets
        J, I = np.nonzero(self.interior)
        table = np.full(self.grid.shape, -1, dtype=np.int64)
        for k in range(0, len(J), 2048):
            j, i = J[k:k + 2048, None], I[k:k + 2048, None]
            vals = u[j + sign * Z[None, :, 1], i + sign * Z[None, :, 0]]
            best = np.argmax(vals, axis=1) if sign > 0 else np.argmin(vals, axis=1)
            table[J[k:k + 2048], I[k:k + 2048]] = best
        return table

    def choose(self, j, i, heads, rand_idx=None):
        """Next node indices for movers given by ``heads`` (Player I when True)."""
        Z = self.st.offsets
        if self.cfg.strategy == "greedy":
            kI = self.move_I[j, i]
            kII = self.move_II[j, i]
        else:
            kI = kII = rand_idx
        nj = np.where(heads, j + Z[kI, 1], j - Z[kII, 1])
        ni = np.where(heads, i + Z[kI, 0], i - Z[kII, 0])
        return nj, ni

    def expected_update(self, u, j, i):
        """``a + β (½ u(x + z_I) + ½ u(x - z_II))`` with the game's own move tables."""
        u = np.asarray(u, dtype=float)
        jI, iI = self.choose(j, i, np.ones_like(j, dtype=bool))
        jII, iII = self.choose(j, i, np.zeros_like(j, dtype=bool))
        return self.a[j, i] + self.beta[j, i] * (0.5 * u[jI, iI] + 0.5 * u[jII, iII])

    def run(self, x0, episodes: int, seed: int | None = None, log: bool = False):
        """Play ``episodes`` independent games from the node nearest ``x0``.

        Episode ``k`` draws its coins (and random moves) from
        ``default_rng([seed, k])`` in chunks of ``CHUNK``, so results do not
        depend on how episodes are batched.
        """
        seed = self.cfg.seed if seed is None else seed
        j0, i0 = self.grid.node_of(x0)
        if not self.interior[j0, i0]:
            raise ValueError("x0 must lie in U_eps")
        n = episodes
        rngs = [np.random.default_rng([seed, k]) for k in range(n)]
        j = np.full(n, j0)
        i = np.full(n, i0)
        disc = np.ones(n)
        pay = np.zeros(n)
        comp = np.zeros(n)          # Kahan compensation per episode
        active = np.ones(n, dtype=bool)
        truncated = np.zeros(n, dtype=bool)
        coins = np.zeros((n, CHUNK), dtype=bool)
        moves = np.zeros((n, CHUNK), dtype=np.int64)
        K = len(self.st)
        logs = [] if log else None
        step = 0
        while np.any(active):
            if step % CHUNK == 0:
                for k in np.flatnonzero(active):
                    coins[k] = rngs[k].random(CHUNK) < 0.5
                    if self.cfg.strategy == "random":
                        moves[k] = rngs[k].integers(0, K, CHUNK)
            if step >= self.cfg.cap:
                truncated[active] = True
                break
            act = np.flatnonzero(active)
            ja, ia = j[act], i[act]
            cost = disc[act] * self.a[ja, ia]
            y = cost - comp[act]
            t = pay[act] + y
            comp[act] = (t - pay[act]) - y
            pay[act] = t
            disc[act] *= self.beta[ja, ia]
            heads = coins[act, step % CHUNK]
            nj, ni = self.choose(ja, ia, heads, moves[act, step % CHUNK])
            if log:
                logs.append((act.copy(), step, ja, ia, heads.copy(), cost, nj, ni))
            j[act], i[act] = nj, ni
            exited = ~self.interior[nj, ni]
            if np.any(exited):
                ex = act[exited]
                term = disc[ex] * self.G[j[ex], i[ex]]
                y = term - comp[ex]
                pay[ex] = pay[ex] + y
                active[ex] = False
            step += 1
        return pay, truncated, (j, i, logs)


def simulate_episode(cfg: GameConfig, x0, rng_seed=0, game: Game | None = None) -> EpisodeTrace:
    """One episode with its full trace (``rng_seed`` selects the episode stream).

    Every move is checked against the stencil with the mover's orientation.
    """
    game = game or Game(cfg)
    pay, trunc, (_, _, logs) = game.run(x0, 1, seed=rng_seed, log=True)
    g = game.grid
    states = [(g.x[lg[3][0]], g.y[lg[2][0]]) for lg in logs]
    if logs:
        states.append((g.x[logs[-1][7][0]], g.y[logs[-1][6][0]]))
    states = np.array(states)
    coins = np.array([bool(lg[4][0]) for lg in logs])
    costs = np.array([float(lg[5][0]) for lg in logs])
    check_moves(game, states, coins)
    terminal = float(pay[0] - math.fsum(costs))
    return EpisodeTrace(states, coins, costs, terminal, float(pay[0]), bool(trunc[0]))


def check_moves(game: Game, states, coins) -> None:
    """Assert each move lies in the closed stencil ball of its mover."""
    dz = np.diff(np.asarray(states, dtype=float), axis=0)
    if not len(dz):
        return
    dz = np.where(np.asarray(coins)[:, None], dz, -dz)
    lim = game.cfg.eps * (1.0 + STENCIL_SLACK) + 1e-12
    bad = game.cfg.norm(dz) > lim
    if np.any(bad):
        raise AssertionError(f"illegal move at step {int(np.flatnonzero(bad)[0])}")


def estimate_value(cfg: GameConfig, x0, episodes: int = 10_000, game: Game | None = None,
                   seed: int | None = None):
    """Sample mean and standard error of the payoff over seeded episodes.

    Returns ``(mean, stderr, info)`` where ``info`` holds the truncated
    fraction and, for greedy play, the solver value ``u(x0)``.
    """
    if episodes < 100:
        raise ValueError("use at least 100 episodes")
    game = game or Game(cfg)
    pay, trunc, _ = game.run(x0, episodes, seed=seed)
    frac = float(np.mean(trunc))
    if frac > 0.01:
        warnings.warn(f"{100 * frac:.2f}% of episodes hit the step cap", RuntimeWarning)
    mean = math.fsum(pay.tolist()) / episodes
    var = math.fsum(((pay - mean) ** 2).tolist()) / (episodes - 1)
    info = {"truncated_fraction": frac}
    if game.solution is not None:
        j, i = game.grid.node_of(x0)
        info["solver_value"] = float(game.solution.u[j, i])
    return mean, math.sqrt(var / episodes), info


def dp_one_step(game: Game, u, nodes) -> float:
    """Max gap between the solver's update map and the game's one-step expectation."""
    from .grid import interior_slice, update_map
    g, st = game.grid, game.st
    sl = interior_slice(g, st)
    c = g.evaluate(game.cfg.c)[sl]
    f = g.evaluate(game.cfg.f)[sl]
    T = update_map(st, u, game.cfg.mu, c, f)
    j, i = np.asarray(nodes).T
    expected = game.expected_update(u, j, i)
    return float(np.max(np.abs(expected - T[j - st.wy, i - st.wx])))


def write_episode_csv(game: Game, x0, episodes: int, path, seed: int | None = None) -> None:
    """Log ``episode,step,x,y,coin,cost`` for every move of every episode."""
    _, _, (_, _, logs) = game.run(x0, episodes, seed=seed, log=True)
    rows = []
    for act, step, ja, ia, heads, cost, _, _ in logs:
        for k in range(len(act)):
            rows.append((int(act[k]), step, game.grid.x[ia[k]], game.grid.y[ja[k]],
                         int(heads[k]), cost[k]))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        fh.write("episode,step,x,y,coin,cost\n")
        for r in rows:
            fh.write(f"{r[0]},{r[1]},{fmt(r[2])},{fmt(r[3])},{r[4]},{fmt(r[5])}\n")
