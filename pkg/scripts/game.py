"""Monte Carlo tug-of-war against the grid solver on cone data.

Compares the greedy game estimate with ``u(x0)``, and shows that a Player I
steering by a corrupted field earns less.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from finsler_lab.functions import Cone
from finsler_lab.game import Game, GameConfig, dp_one_step, estimate_value
from finsler_lab.scenario import build_norm


@dataclass
class Config:
    norm: str = "euclidean"
    eps: float = 0.1
    h: float = 1 / 100
    mu: float = 1.0
    episodes: int = 10_000
    x0: tuple = (0.5, 0.5)
    seed: int = 0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for k, v in vars(Config()).items():
        if not isinstance(v, tuple):
            ap.add_argument(f"--{k}", type=type(v), default=v)
    cfg = Config(**vars(ap.parse_args()))

    norm = build_norm({"type": cfg.norm})
    K = Cone(norm, np.array([-0.5, 0.5]))
    gc = GameConfig(norm, (0.0, 1.0, 0.0, 1.0), cfg.eps, cfg.h, cfg.mu, K, K, seed=cfg.seed)
    game = Game(gc)
    mean, se, info = estimate_value(gc, cfg.x0, cfg.episodes, game=game)
    u0 = info["solver_value"]
    print(f"greedy:    mean {mean:.5f} +- {se:.5f}   u(x0) {u0:.5f}   "
          f"|diff|/se {abs(mean - u0) / se:.2f}")

    J, I = np.nonzero(game.interior)
    pick = np.random.default_rng(cfg.seed).choice(len(J), min(100, len(J)), replace=False)
    print(f"DP one-step gap on {len(pick)} nodes: "
          f"{dp_one_step(game, game.solution.u, np.stack([J[pick], I[pick]], 1)):.1e}")

    bad = Game(gc, field_I=-game.solution.u, field_II=game.solution.u)
    m2, se2, _ = estimate_value(gc, cfg.x0, cfg.episodes, game=bad)
    print(f"corrupted: mean {m2:.5f} +- {se2:.5f}")


if __name__ == "__main__":
    main()
