"""Touching and flatness of conical test functions over regularized polytope norms."""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from finsler_lab.cones import MollifiedGraph, conical_test_fn, mollified_graph, touching_check
from finsler_lab.regularize import regularize
from finsler_lab.scenario import build_norm


@dataclass
class Config:
    zeta: float = 0.3
    nus: tuple = (0.3, 0.15)
    samples: int = 10_000
    mollifier: float = 0.05
    seed: int = 0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--bases", nargs="*", default=["l1", "hexagon"])
    ap.add_argument("--zeta", type=float, default=Config.zeta)
    ap.add_argument("--samples", type=int, default=Config.samples)
    a = ap.parse_args()
    cfg = Config(zeta=a.zeta, samples=a.samples)

    rng = np.random.default_rng(cfg.seed)
    for base in a.bases:
        reg = regularize(build_norm({"type": base}), cfg.zeta)
        for nu in cfg.nus:
            t = rng.uniform(0, 2 * np.pi)
            p = np.array([np.cos(t), np.sin(t)])
            rep = touching_check(reg, p, nu, samples=cfg.samples, seed=cfg.seed, zeta=cfg.zeta)
            print(f"{base:8s} nu={nu:<5g} min gap {rep.min_gap:+.2e}  ray error "
                  f"{rep.ray_error:.2e}  strict margin {rep.strict_margin:.4f}")
        # flatness on an edge-exposing direction of the base
        F = reg.base.polytope
        edge = F.vertices[1] - F.vertices[0]
        p = np.array([edge[1], -edge[0]])
        cone = conical_test_fn(reg, p, cfg.zeta)
        G = cone.Gp.vertices
        mid = 0.5 * (G[0] + G[-1])
        dev = abs(float(mollified_graph(MollifiedGraph(cone, cfg.mollifier), mid[None])[0]) - cone.c)
        print(f"{base:8s} flatness |g - c| at face midpoint {dev:.1e}")


if __name__ == "__main__":
    main()
