"""Sup-error of the grid solver against an exact cone along an (ε, h) ladder.

    python3 scripts/convergence.py --norm euclidean --ladder 0.2:0.01 0.1:0.005 0.05:0.0025

The default ladder keeps ε/h fixed, which holds the lattice part of the
error constant; pass ``--h-power 2`` to use h = ε²/2 instead.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from pathlib import Path

from finsler_lab.grid import convergence_study, fmt
from finsler_lab.scenario import build_norm


@dataclass
class Config:
    norm: str = "euclidean"
    ladder: list = field(default_factory=lambda: [(0.2, 0.01), (0.1, 0.005), (0.05, 0.0025)])
    v: tuple = (-0.5, 0.5)
    mu: float = 1.0
    tol: float = 1e-10
    sweep: str = "jacobi"
    out: Path = Path("results/convergence.csv")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--norm", default=Config.norm)
    ap.add_argument("--ladder", nargs="*", default=None, help="eps:h pairs")
    ap.add_argument("--h-power", type=float, default=None,
                    help="use h = eps**power / 2 for eps in --eps")
    ap.add_argument("--eps", nargs="*", type=float, default=[0.2, 0.1, 0.05])
    ap.add_argument("--sweep", default=Config.sweep, choices=["jacobi", "gauss_seidel"])
    ap.add_argument("--out", type=Path, default=Config.out)
    a = ap.parse_args()

    cfg = Config(norm=a.norm, sweep=a.sweep, out=a.out)
    if a.ladder:
        cfg.ladder = [tuple(float(t) for t in s.split(":")) for s in a.ladder]
    elif a.h_power is not None:
        # h must divide the unit box: round 1/h to an integer
        cfg.ladder = [(e, 1.0 / round(2.0 / e ** a.h_power)) for e in a.eps]

    rows = convergence_study(build_norm({"type": cfg.norm}), cfg.ladder, v=cfg.v, mu=cfg.mu,
                             tol=cfg.tol, sweep=cfg.sweep)
    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w") as fh:
        fh.write("eps,h,error,ratio,iterations\n")
        for r in rows:
            fh.write(",".join(fmt(r[k]) for k in ("eps", "h", "error", "ratio", "iterations")) + "\n")
    for r in rows:
        print(f"eps={r['eps']:<7g} h={r['h']:<9.5g} error={r['error']:.3e} "
              f"ratio={r['ratio']:.3f} iters={r['iterations']} ({r['seconds']:.1f} s)")


if __name__ == "__main__":
    main()
