"""First Finsler ∞-eigenvalue of a box from the boundary distance, for several norms."""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from finsler_lab.grid import fmt
from finsler_lab.scenario import build_norm
from finsler_lab.verify import eigenvalue_estimate


@dataclass
class Config:
    norms: tuple = ("euclidean", "linf", "l1", "hexagon")
    box: tuple = (0.0, 1.0, 0.0, 1.0)
    h: float = 1 / 256
    out: Path = Path("results/eigen.csv")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--norms", nargs="*", default=list(Config.norms))
    ap.add_argument("--h", type=float, default=Config.h)
    ap.add_argument("--out", type=Path, default=Config.out)
    a = ap.parse_args()
    cfg = Config(tuple(a.norms), h=a.h, out=a.out)

    cfg.out.parent.mkdir(parents=True, exist_ok=True)
    with open(cfg.out, "w") as fh:
        fh.write("norm,h,Lambda,x,y,admissible\n")
        for name in cfg.norms:
            rep = eigenvalue_estimate(build_norm({"type": name}), cfg.box, cfg.h)
            fh.write(f"{name},{fmt(cfg.h)},{fmt(rep.Lambda)},{fmt(rep.argmax[0])},"
                     f"{fmt(rep.argmax[1])},{fmt(rep.admissible)}\n")
            print(f"{name:10s} Lambda={rep.Lambda:.6f} at {rep.argmax} admissible={rep.admissible}")


if __name__ == "__main__":
    main()
