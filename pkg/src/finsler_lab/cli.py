"""Command-line front end: ``finsler-lab <command> --scenario file.json``.

Every command writes deterministic CSV artifacts into the output directory
and exits with 0 when all checks pass, 1 on a verification failure and 2 on
a configuration or I/O error.  Timings go to stdout only, so artifacts are
byte-identical across runs with the same scenario and seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import consistency as cons
from .game import Game, GameConfig, dp_one_step, estimate_value, write_episode_csv
from .grid import (ConfigurationError, IterationLimitError, build, convergence_study, fmt,
                   solve_dirichlet, write_field_csv, write_trace_csv)
from .norms import validate_norm
from .regularize import regularization_report, regularize
from .scenario import ScenarioError, build_field, build_norm, load_scenario
from .verify import (comparison_tolerance, cone_comparison_check, eigenvalue_estimate,
                     make_cone_probes, write_probe_csv)

COMMANDS = ("norm-info", "regularize", "solve", "consistency", "verify-cones", "eigen",
            "convergence", "simulate")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def write_table(path, header, rows) -> None:
    """CSV with shortest round-trip floats."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")


def write_quantities(path, items) -> None:
    write_table(path, ("quantity", "value"), list(items))


# ---------------------------------------------------------------------------
# commands; each returns True when every check passed


def cmd_norm_info(sc, norm, out, seed, threads):
    block = sc.get("norm_info", {})
    rep = validate_norm(norm, samples=block.get("samples", 1000), seed=seed)
    write_quantities(out / "norm_info.csv", [
        ("homogeneity", rep.homogeneity), ("triangle", rep.triangle),
        ("positivity_min", rep.positivity_min), ("delta_in", rep.delta_in),
        ("delta_out", rep.delta_out), ("delta", rep.delta),
        ("duality_roundtrip", rep.duality_roundtrip), ("polytope", norm.is_polytope),
        ("pass", rep.ok()),
    ])
    return rep.ok()


def cmd_regularize(sc, norm, out, seed, threads):
    block = sc["regularize"]
    tol = block.get("tol", 1e-6)
    rows, ok = [], True
    for z in block["zetas"]:
        try:
            reg = regularize(norm, z)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        r = regularization_report(reg, samples=block.get("samples", 64), seed=seed)
        passed = r.shift_error <= tol and r.monotone_excess <= 1e-9
        ok &= passed
        rows.append((z, r.shift_error, r.monotone_excess, r.kappa, r.delta_in, r.delta_out,
                     r.interior_ball_defect, passed))
    write_table(out / "regularize.csv",
                ("zeta", "shift_error", "monotone_excess", "kappa", "delta_in", "delta_out",
                 "interior_ball_defect", "pass"), rows)
    return ok


def _problem(block, norm):
    c = build_field(block.get("c", 1.0), norm)
    f = build_field(block["f"], norm)
    G = build_field(block["G"], norm)
    return c, f, G


def cmd_solve(sc, norm, out, seed, threads):
    block = sc["solve"]
    grid, st = build(norm, block["box"], block["h"], block["eps"])
    c, f, G = _problem(block, norm)
    try:
        rep = solve_dirichlet(grid, st, block["mu"], c, f, G, tol=block.get("tol", 1e-10),
                              max_iters=block.get("max_iters", 200_000),
                              sweep=block.get("sweep", "jacobi"), init=block.get("init"),
                              norm=norm)
        converged, u, trace, it, res, init = True, rep.u, rep.trace, rep.iterations, rep.residual, rep.init
        print(f"solve: {rep.iterations} iterations, residual {rep.residual:.3e}, {rep.wall_time:.2f} s")
    except IterationLimitError as exc:
        print(f"solve: {exc}", file=sys.stderr)
        converged, u, trace, it, res, init = False, None, exc.trace, len(exc.trace), exc.trace[-1], "-"
    if u is not None:
        write_field_csv(grid, u, out / "field.csv")
    write_trace_csv(trace, out / "trace.csv")
    write_quantities(out / "solve_report.csv", [
        ("eps", st.eps), ("h", st.h), ("mu", block["mu"]), ("stencil_size", len(st)),
        ("nx", grid.nx), ("ny", grid.ny), ("iterations", it), ("residual", res),
        ("init", init), ("converged", converged),
    ])
    return converged


def cmd_consistency(sc, norm, out, seed, threads):
    block = sc["consistency"]
    eps = tuple(block.get("eps", (0.02, 0.01, 0.005)))
    margin = block.get("margin", -1e-4)
    f = build_field(block["f"], norm)
    try:
        reports = [cons.consistency_probe(norm, f, block["x0"], eps)]
    except NotImplementedError as exc:
        raise ConfigurationError(f"consistency needs a smooth field: {exc}") from None
    reports += cons.random_quadratic_probes(norm, block.get("random_probes", 0), seed, eps)
    rows, ok = [], True
    for k, r in enumerate(reports):
        passed = r.margin >= margin
        ok &= passed
        rows.append((k, r.values[-1], r.limit, r.lower, r.upper, r.margin, margin, passed))
    write_table(out / "consistency.csv",
                ("id", "value", "limit", "lower", "upper", "margin", "threshold", "pass"), rows)
    return ok


def _solve_for_verify(sc, norm):
    if "solve" not in sc:
        raise ConfigurationError("verify-cones needs a 'solve' block to produce the field")
    block = sc["solve"]
    grid, st = build(norm, block["box"], block["h"], block["eps"])
    c, f, G = _problem(block, norm)
    rep = solve_dirichlet(grid, st, block["mu"], c, f, G, tol=block.get("tol", 1e-10),
                          max_iters=block.get("max_iters", 200_000),
                          sweep=block.get("sweep", "jacobi"), init=block.get("init"), norm=norm,
                          keep_trace=False)
    return grid, st, rep.u


def cmd_verify_cones(sc, norm, out, seed, threads):
    block = sc.get("verify", {})
    grid, st, u = _solve_for_verify(sc, norm)
    domain = tuple(block.get("domain", (grid.xmin, grid.xmax, grid.ymin, grid.ymax)))
    probes = make_cone_probes(block.get("probes", 50), seed, domain,
                              margin=block.get("margin", 0.25))
    tol = comparison_tolerance(st.eps, st.h, block.get("C", 5.0))
    res = cone_comparison_check(grid, u, norm, probes, tol, st, threads=threads)
    write_probe_csv(res, out / "probes.csv", "delta")
    n_fail = sum(not r.passed for r in res)
    print(f"verify-cones: {len(res) - n_fail}/{len(res)} probes pass (tol {tol:.3g})")
    return n_fail == 0


def cmd_eigen(sc, norm, out, seed, threads):
    block = sc.get("eigen", {})
    box = block.get("box", (0.0, 1.0, 0.0, 1.0))
    h = block.get("h", 1 / 64)
    rep = eigenvalue_estimate(norm, box, h, seed=seed)
    ok = rep.admissible
    items = [("Lambda", rep.Lambda), ("max_rho", rep.max_rho), ("argmax_x", rep.argmax[0]),
             ("argmax_y", rep.argmax[1]), ("lipschitz", rep.lipschitz),
             ("boundary_max", rep.boundary_max), ("admissible", rep.admissible)]
    if "expected" in block:
        within = abs(rep.Lambda - block["expected"]) <= 2 * h
        items.append(("within_2h_of_expected", within))
        ok &= within
    items.append(("pass", ok))
    write_quantities(out / "eigen.csv", items)
    return ok


def cmd_convergence(sc, norm, out, seed, threads):
    block = sc["convergence"]
    max_ratio = block.get("max_ratio", 0.7)
    rows = convergence_study(norm, [tuple(r) for r in block["ladder"]],
                             box=tuple(block.get("box", (0.0, 1.0, 0.0, 1.0))),
                             v=tuple(block.get("v", (-0.5, 0.5))), mu=block.get("mu", 1.0),
                             tol=block.get("tol", 1e-10))
    ok = all(not (r["ratio"] > max_ratio) for r in rows[1:]) and all(
        math.isfinite(r["ratio"]) or r["error"] == 0 for r in rows[1:])
    write_table(out / "convergence.csv", ("eps", "h", "error", "ratio", "iterations", "pass"),
                [(r["eps"], r["h"], r["error"], r["ratio"], r["iterations"],
                  k == 0 or r["ratio"] <= max_ratio) for k, r in enumerate(rows)])
    for r in rows:
        print(f"convergence: eps={r['eps']} h={r['h']} error={r['error']:.3e} "
              f"ratio={r['ratio']:.3f} ({r['seconds']:.1f} s)")
    return ok


def cmd_simulate(sc, norm, out, seed, threads):
    block = sc["simulate"]
    c, f, G = _problem(block, norm)
    try:
        cfg = GameConfig(norm, tuple(block["box"]), block["eps"], block["h"], block["mu"], f, G, c,
                         strategy=block.get("strategy", "greedy"), cap=block.get("cap", 100_000),
                         seed=seed)
        game = Game(cfg)
        mean, se, info = estimate_value(cfg, block["x0"], block.get("episodes", 10_000), game=game)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    items = [("mean", mean), ("stderr", se), ("truncated_fraction", info["truncated_fraction"])]
    ok = True
    if "solver_value" in info:
        u0 = info["solver_value"]
        agree = abs(mean - u0) <= 3 * se or abs(mean - u0) <= 1e-12
        rng = np.random.default_rng(seed)
        J, I = np.nonzero(game.interior)
        pick = rng.choice(len(J), min(100, len(J)), replace=False)
        gap = dp_one_step(game, game.solution.u, np.c_[J[pick], I[pick]])
        items += [("solver_value", u0), ("agree_3se", agree), ("dp_gap", gap),
                  ("dp_ok", gap <= 1e-12)]
        ok = agree and gap <= 1e-12
    items.append(("pass", ok))
    write_quantities(out / "simulate.csv", items)
    if block.get("log_episodes", 0) > 0:
        write_episode_csv(game, block["x0"], block["log_episodes"], out / "episodes.csv", seed)
    return ok


HANDLERS = {
    "norm-info": cmd_norm_info,
    "regularize": cmd_regularize,
    "solve": cmd_solve,
    "consistency": cmd_consistency,
    "verify-cones": cmd_verify_cones,
    "eigen": cmd_eigen,
    "convergence": cmd_convergence,
    "simulate": cmd_simulate,
}

BLOCKS = {
    "regularize": "regularize",
    "solve": "solve",
    "consistency": "consistency",
    "convergence": "convergence",
    "simulate": "simulate",
}


# ---------------------------------------------------------------------------
# entry point


def resolve_threads(cli_value) -> int:
    """``FINSLER_LAB_THREADS`` wins over ``--threads``; default 1."""
    env = os.environ.get("FINSLER_LAB_THREADS")
    raw = env if env not in (None, "") else cli_value
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"thread count must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigurationError("thread count must be at least 1")
    return n


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finsler-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output directory (default: scenario 'output' or ./out)")
        p.add_argument("--seed", type=int, default=None, help="seed (overrides the scenario)")
        p.add_argument("--threads", default=None, help="worker threads")
    return parser


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
        if sc.get("command", args.command) != args.command:
            raise ScenarioError(f"{args.scenario}: scenario is for {sc['command']!r}, "
                                f"not {args.command!r}")
        block = BLOCKS.get(args.command)
        if block is not None and block not in sc:
            raise ScenarioError(f"{args.scenario}: missing '{block}' block for {args.command}")
        seed = args.seed if args.seed is not None else sc.get("seed", 0)
        if not 0 <= seed < 2 ** 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        threads = resolve_threads(args.threads)
        norm = build_norm(sc["norm"])
        out = Path(args.out or sc.get("output", "out"))
        out.mkdir(parents=True, exist_ok=True)
        ok = HANDLERS[args.command](sc, norm, out, seed, threads)
    except (ScenarioError, ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IterationLimitError as exc:
        print(f"{args.command}: FAIL ({exc})", file=sys.stderr)
        return EXIT_FAIL
    status = "pass" if ok else "FAIL"
    print(f"{args.command}: {status}")
    return EXIT_OK if ok else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
