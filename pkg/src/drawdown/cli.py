"""Command-line front end.

Subcommands: solve, boundaries, policy, simulate, verify, sweep-alpha.
Configuration is a flat key-value file with section-qualified keys
(``model.mu = 0.06``, ``grid.n_s = 1200``, ``sim.n_paths = 100000``,
``output_dir = out``).  The ``DRAWDOWN_OUT`` environment variable or
``--out`` overrides the output directory (the flag wins).

Exit codes: 0 success, 1 validation failure, 2 solver failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .boundary import boundaries_to_csv, compute_boundaries
from .config import parse_kv_file, section
from .dual_solver import solve_v
from .errors import ConfigError, CrossCheckFailed, DrawdownError, ParamError
from .lattice import GridConfig, build_lattice
from .model import validate_params
from .primal import dual_to_primal, policy_to_csv
from .simulate import (SimConfig, default_challengers, run_challengers,
                       simresult_to_csv, simulate_policy)
from .verify import format_report, run_verification


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drawdown",
        description="Consumption-investment solver under a drawdown constraint.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
            ("solve", "solve the dual problem and dump v and the regime labels"),
            ("boundaries", "extract the free boundaries (tau, S, Z, phi) to CSV"),
            ("policy", "emit the threshold and feedback-policy CSV tables"),
            ("simulate", "Monte Carlo run of the synthesized policy and challengers"),
            ("verify", "run the full invariant suite and write a margin report"),
            ("sweep-alpha", "repeat boundaries/policy across a list of alpha values")):
        cmd = sub.add_parser(name, help=doc)
        cmd.add_argument("--config", required=True, help="flat key-value config file")
        cmd.add_argument("--out", default=None, help="output directory override")
        if name == "sweep-alpha":
            cmd.add_argument("--alpha-list", default=None,
                             help="comma-separated alpha values, e.g. 0.3,0.6")
    return parser


def _load(config_path: str):
    kv = parse_kv_file(config_path)
    params = validate_params(section(kv, "model") or kv)
    grid = GridConfig.from_mapping(section(kv, "grid"))
    return kv, params, grid


def _out_dir(args, kv: dict) -> str:
    out = args.out or os.environ.get("DRAWDOWN_OUT") or kv.get("output_dir", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _sim_config(kv: dict) -> SimConfig:
    sec = section(kv, "sim")
    kwargs = {}
    for key, cast in (("n_paths", int), ("dt", float), ("seed", int),
                      ("x0", float), ("z0", float), ("t0", float)):
        if key in sec:
            kwargs[key] = cast(sec[key])
    if "antithetic" in sec:
        kwargs["antithetic"] = sec["antithetic"].lower() in ("1", "true", "yes")
    if "record_paths" in sec:
        kwargs["record_paths"] = sec["record_paths"].lower() in ("1", "true", "yes")
    return SimConfig(**kwargs)


def _solve_pipeline(params, grid):
    lattice = build_lattice(params, grid)
    sol = solve_v(params, lattice)
    return lattice, sol


def _cmd_solve(args, kv, params, grid) -> int:
    out = _out_dir(args, kv)
    _, sol = _solve_pipeline(params, grid)
    sol.to_csv(os.path.join(out, "dual_solution.csv"))
    sol.to_binary(os.path.join(out, "dual_solution.bin"))
    print(f"wrote dual_solution.csv and dual_solution.bin to {out}")
    return 0


def _cmd_boundaries(args, kv, params, grid) -> int:
    out = _out_dir(args, kv)
    _, sol = _solve_pipeline(params, grid)
    bset = compute_boundaries(sol)
    boundaries_to_csv(bset, os.path.join(out, "boundaries.csv"), params)
    print(f"wrote boundaries.csv to {out}")
    return 0


def _cmd_policy(args, kv, params, grid) -> int:
    out = _out_dir(args, kv)
    _, sol = _solve_pipeline(params, grid)
    bset = compute_boundaries(sol)
    policy = dual_to_primal(sol, bset)
    policy_to_csv(policy, os.path.join(out, "thresholds.csv"),
                  os.path.join(out, "policy.csv"))
    print(f"wrote thresholds.csv and policy.csv to {out}")
    return 0


def _cmd_simulate(args, kv, params, grid) -> int:
    out = _out_dir(args, kv)
    _, sol = _solve_pipeline(params, grid)
    bset = compute_boundaries(sol)
    policy = dual_to_primal(sol, bset)
    cfg = _sim_config(kv)
    result = simulate_policy(policy, cfg)
    simresult_to_csv(result, os.path.join(out, "simulation.csv"), cfg)
    rows = run_challengers(policy, cfg, default_challengers(params))
    with open(os.path.join(out, "challengers.csv"), "w", encoding="utf-8") as fh:
        fh.write(f"# n_paths={cfg.n_paths} dt={cfg.dt:.17g} seed={cfg.seed}"
                 f" x0={cfg.x0:.17g} z0={cfg.z0:.17g} t0={cfg.t0:.17g}\n")
        fh.write("name,mc_mean,std_error,gap_to_value\n")
        for name, mean, sem, gap in rows:
            fh.write(f"{name},{mean:.17g},{sem:.17g},{gap:.17g}\n")
    print(f"wrote simulation.csv and challengers.csv to {out}")
    return 0


def _cmd_verify(args, kv, params, grid) -> int:
    out = _out_dir(args, kv)
    checks = run_verification(params, grid)
    report = format_report(checks)
    with open(os.path.join(out, "verify_report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report + "\n")
    print(report)
    failed = [c for c in checks if c.kind == "hard" and not c.passed]
    if failed:
        print(f"{len(failed)} hard check(s) failed", file=sys.stderr)
        return 3
    return 0


def _cmd_sweep_alpha(args, kv, params, grid) -> int:
    out = _out_dir(args, kv)
    if args.alpha_list:
        alphas = [float(a) for a in args.alpha_list.split(",") if a.strip()]
    else:
        alphas = [float(a) for a in kv.get("alpha_list", "0.3,0.6").split(",")]
    if not alphas:
        raise ConfigError("empty alpha list")
    rows = []
    for alpha in sorted(alphas):
        pa = validate_params({"mu": params.mu, "sigma": params.sigma,
                              "delta": params.delta, "p": params.p,
                              "alpha": alpha, "T": params.T})
        lattice, sol = _solve_pipeline(pa, grid)
        bset = compute_boundaries(sol)
        policy = dual_to_primal(sol, bset)
        tag = f"{alpha:g}".replace(".", "p")
        boundaries_to_csv(bset, os.path.join(out, f"boundaries_alpha_{tag}.csv"), pa)
        policy_to_csv(policy, os.path.join(out, f"thresholds_alpha_{tag}.csv"),
                      os.path.join(out, f"policy_alpha_{tag}.csv"))
        rows.append((alpha, lattice, bset, policy))

    # comparative-statics table on the common tau layers (coarsest count)
    n_layers = min(r[3].omega_star.size for r in rows)
    path = os.path.join(out, "alpha_sweep.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# mu={params.mu:.17g} sigma={params.sigma:.17g}"
                 f" delta={params.delta:.17g} p={params.p:.17g} T={params.T:.17g}"
                 f" alphas={','.join(f'{a:g}' for a in sorted(alphas))}\n")
        header = ["t"]
        for alpha, _, _, _ in rows:
            a = f"{alpha:g}"
            header += [f"S_{a}", f"omega_star_{a}", f"omega_alpha_{a}"]
        fh.write(",".join(header) + "\n")
        t_nodes = rows[0][3].t[:n_layers]
        for k in range(n_layers - 1, -1, -1):
            cells = [f"{t_nodes[k]:.17g}"]
            for _, _, bset, policy in rows:
                cells += [f"{bset.S[k]:.17g}", f"{policy.omega_star[k]:.17g}",
                          f"{policy.omega_alpha[k]:.17g}"]
            fh.write(",".join(cells) + "\n")
    print(f"wrote alpha_sweep.csv and per-alpha tables to {out}")

    # monotonicity report: S decreasing in alpha, omega* / omega_alpha increasing
    ok = True
    for (a_lo, _, b_lo, p_lo), (a_hi, lat_hi, b_hi, p_hi) in zip(rows, rows[1:]):
        ds = lat_hi.ds
        if np.max(b_hi.S[:n_layers] - b_lo.S[:n_layers]) > 2 * ds:
            print(f"S not decreasing from alpha={a_lo:g} to {a_hi:g}", file=sys.stderr)
            ok = False
        slack = 2 * ds * np.abs(p_lo.omega_star[:n_layers]) / params.p
        if np.any(p_hi.omega_star[:n_layers] < p_lo.omega_star[:n_layers] - slack):
            print(f"omega* not increasing from alpha={a_lo:g} to {a_hi:g}", file=sys.stderr)
            ok = False
        if np.any(p_hi.omega_alpha[:n_layers] < p_lo.omega_alpha[:n_layers] - 1e-10):
            print(f"omega_alpha not increasing from alpha={a_lo:g} to {a_hi:g}",
                  file=sys.stderr)
            ok = False
    return 0 if ok else 3


_COMMANDS = {
    "solve": _cmd_solve,
    "boundaries": _cmd_boundaries,
    "policy": _cmd_policy,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "sweep-alpha": _cmd_sweep_alpha,
}


def main(argv: list | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        kv, params, grid = _load(args.config)
    except (ConfigError, ParamError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args, kv, params, grid)
    except (ConfigError, ParamError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except CrossCheckFailed as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return 3
    except DrawdownError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
