"""
Command line entry point::

    koitervi <command> --config <path> [--out <dir>]

Commands: solve-membrane, solve-koiter, sweep, korn, probe, geometry-check.
Each writes ``<out>/<command>.json`` (keys ``command, config_echo, results,
diagnostics``); ``sweep`` and ``probe`` also write CSV tables. Failures print
one line ``error[<category>]: <message>`` on stderr and exit with status 1
(2 for usage and configuration errors).
"""

import argparse
import logging
import os
import sys

import numpy as np

from .asymptotics import (KoiterProblem, epsilon_sweep, korn_constant,
                          solve_membrane_limit, write_sweep_csv)
from .config import config_summary, load_config
from .errors import ConfigError, KoiterviError
from .fem import build_mesh, write_matrix_coo, write_mesh
from .geometry import assert_elliptic, eval_geometry
from .regularity import interior_regularity_probe, write_probe_csv
from .report import fmt_float, write_json

__all__ = ["main", "run_command", "COMMANDS"]

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def _solution_results(sol, qp_label):
    rep = sol.report
    eta1, eta2, eta3 = sol.nodal
    return {
        "energy": rep.objective,
        "active_count": len(rep.active_set),
        "active_set": [int(i) for i in rep.active_set],
        "max_abs_eta": [float(np.max(np.abs(eta1))), float(np.max(np.abs(eta2))),
                        float(np.max(np.abs(eta3)))],
        "min_eta3_plus_gap": sol.feasibility,
        "space": qp_label,
    }, {
        "iterations": rep.iterations,
        "kkt_residual": rep.kkt_residual,
        "complementarity": rep.complementarity,
    }


def _write_solution_csv(sol, path):
    mesh = sol.dofmap.mesh
    eta1, eta2, eta3 = sol.nodal
    with open(path, "w") as fh:
        fh.write("node,y1,y2,eta1,eta2,eta3\n")
        for k, (y1, y2) in enumerate(mesh.nodes):
            fh.write(f"{k},{fmt_float(y1)},{fmt_float(y2)},{fmt_float(eta1[k])},"
                     f"{fmt_float(eta2[k])},{fmt_float(eta3[k])}\n")


def _export(cfg, sol, out, name):
    if cfg.export_mesh:
        write_mesh(sol.dofmap.mesh, os.path.join(out, "mesh"))
        write_matrix_coo(sol.qp.A, os.path.join(out, f"{name}_matrix.txt"))


def cmd_solve_membrane(cfg, out):
    mesh = build_mesh(cfg.chart, cfg.nx, cfg.ny)
    sol = solve_membrane_limit(cfg.chart, mesh, cfg.lame, cfg.gap, cfg.loads,
                               cfg.tol, cfg.max_iter)
    _write_solution_csv(sol, os.path.join(out, "solve-membrane_solution.csv"))
    _export(cfg, sol, out, "membrane")
    return _solution_results(sol, "membrane")


def cmd_solve_koiter(cfg, out):
    mesh = build_mesh(cfg.chart, cfg.nx, cfg.ny)
    sol = KoiterProblem(cfg.chart, mesh, cfg.lame, cfg.gap, cfg.loads).solve(
        cfg.eps, cfg.tol, cfg.max_iter)
    results, diag = _solution_results(sol, "koiter")
    results["eps"] = cfg.eps
    # the solved system has the thickness factor divided out
    results["energy_unscaled"] = cfg.eps * sol.report.objective
    _write_solution_csv(sol, os.path.join(out, "solve-koiter_solution.csv"))
    _export(cfg, sol, out, "koiter")
    return results, diag


def cmd_sweep(cfg, out):
    mesh = build_mesh(cfg.chart, cfg.nx, cfg.ny)
    rep = epsilon_sweep(cfg.chart, mesh, cfg.lame, cfg.gap, cfg.loads, cfg.eps_list,
                        cfg.tol, cfg.max_iter)
    write_sweep_csv(rep, os.path.join(out, "sweep.csv"))
    err = rep.err_vm
    results = {
        "epsilons": list(rep.epsilons),
        "err_vm": err,
        "ratio_last_first": err[-1] / err[0] if err[0] > 0 else 0.0,
        "nonincreasing": bool(all(b <= a for a, b in zip(err, err[1:]))),
        "iterations": rep.iterations,
        "active_counts": rep.active_counts,
        "membrane_active_count": len(rep.membrane.report.active_set),
    }
    diag = {
        "min_eta3_plus_gap": min([rep.membrane.feasibility] + [s.feasibility for s in rep.solves]),
        "max_kkt_residual": max([rep.membrane.report.kkt_residual]
                                + [s.report.kkt_residual for s in rep.solves]),
        "max_complementarity": max([rep.membrane.report.complementarity]
                                   + [s.report.complementarity for s in rep.solves]),
    }
    return results, diag


def cmd_korn(cfg, out):
    mesh = build_mesh(cfg.chart, cfg.nx, cfg.ny)
    res = korn_constant(cfg.chart, mesh, cfg.lame, rng_seed=cfg.seed)
    return ({"lambda_min": res.lambda_min, "c0_estimate": res.c0_estimate},
            {"iterations": res.iterations})


def cmd_probe(cfg, out):
    mesh = build_mesh(cfg.chart, cfg.nx, cfg.ny)
    sol = solve_membrane_limit(cfg.chart, mesh, cfg.lame, cfg.gap, cfg.loads,
                               cfg.tol, cfg.max_iter)
    table = interior_regularity_probe(sol, (cfg.probe_center, cfg.probe_halfwidth),
                                      levels=cfg.probe_levels)
    write_probe_csv(table, os.path.join(out, "probe.csv"))
    return ({"ratio_rho1": table.ratios[1], "ratio_rho2": table.ratios[2],
             "rows": [list(r) for r in table.rows]},
            {"active_count": len(sol.report.active_set),
             "kkt_residual": sol.report.kkt_residual})


def cmd_geometry_check(cfg, out):
    chart = cfg.chart
    k0 = assert_elliptic(chart, cfg.geometry_samples)
    t = np.linspace(-chart.c, chart.c, cfg.geometry_samples)
    Y = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    g = eval_geometry(chart, Y)
    eye = np.eye(2)
    return ({"K0": k0, "K_max": float(np.max(g.gauss_K))},
            {"inverse_error": float(np.max(np.abs(g.a_con_form @ g.a_cov_form - eye))),
             "normal_length_error": float(np.max(np.abs(np.linalg.norm(g.a3, axis=-1) - 1))),
             "normal_tangent_error": float(np.max(np.abs(
                 np.einsum("...ai,...i->...a", g.a_cov, g.a3))))})


COMMANDS = {
    "solve-membrane": cmd_solve_membrane,
    "solve-koiter": cmd_solve_koiter,
    "sweep": cmd_sweep,
    "korn": cmd_korn,
    "probe": cmd_probe,
    "geometry-check": cmd_geometry_check,
}


def run_command(command, cfg, out_dir=None):
    """Run one command and write its report; returns the report dict."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    results, diag = COMMANDS[command](cfg, out)
    report = {"command": command, "config_echo": config_summary(cfg),
              "results": results, "diagnostics": diag}
    write_json(report, os.path.join(out, f"{command}.json"))
    return report


def _setup_logging():
    name = os.environ.get("KOITERVI_LOG", "error").strip().lower()
    level = LOG_LEVELS.get(name, logging.ERROR)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    if name not in LOG_LEVELS:
        logging.getLogger("koitervi").error(
            "KOITERVI_LOG=%r not recognised, using 'error'", name)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="koitervi",
        description="Obstacle problems for elliptic membrane shells.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to the run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    args = parser.parse_args(argv)
    _setup_logging()
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error[config]: {p}", file=sys.stderr)
        return 2
    try:
        run_command(args.command, cfg, args.out)
    except KoiterviError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
