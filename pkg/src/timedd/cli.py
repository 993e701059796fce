"""Command line entry point: ``timedd {analyze,theta-opt,solve,verify}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import figures, reports
from .config import RunConfig, load_config
from .errors import ConfigError, MatrixFileError, SymmetryError, TimeDDError
from .rho_analysis import rho
from .time_dd_solver import DiscreteProblem
from .verification import check_expected_behaviour, run_library_checks

log = logging.getLogger("timedd")

LOG_LEVELS = {"error": logging.ERROR, "warning": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def configure_logging(env=None):
    env = os.environ if env is None else env
    name = env.get("TDD_LOG", "warning").strip().lower()
    level = LOG_LEVELS.get(name)
    logging.basicConfig(level=level or logging.WARNING, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    if level is None:
        log.warning("TDD_LOG=%r not recognised; use one of error, warning, info, debug", name)


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def cmd_analyze(cfg: RunConfig, out: Path, seed: int, jobs: int) -> tuple[int, list]:
    table = reports.analyze_table(cfg, jobs)
    files = [table.write(out / "analyze.csv")]
    cols = [(3 + j, a.value) for j, a in enumerate(cfg.algorithms)]
    files.append(_write(out / "analyze.gp", reports.gnuplot_script("analyze", "analyze.csv", cols, "analyze.png")))
    files.append(figures.plot_rho_curves(table, out / "analyze.png"))
    body = reports.markdown_table(_limit_rows(table))
    files.append(_write(out / "RESULTS.md", reports.results_markdown(
        "analyze", cfg, [("Limits (d = 0 and d = inf rows)", body),
                         ("Files", "analyze.csv, analyze.gp, analyze.png")])))
    return EXIT_OK, files


def _limit_rows(table):
    rows = tuple(r for r in table.rows if float(r[1]) == 0.0 or np.isinf(float(r[1])))
    return reports.CsvTable(table.header, rows)


def cmd_theta_opt(cfg: RunConfig, out: Path, seed: int, jobs: int) -> tuple[int, list]:
    table = reports.theta_opt_table(cfg, jobs)
    files = [table.write(out / "theta_opt.csv")]
    grid = cfg.sweep.grid()
    curves = {}
    for row in table.rows:
        alg, theta = row[0], row[2]
        curves[alg] = np.asarray(rho(alg, grid, cfg.params.replace(theta=theta)), dtype=float)
    curve_table = reports.CsvTable(("theta", "d", *curves), tuple(
        ("opt", float(d), *[curves[a][i] for a in curves]) for i, d in enumerate(grid)))
    files.append(curve_table.write(out / "theta_opt_curves.csv"))
    cols = [(3 + j, a) for j, a in enumerate(curves)]
    files.append(_write(out / "theta_opt.gp", reports.gnuplot_script(
        "theta-opt", "theta_opt_curves.csv", cols, "theta_opt.png", ylabel="rho at optimal theta")))
    files.append(figures.plot_theta_opt(table, grid, curves, out / "theta_opt.png"))
    files.append(_write(out / "RESULTS.md", reports.results_markdown(
        "theta-opt", cfg, [("Optimal relaxation", reports.markdown_table(table)),
                           ("Notes", "Closed forms are proven optimal for gamma = 0; for gamma > 0 they are "
                                     "marked heuristic and the numeric minimax value is authoritative.")])))
    return EXIT_OK, files


def cmd_solve(cfg: RunConfig, out: Path, seed: int, jobs: int) -> tuple[int, list]:
    model = cfg.spectrum.build()
    results = reports.run_solves(cfg, model, seed, jobs)
    files = []
    cols = []
    for r in results:
        name = f"solve_{r.algorithm.value}"
        files.append(reports.iteration_table(r).write(out / f"{name}_iterations.csv"))
        files.append(reports.trajectory_table(r.pair).write(out / f"{name}_trajectory.csv"))
        cols.append(f"'{name}_iterations.csv' using 1:2 with linespoints title '{r.algorithm.value}'")
    summary = reports.summary_table(results)
    files.append(summary.write(out / "solve_summary.csv"))
    gp = "\n".join([
        "set datafile separator ','", "set datafile commentschars '#'", "set terminal pngcairo size 900,600",
        "set output 'solve_residuals_gnuplot.png'", "set logscale y", "set xlabel 'iteration'",
        "set ylabel 'interface residual'", "plot " + ", \\\n     ".join(cols)]) + "\n"
    files.append(_write(out / "solve.gp", gp))
    files.append(figures.plot_residuals(results, out / "solve_residuals.png"))
    files.append(_write(out / "RESULTS.md", reports.results_markdown(
        "solve", cfg, [("Summary", reports.markdown_table(summary)),
                       ("Grid", f"nt={cfg.solver.nt}, scheme={cfg.solver.scheme}, "
                                f"error equations={cfg.solver.error_equations}, seed={seed}")])))
    return EXIT_OK, files


def cmd_verify(cfg: RunConfig, out: Path, seed: int, jobs: int) -> tuple[int, list]:
    checks = run_library_checks()
    model = cfg.spectrum.build()
    s = cfg.solver
    problem = DiscreteProblem.create(model, cfg.params, s.nt, s.scheme, error_equations=True)
    rng = np.random.default_rng(seed)
    f0 = rng.standard_normal(model.n)
    checks += reports.parallel_map(lambda alg: check_expected_behaviour(problem, alg, f0, s.k_max, s.tol),
                           cfg.algorithms, jobs)
    lines = [c.line() for c in checks]
    passed = all(c.passed for c in checks)
    lines.append(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
    for line in lines:
        print(line)
    files = [_write(out / "verify.txt", "\n".join(lines) + "\n")]
    files.append(_write(out / "RESULTS.md", reports.results_markdown(
        "verify", cfg, [("Checks", "\n".join(f"- {line}" for line in lines))])))
    return (EXIT_OK if passed else EXIT_FAIL), files


COMMANDS = {"analyze": cmd_analyze, "theta-opt": cmd_theta_opt, "solve": cmd_solve, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timedd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analyze": "convergence factors on a log-spaced eigenvalue grid",
        "theta-opt": "closed-form and numeric optimal relaxation parameters",
        "solve": "run the discrete two-subdomain iteration",
        "verify": "run the self-checks and the configured divergence/convergence checks",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=True, type=Path, help="INI run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default ./out)")
        p.add_argument("--seed", type=int, default=0, help="seed for random initial guesses (default 0)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker threads (default: all cores)")
    return parser


def main(argv=None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc.field or 'config'}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        code, files = COMMANDS[args.command](cfg, args.out, args.seed, args.jobs)
    except (MatrixFileError, SymmetryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TimeDDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for f in files:
        log.info("wrote %s", f)
    return code


if __name__ == "__main__":
    sys.exit(main())
