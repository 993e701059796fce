"""Tables behind the command line: sweeps, optimal relaxation, solver runs.

Every number here comes from a library call; this module only arranges and
formats. Floats are written with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algorithms import AlgorithmId
from .config import RunConfig
from .errors import InvalidInputError, NotApplicableError
from .rho_analysis import (
    rho,
    rho_at_infinity,
    rho_at_zero,
    spectral_report,
    theta_star_closed_form,
    theta_star_is_proven,
    theta_star_numeric,
)
from .spectral_model import SpectralModel
from .time_dd_solver import DiscreteProblem, IterationHistory, TrajectoryPair, dd_solve

log = logging.getLogger(__name__)

DIVERGED = "div"
NOT_APPLICABLE = "n/a"


def fmt(value) -> str:
    """Shortest round-trip text of a cell; strings pass through."""
    if isinstance(value, str):
        return value
    if value is None:
        return NOT_APPLICABLE
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return DIVERGED
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


@dataclass(frozen=True)
class CsvTable:
    header: tuple
    rows: tuple
    footer: tuple = field(default_factory=tuple)

    def __post_init__(self):
        width = len(self.header)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise InvalidInputError(f"row {i} has {len(row)} cells, header has {width}")

    def to_text(self) -> str:
        lines = [",".join(self.header)]
        lines += [",".join(fmt(c) for c in row) for row in self.rows]
        lines += [f"# {line}" for line in self.footer]
        return "\n".join(lines) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_text())
        return path

    def column(self, name) -> list:
        j = self.header.index(name)
        return [row[j] for row in self.rows]


def parallel_map(fn, items, jobs):
    items = list(items)
    if jobs and jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _theta_label(theta) -> str:
    return theta if isinstance(theta, str) else fmt(float(theta))


def analyze_table(cfg: RunConfig, jobs: int = 1) -> CsvTable:
    """``rho(d)`` on the log grid for every algorithm and relaxation choice.

    ``theta = opt`` uses each algorithm's numeric minimax relaxation on the
    same grid. Two limit rows close each theta block: ``d = 0`` and ``d = inf``.
    """
    grid = cfg.sweep.grid()
    algs = cfg.algorithms
    params = cfg.params

    def theta_for(alg, theta):
        if theta == "opt":
            return theta_star_numeric(alg, params, grid)[0]
        return float(theta)

    cells = [(theta, alg) for theta in cfg.thetas for alg in algs]

    def compute(cell):
        theta, alg = cell
        th = theta_for(alg, theta)
        p = params.replace(theta=th)
        return th, np.asarray(rho(alg, grid, p), dtype=float), rho_at_zero(alg, p), rho_at_infinity(alg, th)

    results = dict(zip(cells, parallel_map(compute, cells, jobs)))
    rows = []
    for theta in cfg.thetas:
        label = _theta_label(theta)
        for i, d in enumerate(grid):
            rows.append((label, float(d), *[results[(theta, a)][1][i] for a in algs]))
        rows.append((label, 0.0, *[results[(theta, a)][2] for a in algs]))
        rows.append((label, math.inf, *[results[(theta, a)][3] for a in algs]))
    footer = []
    if "opt" in cfg.thetas:
        footer.append("theta=opt uses " + " ".join(f"{a}:{fmt(results[('opt', a)][0])}" for a in algs))
    return CsvTable(("theta", "d", *[a.value for a in algs]), tuple(rows), tuple(footer))


def theta_opt_table(cfg: RunConfig, jobs: int = 1) -> CsvTable:
    """Closed-form and numeric optimal relaxation over the sweep grid."""
    grid = cfg.sweep.grid()
    params = cfg.params

    def compute(alg):
        try:
            closed = theta_star_closed_form(alg, params)
            status = "proven" if theta_star_is_proven(alg, params) else "heuristic"
        except NotApplicableError:
            closed, status = None, NOT_APPLICABLE
        theta_num, rho_star = theta_star_numeric(alg, params, grid)
        gap = None if closed is None else abs(theta_num - closed)
        return (alg.value, closed, theta_num, rho_star, gap, status)

    rows = tuple(parallel_map(compute, cfg.algorithms, jobs))
    header = ("algorithm", "theta_closed_form", "theta_numeric", "rho_minimax", "discrepancy", "closed_form_status")
    return CsvTable(header, rows)


@dataclass(frozen=True)
class SolveResult:
    algorithm: AlgorithmId
    pair: TrajectoryPair
    history: IterationHistory
    predicted: float


def build_problem(cfg: RunConfig, model: SpectralModel) -> DiscreteProblem:
    s = cfg.solver
    n = model.n
    y0 = None
    yhat = None
    if not s.error_equations:
        if s.initial_state == "mode1":
            y0 = np.asarray(model.eigenvectors[:, 0], dtype=float)
            y0 = y0 * np.sign(y0.sum() or 1.0)
        elif s.initial_state == "ones":
            y0 = np.ones(n)
        else:
            y0 = np.zeros(n)
        yhat = np.ones(n) if s.target == "ones" else np.zeros(n)
    return DiscreteProblem.create(model, cfg.params, s.nt, s.scheme, y0=y0, yhat=yhat,
                                  error_equations=s.error_equations)


def initial_guess(cfg: RunConfig, n: int, seed: int, alg: AlgorithmId) -> np.ndarray:
    if cfg.solver.initial_guess == "zero":
        return np.zeros(n)
    # one stream per algorithm keeps results independent of execution order
    rng = np.random.default_rng([seed, list(AlgorithmId).index(alg)])
    return rng.standard_normal(n)


def run_solves(cfg: RunConfig, model: SpectralModel, seed: int = 0, jobs: int = 1) -> list[SolveResult]:
    problem = build_problem(cfg, model)
    d = model.eigenvalues

    def compute(alg):
        f0 = initial_guess(cfg, model.n, seed, alg)
        if cfg.solver.error_equations and not np.any(f0):
            log.warning("%s: error equations with a zero initial guess converge trivially", alg)
        pair, hist = dd_solve(problem, alg, problem.params.theta, f0=f0, k_max=cfg.solver.k_max,
                              tol=cfg.solver.tol)
        predicted = spectral_report(alg, problem.params, d).spectral_max
        return SolveResult(alg, pair, hist, predicted)

    return parallel_map(compute, cfg.algorithms, jobs)


def iteration_table(result: SolveResult) -> CsvTable:
    h = result.history
    rows = []
    for k, res in enumerate(h.residual_norms, start=1):
        err = h.error_norms[k - 1] if k - 1 < len(h.error_norms) else None
        rows.append((k, res if math.isfinite(res) else DIVERGED,
                     DIVERGED if err is not None and not math.isfinite(err) else err))
    footer = (
        f"algorithm={result.algorithm.value}",
        f"theta={fmt(h.theta)}",
        f"status={h.status}",
        f"iterations={h.iterations}",
        f"observed_rate={fmt(h.observed_rate)}",
        f"predicted_spectral_max={fmt(result.predicted)}",
    )
    return CsvTable(("k", "residual", "error_l2"), tuple(rows), footer)


def trajectory_table(pair: TrajectoryPair) -> CsvTable:
    n = pair.y.shape[1]
    header = ("t", *[f"y{i + 1}" for i in range(n)], *[f"lambda{i + 1}" for i in range(n)])
    rows = tuple((float(t), *pair.y[j], *pair.lam[j]) for j, t in enumerate(pair.t))
    return CsvTable(header, rows)


def summary_table(results) -> CsvTable:
    rows = []
    for r in results:
        h = r.history
        rows.append((r.algorithm.value, h.status, h.iterations, h.observed_rate, r.predicted,
                     h.residual_norms[-1], h.error_norms[-1] if h.error_norms else None))
    header = ("algorithm", "status", "iterations", "observed_rate", "predicted_spectral_max",
              "final_residual", "final_error_l2")
    return CsvTable(header, tuple(rows))


def gnuplot_script(kind: str, csv_name: str, columns, png_name: str, logy: bool = False,
                   xlabel: str = "d", ylabel: str = "rho", xcol: int = 2) -> str:
    """Plot script for the emitted CSV; the matplotlib PNG is the rendered twin."""
    lines = [
        f"# {kind}: regenerate with `gnuplot {Path(png_name).with_suffix('.gp').name}`",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set terminal pngcairo size 900,600",
        f"set output '{Path(png_name).stem}_gnuplot.png'",
        "set logscale x" if xcol == 2 else "unset logscale x",
        "set logscale y" if logy else "unset logscale y",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key outside",
    ]
    plots = [f"'{csv_name}' using {xcol}:{j} every ::1 with lines title '{name}'" for j, name in columns]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def results_markdown(command: str, cfg: RunConfig, sections) -> str:
    p = cfg.params
    out = [
        f"# timedd {command}",
        "",
        f"Parameters: nu={fmt(p.nu)}, gamma={fmt(p.gamma)}, T={fmt(p.T)}, alpha={fmt(p.alpha)}, theta={fmt(p.theta)}",
        f"Algorithms: {', '.join(a.value for a in cfg.algorithms)}",
        f"Spectrum: {cfg.spectrum.source}",
        "",
    ]
    if not p.theta_is_canonical:
        out += ["Note: theta lies outside (0, 1], where the convergence analysis applies.", ""]
    for title, body in sections:
        out += [f"## {title}", "", body, ""]
    return "\n".join(out)


def markdown_table(table: CsvTable, max_rows: int = 40) -> str:
    head = "| " + " | ".join(table.header) + " |"
    sep = "|" + "---|" * len(table.header)
    rows = ["| " + " | ".join(fmt(c) for c in row) + " |" for row in table.rows[:max_rows]]
    if len(table.rows) > max_rows:
        rows.append(f"| ... {len(table.rows) - max_rows} more rows in the CSV |" + " |" * (len(table.header) - 1))
    return "\n".join([head, sep, *rows])
