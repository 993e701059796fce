"""Fully discrete two-subdomain solver for the coupled optimality system.

The semi-discrete system

    y'   + A y - lam / nu = 0,        y(0) = y0,
    lam' - y   - A lam    = -yhat,    gamma y(T) + lam(T) = gamma yhat(T)

is discretised in time with the trapezoidal rule or implicit Euler. Unknowns
are interleaved node by node, ``x = [y_0, lam_0, y_1, lam_1, ...]``, so every
window of nodes gives a banded matrix. Windows are factored once with LAPACK
``gbtrf`` and reused.

Transmission rows are algebraic: a rate condition at the interface node is
imposed through the right-hand side of the ODE (``y' = lam/nu - A y``,
``lam' = y + A lam - yhat``) instead of a difference quotient.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dgbtrf, dgbtrs

from .algorithms import TRANSMISSION, AlgorithmId, Functional
from .errors import (
    FactorizationError,
    InvalidDimensionError,
    InvalidInputError,
    ParameterError,
    TooFewIterationsError,
)
from .spectral_model import ProblemParams, SpectralModel

log = logging.getLogger(__name__)

SCHEMES = ("trapezoidal", "implicit-euler")
DIVERGENCE_FACTOR = 1e12
INITIAL = "initial"
FINAL = "final"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, T]`` with the interface snapped to node ``m``."""

    nt: int
    T: float
    interface_index: int

    def __post_init__(self):
        if self.nt < 2:
            raise InvalidDimensionError(f"need nt >= 2 time steps, got {self.nt}")
        if not 1 <= self.interface_index <= self.nt - 1:
            raise InvalidDimensionError(
                f"interface index must lie in [1, {self.nt - 1}], got {self.interface_index}")

    @classmethod
    def snapped(cls, nt: int, T: float, alpha: float) -> "TimeGrid":
        if not isinstance(nt, (int, np.integer)) or nt < 2:
            raise InvalidDimensionError(f"need nt >= 2 time steps, got {nt!r}")
        m = min(max(int(round(alpha * nt / T)), 1), nt - 1)
        grid = cls(int(nt), float(T), m)
        if abs(grid.alpha - alpha) > 1e-12 * T:
            log.warning("interface alpha=%r snapped to grid node %d (alpha=%r)", alpha, m, grid.alpha)
        return grid

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def alpha(self) -> float:
        return self.interface_index * self.T / self.nt

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)


@dataclass(frozen=True)
class TrajectoryPair:
    """State and adjoint on consecutive grid nodes; arrays have shape (nodes, n)."""

    y: np.ndarray
    lam: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        if self.y.shape != self.lam.shape or self.y.ndim != 2 or self.y.shape[0] != self.t.size:
            raise InvalidDimensionError(
                f"inconsistent trajectory shapes y{self.y.shape}, lam{self.lam.shape}, t{self.t.shape}")


@dataclass(frozen=True)
class IterationHistory:
    """Record of a decomposition run."""

    algorithm: AlgorithmId
    theta: float
    interface_values: tuple
    residual_norms: tuple
    error_norms: tuple
    status: str
    observed_rate: float | None = None
    per_mode_rates: tuple | None = None

    @property
    def iterations(self) -> int:
        return len(self.residual_norms)


@dataclass(frozen=True)
class DiscreteProblem:
    """Everything needed for a discrete solve.

    Use :meth:`create` to build one from a spectral model; it snaps ``alpha``
    to the grid and fills default data.
    """

    model: SpectralModel
    params: ProblemParams
    grid: TimeGrid
    y0: np.ndarray
    yhat: np.ndarray
    scheme: str = "trapezoidal"
    _cache: dict = field(default_factory=dict, compare=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, compare=False, repr=False)

    def __post_init__(self):
        n = self.model.n
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.y0.shape != (n,):
            raise InvalidDimensionError(f"y0 must have shape ({n},), got {self.y0.shape}")
        if self.yhat.shape != (self.grid.nt + 1, n):
            raise InvalidDimensionError(
                f"yhat must have shape ({self.grid.nt + 1}, {n}), got {self.yhat.shape}")
        if abs(self.grid.T - self.params.T) > 1e-12 * self.params.T:
            raise ParameterError("grid and parameters disagree on T")

    @classmethod
    def create(cls, model: SpectralModel, params: ProblemParams, nt: int, scheme: str = "trapezoidal",
               y0=None, yhat=None, error_equations: bool = False) -> "DiscreteProblem":
        grid = TimeGrid.snapped(nt, params.T, params.alpha)
        n = model.n
        if error_equations:
            y0_arr, yhat_arr = np.zeros(n), np.zeros((nt + 1, n))
        else:
            y0_arr = np.zeros(n) if y0 is None else np.asarray(y0, dtype=float).reshape(-1)
            if yhat is None:
                yhat_arr = np.zeros((nt + 1, n))
            else:
                yhat_arr = np.asarray(yhat, dtype=float)
                if yhat_arr.ndim == 1:
                    yhat_arr = np.tile(yhat_arr, (nt + 1, 1))
        if abs(grid.alpha - params.alpha) > 0:
            params = params.replace(alpha=grid.alpha)
        return cls(model, params, grid, y0_arr, yhat_arr, scheme)

    @property
    def n(self) -> int:
        return self.model.n

    def operator(self, first: int, last: int, left, right) -> "BandedOperator":
        """Factored window operator, cached per window and row types."""
        key = (first, last, left, right)
        with self._lock:
            op = self._cache.get(key)
            if op is None:
                op = BandedOperator(*_assemble(self.model.A, self.params, self.grid.dt, self.scheme,
                                               last - first + 1, left, right))
                self._cache[key] = op
        return op


class BandedOperator:
    """Banded matrix with its LU factors (LAPACK ``dgbtrf``)."""

    def __init__(self, rows, cols, vals, size):
        self.size = size
        self.rows, self.cols, self.vals = rows, cols, vals
        offsets = cols - rows
        self.kl = int(max(0, -offsets.min()))
        self.ku = int(max(0, offsets.max()))
        ab = np.zeros((2 * self.kl + self.ku + 1, size))
        np.add.at(ab, (self.kl + self.ku + rows - cols, cols), vals)
        lu, ipiv, info = dgbtrf(ab, self.kl, self.ku)
        if info > 0:
            raise FactorizationError(f"singular banded system: zero pivot at index {info - 1}",
                                     pivot_index=info - 1)
        if info < 0:
            raise FactorizationError(f"dgbtrf rejected argument {-info}")
        self._lu, self._ipiv = lu, ipiv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x, info = dgbtrs(self._lu, self.kl, self.ku, rhs, self._ipiv)
        if info != 0:
            raise FactorizationError(f"dgbtrs failed with info={info}")
        return x

    def matvec(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.size)
        np.add.at(out, self.rows, self.vals * x[self.cols])
        return out


def _row_blocks(kind, A, params):
    """Coefficient blocks ``(on y, on lam)`` of a boundary or interface row."""
    n = A.shape[0]
    eye, zero = np.eye(n), np.zeros((n, n))
    if kind == INITIAL:
        return eye, zero
    if kind == FINAL:
        return params.gamma * eye, eye
    return {
        Functional.STATE: (eye, zero),
        Functional.ADJOINT: (zero, eye),
        Functional.STATE_RATE: (-A, params.nu_inv * eye),
        Functional.ADJOINT_RATE: (eye, A),
    }[kind]


def _interval_blocks(A, params, dt, scheme):
    """Blocks multiplying ``(y_j, lam_j, y_{j+1}, lam_{j+1})`` in the state and adjoint rows."""
    n = A.shape[0]
    eye, zero = np.eye(n), np.zeros((n, n))
    c = params.nu_inv * dt
    if scheme == "trapezoidal":
        h = 0.5 * dt
        state = (-(eye - h * A), -0.5 * c * eye, eye + h * A, -0.5 * c * eye)
        adj = (-h * eye, -(eye + h * A), -h * eye, eye - h * A)
    else:
        state = (-eye, zero, eye + dt * A, -c * eye)
        adj = (-dt * eye, -(eye + dt * A), zero, eye)
    return state, adj


def _assemble(A, params, dt, scheme, nodes, left, right):
    """COO triplets of a window with ``nodes`` grid nodes."""
    n = A.shape[0]
    size = 2 * n * nodes
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")

    def put(r0, c0, block):
        mask = block != 0
        rows.append((r0 + ii[mask]).ravel())
        cols.append((c0 + jj[mask]).ravel())
        vals.append(block[mask].ravel())

    for r0, node, kind in ((0, 0, left), (size - n, nodes - 1, right)):
        by, bl = _row_blocks(kind, A, params)
        put(r0, 2 * n * node, by)
        put(r0, 2 * n * node + n, bl)
    state, adj = _interval_blocks(A, params, dt, scheme)
    for j in range(nodes - 1):
        base = 2 * n * j
        for blocks, r0 in ((state, n + base), (adj, 2 * n + base)):
            for k, blk in enumerate(blocks):
                put(r0, base + k * n, blk)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), size


def _interval_rhs(problem: DiscreteProblem, first: int, last: int) -> np.ndarray:
    """Right-hand sides of the adjoint rows for intervals ``first .. last-1``."""
    yh = problem.yhat[first:last + 1]
    dt = problem.grid.dt
    if problem.scheme == "trapezoidal":
        return -0.5 * dt * (yh[:-1] + yh[1:])
    return -dt * yh[:-1]


def _boundary_rhs(kind, problem: DiscreteProblem, node: int, value):
    if kind == INITIAL:
        return problem.y0
    if kind == FINAL:
        return problem.params.gamma * problem.yhat[-1]
    if kind is Functional.ADJOINT_RATE:
        return value + problem.yhat[node]
    return value


def _solve_window(problem: DiscreteProblem, first: int, last: int, left, right,
                  left_value=None, right_value=None) -> TrajectoryPair:
    n = problem.n
    nodes = last - first + 1
    op = problem.operator(first, last, left, right)
    rhs = np.zeros((nodes, 2, n))
    rhs[0, 0] = _boundary_rhs(left, problem, first, left_value)
    rhs[1:, 0] = _interval_rhs(problem, first, last)
    b = rhs.reshape(-1).copy()
    b[-n:] = _boundary_rhs(right, problem, last, right_value)
    x = op.solve(b).reshape(nodes, 2, n)
    return TrajectoryPair(x[:, 0].copy(), x[:, 1].copy(), problem.grid.times[first:last + 1])


def functional_at(problem: DiscreteProblem, pair: TrajectoryPair, functional: Functional, index: int):
    """Evaluate a transmission functional at row ``index`` of a trajectory."""
    y, lam = pair.y[index], pair.lam[index]
    A = problem.model.A
    if functional is Functional.STATE:
        return y.copy()
    if functional is Functional.ADJOINT:
        return lam.copy()
    if functional is Functional.STATE_RATE:
        return problem.params.nu_inv * lam - A @ y
    node = int(round(pair.t[index] / problem.grid.dt))
    return y + A @ lam - problem.yhat[node]


def monolithic_solve(problem: DiscreteProblem) -> TrajectoryPair:
    """Direct solve of the whole space-time system."""
    return _solve_window(problem, 0, problem.grid.nt, INITIAL, FINAL)


def subdomain_solve_discrete(problem: DiscreteProblem, side: int, algorithm, interface_data) -> TrajectoryPair:
    """Solve one time window with the algorithm's interface row.

    ``interface_data`` is the datum ``f`` on the side that receives it and
    the coupling value on the other side, exactly as for the modal solver.
    """
    alg = AlgorithmId.parse(algorithm)
    if side not in (1, 2):
        raise InvalidInputError(f"side must be 1 or 2, got {side!r}")
    value = np.asarray(interface_data, dtype=float).reshape(-1)
    if value.shape != (problem.n,):
        raise InvalidDimensionError(f"interface data must have length {problem.n}, got {value.size}")
    tr = TRANSMISSION[alg]
    functional = tr.datum if side == tr.first else tr.coupling
    m, nt = problem.grid.interface_index, problem.grid.nt
    if side == 1:
        return _solve_window(problem, 0, m, INITIAL, functional, right_value=value)
    return _solve_window(problem, m, nt, functional, FINAL, left_value=value)


def _interface_row(side: int, pair: TrajectoryPair) -> int:
    return -1 if side == 1 else 0


def glue(problem: DiscreteProblem, side1: TrajectoryPair, side2: TrajectoryPair) -> TrajectoryPair:
    """Side 1 supplies nodes ``0..m``, side 2 the nodes after the interface."""
    return TrajectoryPair(np.vstack([side1.y, side2.y[1:]]), np.vstack([side1.lam, side2.lam[1:]]),
                          problem.grid.times)


def l2_norm(problem: DiscreteProblem, pair: TrajectoryPair) -> float:
    """Discrete ``L2(0, T)`` norm of ``(y, lam)`` with trapezoidal weights."""
    w = np.full(pair.t.size, problem.grid.dt)
    w[0] = w[-1] = 0.5 * problem.grid.dt
    sq = np.sum(pair.y**2, axis=1) + np.sum(pair.lam**2, axis=1)
    return float(math.sqrt(np.dot(w, sq)))


def l2_difference(problem: DiscreteProblem, a: TrajectoryPair, b: TrajectoryPair) -> float:
    return l2_norm(problem, TrajectoryPair(a.y - b.y, a.lam - b.lam, a.t))


def equation_residual(problem: DiscreteProblem, pair: TrajectoryPair) -> float:
    """Largest residual of the monolithic equations, relative to the data scale."""
    nt, n = problem.grid.nt, problem.n
    op = problem.operator(0, nt, INITIAL, FINAL)
    x = np.stack([pair.y, pair.lam], axis=1).reshape(-1)
    rhs = np.zeros((nt + 1, 2, n))
    rhs[0, 0] = problem.y0
    rhs[1:, 0] = _interval_rhs(problem, 0, nt)
    b = rhs.reshape(-1)
    b[-n:] = problem.params.gamma * problem.yhat[-1]
    r = op.matvec(x) - b
    scale = max(float(np.max(np.abs(b))), float(np.max(np.abs(op.vals))) * float(np.max(np.abs(x))), 1e-300)
    return float(np.max(np.abs(r)) / scale)


def interface_trace(problem: DiscreteProblem, algorithm, pair: TrajectoryPair) -> np.ndarray:
    """Datum ``f`` that a full-horizon trajectory induces at the interface."""
    tr = TRANSMISSION[AlgorithmId.parse(algorithm)]
    return functional_at(problem, pair, tr.datum, problem.grid.interface_index)


def observed_rate(history) -> float:
    """Geometric rate fitted to the tail of the residual norms.

    Uses a least-squares line through ``log r_k`` over the last
    ``max(4, k // 2)`` positive residuals.
    """
    res = np.asarray(history.residual_norms if hasattr(history, "residual_norms") else history, dtype=float)
    k = res.size
    tail = res[-max(4, k // 2):] if k else res
    idx = np.arange(tail.size)
    ok = (tail > 0) & np.isfinite(tail)
    if np.count_nonzero(ok) < 4:
        raise TooFewIterationsError(f"need at least 4 positive residuals, got {np.count_nonzero(ok)}")
    slope = np.polyfit(idx[ok].astype(float), np.log(tail[ok]), 1)[0]
    return float(math.exp(slope))


def _safe_rate(residuals):
    try:
        return observed_rate(residuals)
    except TooFewIterationsError:
        return None


def _check_common(problem, theta, tol, k_max):
    if not tol > 0:
        raise InvalidInputError(f"tol must be > 0, got {tol}")
    if not isinstance(k_max, (int, np.integer)) or k_max <= 0:
        raise InvalidInputError(f"k_max must be a positive integer, got {k_max!r}")
    if not 0 < theta < 2:
        raise ParameterError(f"theta must lie in (0, 2), got {theta}")


def _final_status(converged, diverged, residuals):
    if converged:
        return "converged"
    if diverged:
        return "diverged"
    rate = _safe_rate(residuals)
    return "diverged" if rate is not None and rate > 1.0 else "max_iter"


def dd_solve(problem: DiscreteProblem, algorithm, theta: float | None = None, f0=None,
             k_max: int = 200, tol: float = 1e-10, reference: TrajectoryPair | None = None,
             track_error: bool = True) -> tuple[TrajectoryPair, IterationHistory]:
    """Relaxed two-subdomain iteration on the coupled (non-diagonalised) system.

    Stops when ``||f_new - f|| <= tol``, after ``k_max`` sweeps, or when the
    residual exceeds ``1e12`` times the first one.
    """
    alg = AlgorithmId.parse(algorithm)
    theta = problem.params.theta if theta is None else float(theta)
    _check_common(problem, theta, tol, k_max)
    tr = TRANSMISSION[alg]
    n = problem.n
    f = np.zeros(n) if f0 is None else np.asarray(f0, dtype=float).reshape(-1).copy()
    if f.shape != (n,):
        raise InvalidDimensionError(f"f0 must have length {n}, got {f.size}")
    if track_error and reference is None:
        reference = monolithic_solve(problem)

    values, residuals, errors = [f.copy()], [], []
    converged = diverged = False
    glued = None
    for _ in range(k_max):
        first = subdomain_solve_discrete(problem, tr.first, alg, f)
        coupled = functional_at(problem, first, tr.coupling, _interface_row(tr.first, first))
        second = subdomain_solve_discrete(problem, tr.second, alg, coupled)
        trace = functional_at(problem, second, tr.trace, _interface_row(tr.second, second))
        f_new = (1.0 - theta) * f + theta * trace
        res = float(np.linalg.norm(f_new - f))
        residuals.append(res)
        values.append(f_new.copy())
        sides = (first, second) if tr.first == 1 else (second, first)
        glued = glue(problem, *sides)
        if track_error:
            errors.append(l2_difference(problem, glued, reference))
        if res <= tol:
            converged = True
            break
        if not math.isfinite(res) or (residuals[0] > 0 and res > DIVERGENCE_FACTOR * residuals[0]):
            diverged = True
            break
        f = f_new

    status = _final_status(converged, diverged, residuals)
    log.info("%s theta=%g: %s after %d sweeps (residual %.3e)", alg, theta, status, len(residuals), residuals[-1])
    history = IterationHistory(alg, theta, tuple(values), tuple(residuals), tuple(errors), status,
                               _safe_rate(residuals))
    return glued, history


def _modal_problem(problem: DiscreteProblem, d: float, y0: float, yhat: np.ndarray) -> DiscreteProblem:
    model = SpectralModel.from_eigenvalues([d])
    return DiscreteProblem(model, problem.params, problem.grid, np.array([y0]), yhat.reshape(-1, 1),
                           problem.scheme)


def dd_solve_per_mode(problem: DiscreteProblem, algorithm, theta: float | None = None, f0=None,
                      k_max: int = 200, tol: float = 1e-10, jobs: int = 1,
                      reference: TrajectoryPair | None = None,
                      track_error: bool = True) -> tuple[TrajectoryPair, IterationHistory]:
    """Same iteration after diagonalising ``A``: ``n`` scalar runs in lockstep.

    The stopping test uses the norm over all modes, which equals the coupled
    residual because the eigenvector matrix is orthogonal, so both solvers
    take the same number of sweeps.
    """
    alg = AlgorithmId.parse(algorithm)
    theta = problem.params.theta if theta is None else float(theta)
    _check_common(problem, theta, tol, k_max)
    tr = TRANSMISSION[alg]
    P, d = problem.model.eigenvectors, problem.model.eigenvalues
    n = problem.n
    f = np.zeros(n) if f0 is None else P.T @ np.asarray(f0, dtype=float).reshape(-1)
    if f.shape != (n,):
        raise InvalidDimensionError(f"f0 must have length {n}, got {f.size}")
    y0_t, yhat_t = P.T @ problem.y0, problem.yhat @ P
    modes = [_modal_problem(problem, float(d[i]), y0_t[i], yhat_t[:, i]) for i in range(n)]
    if track_error and reference is None:
        reference = monolithic_solve(problem)

    def sweep(i, fi):
        mp = modes[i]
        first = subdomain_solve_discrete(mp, tr.first, alg, [fi])
        coupled = functional_at(mp, first, tr.coupling, _interface_row(tr.first, first))
        second = subdomain_solve_discrete(mp, tr.second, alg, coupled)
        trace = functional_at(mp, second, tr.trace, _interface_row(tr.second, second))
        sides = (first, second) if tr.first == 1 else (second, first)
        return float(trace[0]), glue(mp, *sides)

    values, residuals, errors, mode_res = [P @ f], [], [], []
    converged = diverged = False
    glued = None
    pool = ThreadPoolExecutor(max_workers=jobs) if jobs and jobs > 1 else None
    try:
        for _ in range(k_max):
            out = list(pool.map(sweep, range(n), f)) if pool else [sweep(i, f[i]) for i in range(n)]
            trace = np.array([o[0] for o in out])
            f_new = (1.0 - theta) * f + theta * trace
            step = np.abs(f_new - f)
            res = float(np.linalg.norm(step))
            residuals.append(res)
            mode_res.append(step)
            values.append(P @ f_new)
            y_modal = np.hstack([o[1].y for o in out])
            lam_modal = np.hstack([o[1].lam for o in out])
            glued = TrajectoryPair(y_modal @ P.T, lam_modal @ P.T, problem.grid.times)
            if track_error:
                errors.append(l2_difference(problem, glued, reference))
            if res <= tol:
                converged = True
                break
            if not math.isfinite(res) or (residuals[0] > 0 and res > DIVERGENCE_FACTOR * residuals[0]):
                diverged = True
                break
            f = f_new
    finally:
        if pool:
            pool.shutdown()

    mode_res = np.array(mode_res)
    per_mode = tuple(_safe_rate(mode_res[:, i]) for i in range(n))
    status = _final_status(converged, diverged, residuals)
    history = IterationHistory(alg, theta, tuple(values), tuple(residuals), tuple(errors), status,
                               _safe_rate(residuals), per_mode)
    return glued, history
