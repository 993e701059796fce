"""Closed-form convergence factors of the six algorithms.

For a mode with eigenvalue ``d`` each algorithm is a scalar linear iteration

    f_k = (1 - theta) f_{k-1} + theta * m(d) * f_{k-1},

so its convergence factor is ``rho(d) = |1 - theta + theta m(d)|``.
``m`` is the signed interface gain at ``theta = 1``; :func:`interface_gain`
returns it, the ``rho_*`` functions return ``rho``.

All gains are written with ``tanh``/``coth`` of ``a = sigma alpha`` and
``b = sigma (T - alpha)``. Differences that cancel for large ``d`` are
rewritten beforehand: ``sigma - d = (1/nu) / (sigma + d)`` and
``1 - tanh(b)``, ``coth(b) - 1`` go through ``exp(-2 b)``. Every function
accepts a scalar or an array of eigenvalues.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .algorithms import AlgorithmId
from .errors import (
    BoundUndefinedError,
    InvalidInputError,
    NotApplicableError,
    UnsupportedSpectrumError,
)
from .spectral_model import ProblemParams

log = logging.getLogger(__name__)

LARGE_D_PROXY = 1e8
THETA_GRID_STEP = 1e-3
THETA_XTOL = 1e-9


def _as_eigenvalues(d):
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise UnsupportedSpectrumError("eigenvalues must be finite")
    if np.any(arr < 0):
        raise UnsupportedSpectrumError(f"negative eigenvalue {float(arr.min())} is not supported")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


class _Modes:
    """Vectorised per-eigenvalue coefficients."""

    def __init__(self, d, p: ProblemParams):
        self.d = d
        self.nu_inv = p.nu_inv
        self.gamma = p.gamma
        self.sigma = np.hypot(d, math.sqrt(p.nu_inv))
        self.smd = p.nu_inv / (self.sigma + d)
        self.omega = p.gamma * p.nu_inv + d
        self.a = self.sigma * p.alpha
        self.b = self.sigma * (p.T - p.alpha)
        e2b = np.exp(-2.0 * self.b)
        self.tanh_a = np.tanh(self.a)
        self.coth_a = 1.0 / self.tanh_a
        self.tanh_b = np.tanh(self.b)
        self.coth_b = 1.0 / self.tanh_b
        self.one_minus_tanh_b = 2.0 * e2b / (1.0 + e2b)
        self.coth_b_minus_one = 2.0 * e2b / -np.expm1(-2.0 * self.b)


def _gain_dn1(m: _Modes):
    g, s, d = m.gamma, m.sigma, m.d
    num = g * (m.smd + d * m.one_minus_tanh_b) + m.tanh_b      # sigma gamma + beta tanh(b)
    return m.nu_inv * num / ((s + d * m.tanh_a) * (m.omega + s * m.tanh_b))


def _gain_nd1(m: _Modes):
    g, s, d = m.gamma, m.sigma, m.d
    num = g * (m.smd - d * m.coth_b_minus_one) + m.coth_b      # sigma gamma + beta coth(b)
    return m.nu_inv * num / ((s + d * m.coth_a) * (m.omega + s * m.coth_b))


def _gain_dn2(m: _Modes):
    s, w = m.sigma, m.omega
    return -m.coth_a * (s * m.coth_b + w) / (s + w * m.coth_b)


def _gain_nd2(m: _Modes):
    s, w = m.sigma, m.omega
    return -m.tanh_a * (s * m.tanh_b + w) / (s + w * m.tanh_b)


def _gain_dn3(m: _Modes):
    g, s, d = m.gamma, m.sigma, m.d
    left = (s + d * m.coth_a) / (s * m.coth_a + d)
    num = g * (m.smd + s * m.coth_b_minus_one) + 1.0           # gamma sigma coth(b) + beta
    den = g * (m.smd - d * m.coth_b_minus_one) + m.coth_b      # gamma sigma + beta coth(b)
    return -left * num / den


def _gain_nd3(m: _Modes):
    g, s, d = m.gamma, m.sigma, m.d
    left = (s + d * m.tanh_a) / (s * m.tanh_a + d)
    num = g * (m.smd - s * m.one_minus_tanh_b) + 1.0           # gamma sigma tanh(b) + beta
    den = g * (m.smd + d * m.one_minus_tanh_b) + m.tanh_b      # gamma sigma + beta tanh(b)
    return -left * num / den


_GAINS = {
    AlgorithmId.DN1: _gain_dn1,
    AlgorithmId.ND1: _gain_nd1,
    AlgorithmId.DN2: _gain_dn2,
    AlgorithmId.ND2: _gain_nd2,
    AlgorithmId.DN3: _gain_dn3,
    AlgorithmId.ND3: _gain_nd3,
}


def interface_gain(algorithm, d, params: ProblemParams):
    """Signed interface gain ``m(d)``: the iteration factor at ``theta = 1``."""
    alg = AlgorithmId.parse(algorithm)
    arr = _as_eigenvalues(d)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = _GAINS[alg](_Modes(arr, params))
    return _out(gain, d)


def rho(algorithm, d, params: ProblemParams, theta: float | None = None):
    """``|1 - theta + theta m(d)|`` for any algorithm; ``theta`` defaults to ``params.theta``.

    Outside Category I a gain near ``-1`` is written ``m = -1 - e`` with ``e``
    from the cancellation-free rearrangement, so ``rho = |1 - 2 theta - theta e|``
    keeps full relative accuracy near ``theta = 1/2``.
    """
    alg = AlgorithmId.parse(algorithm)
    th = params.theta if theta is None else theta
    arr = _as_eigenvalues(d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        m = _Modes(arr, params)
        gain = _GAINS[alg](m)
        out = 1.0 - th + th * gain
        if alg.category != 1:
            out = np.where(gain < -0.5, 1.0 - 2.0 * th - th * _unit_excess(alg, m), out)
    return _out(np.abs(out), d)


def rho_dn1(d, params):
    return rho(AlgorithmId.DN1, d, params)


def rho_nd1(d, params):
    return rho(AlgorithmId.ND1, d, params)


def rho_dn2(d, params):
    return rho(AlgorithmId.DN2, d, params)


def rho_nd2(d, params):
    return rho(AlgorithmId.ND2, d, params)


def rho_dn3(d, params):
    return rho(AlgorithmId.DN3, d, params)


def rho_nd3(d, params):
    return rho(AlgorithmId.ND3, d, params)


RHO_FUNCTIONS = {
    AlgorithmId.DN1: rho_dn1,
    AlgorithmId.ND1: rho_nd1,
    AlgorithmId.DN2: rho_dn2,
    AlgorithmId.ND2: rho_nd2,
    AlgorithmId.DN3: rho_dn3,
    AlgorithmId.ND3: rho_nd3,
}


def rho_dn1_via_mu(d, params: ProblemParams):
    """DN1 factor derived from the adjoint-only (Dirichlet-Robin) reading.

    Side 1 carries ``mu = A (sigma cosh + d sinh)`` with ``mu(alpha) = f``,
    side 2 carries ``mu = B (gamma sigma cosh + beta sinh)(T - t)``; the two
    are matched through ``mu'' - d mu'`` at ``alpha`` and the new datum is
    ``mu_2(alpha)``. Each quantity is evaluated per unit ``cosh``.
    """
    arr = _as_eigenvalues(d)
    m = _Modes(arr, params)
    s, dd, g = m.sigma, m.d, m.gamma
    # side 1, f = 1: mu'' - d mu' at alpha, using sigma**2 - d**2 = 1/nu
    robin1 = s * m.nu_inv / (s + dd * m.tanh_a)
    # side 2 per unit B cosh(b): mu(alpha) and mu'' - d mu' (beta + gamma d = 1)
    mu2 = g * (m.smd + dd * m.one_minus_tanh_b) + m.tanh_b
    robin2 = s * (m.omega + s * m.tanh_b)
    gain = robin1 * mu2 / robin2
    return _out(np.abs(1.0 - params.theta + params.theta * gain), d)


def _log_small(x, plus: bool):
    """``log(coth(x) - 1)`` (``plus=False``) or ``log(1 - tanh(x))`` (``plus=True``) without underflow."""
    e = np.exp(-2.0 * x)
    tail = np.log1p(e) if plus else np.log(-np.expm1(-2.0 * x))
    return math.log(2.0) - 2.0 * x - tail


def _excess_terms(alg: AlgorithmId, m: _Modes):
    """``-m(d) - 1`` for Categories II/III as ``sum(coef * exp(log_term)) / den``.

    The log terms are logs of products of ``coth(.) - 1`` (DN) or
    ``1 - tanh(.)`` (ND) factors, so nothing cancels.
    """
    g, s, dd, smd, w = m.gamma, m.sigma, m.d, m.smd, m.omega
    use_tanh = alg in (AlgorithmId.ND2, AlgorithmId.ND3)
    la, lb = _log_small(m.a, use_tanh), _log_small(m.b, use_tanh)
    spd = s + dd
    if alg is AlgorithmId.DN2:
        coefs = (s, s + w, smd - g * m.nu_inv)
        logs = (la + lb, la, lb)
        den = s + w * m.coth_b
    elif alg is AlgorithmId.ND2:
        coefs = (s, -(s + w), -(smd - g * m.nu_inv))
        logs = (la + lb, la, lb)
        den = s + w * m.tanh_b
    elif alg is AlgorithmId.DN3:
        coefs = (spd * (g * spd - 1.0), -smd * (1.0 + g * smd), s * (2.0 * g * dd - 1.0))
        logs = (lb, la, la + lb)
        den = (s * m.coth_a + dd) * (g * (smd - dd * m.coth_b_minus_one) + m.coth_b)
    else:
        coefs = (spd * (1.0 - g * spd), smd * (1.0 + g * smd), s * (2.0 * g * dd - 1.0))
        logs = (lb, la, la + lb)
        den = (s * m.tanh_a + dd) * (g * (smd + dd * m.one_minus_tanh_b) + m.tanh_b)
    c = np.array(np.broadcast_arrays(*coefs), dtype=float)
    lg = np.array(np.broadcast_arrays(*logs), dtype=float)
    return c, lg, den


def _unit_excess(alg: AlgorithmId, m: _Modes):
    c, lg, den = _excess_terms(alg, m)
    return np.sum(c * np.exp(lg), axis=0) / den


def divergence_margin(algorithm, d, params: ProblemParams):
    """Sign and log-magnitude of ``rho - 1`` at ``theta = 1`` (Categories II and III).

    ``rho - 1`` is a signed sum of products of ``coth(.) - 1`` or
    ``1 - tanh(.)``; summing those in log space keeps the sign exact even when
    the value is far below the smallest double. Where the gain is positive
    (possible for Category III with ``gamma > 0``) ``rho - 1 = m - 1`` is
    returned directly. Returns ``(sign, log|rho - 1|)``.
    """
    alg = AlgorithmId.parse(algorithm)
    if alg.category == 1:
        raise NotApplicableError(f"{alg}: the margin is defined for Categories II and III")
    arr = _as_eigenvalues(d)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        m = _Modes(np.atleast_1d(arr), params)
        c, lg, den = _excess_terms(alg, m)
        lg = np.where(c == 0.0, -np.inf, lg + np.log(np.abs(c)))
        mag, sign = logsumexp(lg, axis=0, b=np.where(c == 0.0, 1.0, np.sign(c)), return_sign=True)
        sign = np.where(np.isneginf(mag), 0.0, sign) * np.sign(den)
        mag = mag - np.log(np.abs(den))
        gain = _GAINS[alg](m)
        direct = gain - 1.0
        pos = gain > 0
        sign = np.where(pos, np.sign(direct), sign)
        mag = np.where(pos, np.log(np.abs(direct)), mag)
    if np.ndim(d) == 0:
        return float(sign[0]), float(mag[0])
    return sign, mag


def _d0_ratio(algorithm: AlgorithmId, params: ProblemParams) -> float:
    """``1 - m(0)`` in the overflow-free tanh form of the printed d = 0 limits."""
    s = math.sqrt(params.nu_inv)
    g_nu = params.gamma * params.nu_inv
    th_a = math.tanh(s * params.alpha)
    th_b = math.tanh(s * (params.T - params.alpha))
    top = s * (1.0 + th_a * th_b) + g_nu * (th_a + th_b)
    if algorithm in (AlgorithmId.DN2, AlgorithmId.ND3):
        return top / (th_a * (s * th_b + g_nu))
    if algorithm in (AlgorithmId.ND2, AlgorithmId.DN3):
        return top / (s + g_nu * th_b)
    raise NotApplicableError(f"{algorithm} has no equioscillation limit at d = 0")


def rho_at_zero(algorithm, params: ProblemParams) -> float:
    """Convergence factor of the ``d = 0`` mode."""
    alg = AlgorithmId.parse(algorithm)
    if alg.category == 1:
        return 1.0
    return abs(1.0 - params.theta * _d0_ratio(alg, params))


def rho_at_infinity(algorithm, theta: float) -> float:
    """Limit of the convergence factor as ``d`` grows without bound."""
    alg = AlgorithmId.parse(algorithm)
    return abs(1.0 - theta) if alg.category == 1 else abs(1.0 - 2.0 * theta)


def bound_dn1(params: ProblemParams, d_min: float) -> float:
    """Upper bound ``(1 + gamma sigma_min) / (nu d_min**2)`` for DN1 at ``theta = 1``."""
    if not d_min > 0:
        raise BoundUndefinedError(f"DN1 bound needs d_min > 0, got {d_min}")
    sigma_min = math.hypot(d_min, math.sqrt(params.nu_inv))
    return (1.0 + params.gamma * sigma_min) / (params.nu * d_min**2)


def bound_nd1(params: ProblemParams, d_min: float) -> float:
    """Upper bound ``coth(sigma_min (T - alpha)) / (nu (sigma_min + d_min)**2)`` for ND1, gamma = 0."""
    if params.gamma != 0:
        raise NotApplicableError(f"ND1 bound holds for gamma = 0 only, got gamma = {params.gamma}")
    if not d_min >= 0:
        raise BoundUndefinedError(f"ND1 bound needs d_min >= 0, got {d_min}")
    sigma_min = math.hypot(d_min, math.sqrt(params.nu_inv))
    return 1.0 / math.tanh(sigma_min * (params.T - params.alpha)) / (params.nu * (sigma_min + d_min) ** 2)


def theta_star_closed_form(algorithm, params: ProblemParams) -> float:
    """Relaxation that balances the ``d = 0`` and ``d -> inf`` factors.

    DN3 shares the ND2 expression and ND3 the DN2 one. Optimality is proven
    for ``gamma = 0`` only; see :func:`theta_star_is_proven`.
    """
    alg = AlgorithmId.parse(algorithm)
    if alg.category == 1:
        raise NotApplicableError(f"no closed-form optimal relaxation for {alg}")
    return 2.0 / (2.0 + _d0_ratio(alg, params))


def theta_star_is_proven(algorithm, params: ProblemParams) -> bool:
    return AlgorithmId.parse(algorithm).category != 1 and params.gamma == 0


def _objective_points(alg: AlgorithmId, eigenvalues, large_d: float) -> np.ndarray:
    d = _as_eigenvalues(eigenvalues).ravel()
    if d.size == 0:
        raise InvalidInputError("eigenvalue list is empty")
    extra = [large_d]
    # Category I keeps rho = 1 at d = 0 for every theta, which would flatten the objective.
    if alg.category != 1:
        extra.append(0.0)
    return np.unique(np.concatenate([d, extra]))


def theta_star_numeric(algorithm, params: ProblemParams, eigenvalues, large_d: float = LARGE_D_PROXY,
                       step: float = THETA_GRID_STEP) -> tuple[float, float]:
    """Minimise ``max_d rho(d; theta)`` over ``theta`` in ``(0, 1]``.

    The spectrum is augmented with ``large_d`` and, outside Category I, with
    ``d = 0``. A grid scan at resolution ``step`` is refined by golden-section
    search on the cell around the best grid point. The objective is convex in
    ``theta`` so the cell brackets the minimiser. Ties go to the smallest theta.

    Returns
    -------
    (theta_star, rho_star)
    """
    alg = AlgorithmId.parse(algorithm)
    d = _objective_points(alg, eigenvalues, large_d)
    gain = np.asarray(interface_gain(alg, d, params), dtype=float)
    gain = gain[np.isfinite(gain)]
    slope = 1.0 - gain

    def objective(theta):
        return float(np.max(np.abs(1.0 - theta * slope)))

    n = int(round(1.0 / step))
    thetas = np.arange(1, n + 1) * step
    values = np.empty(n)
    chunk = max(1, 4_000_000 // max(slope.size, 1))
    for start in range(0, n, chunk):
        th = thetas[start:start + chunk, None]
        values[start:start + chunk] = np.max(np.abs(1.0 - th * slope[None, :]), axis=1)
    k = int(np.argmin(values))
    best_theta, best_val = float(thetas[k]), float(values[k])

    if 0 < k < n - 1 and values[k - 1] > best_val and values[k + 1] > best_val:
        res = minimize_scalar(objective, bracket=(thetas[k - 1], thetas[k], thetas[k + 1]),
                              method="golden", tol=THETA_XTOL)
        if res.fun < best_val and 0 < res.x <= 1:
            best_theta, best_val = float(res.x), float(res.fun)
    return best_theta, best_val


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-eigenvalue factors of one algorithm with its limits and bounds."""

    algorithm: AlgorithmId
    per_eigenvalue: tuple
    spectral_max: float
    rho_at_zero: float
    rho_at_inf: float
    theta_used: float
    bounds: dict | None = None
    flags: tuple = field(default_factory=tuple)

    @property
    def converges(self) -> bool:
        return self.spectral_max < 1.0


def spectral_report(algorithm, params: ProblemParams, eigenvalues) -> ConvergenceReport:
    alg = AlgorithmId.parse(algorithm)
    d = _as_eigenvalues(eigenvalues).ravel()
    if d.size == 0:
        raise InvalidInputError("eigenvalue list is empty")
    values = np.asarray(rho(alg, d, params), dtype=float).ravel()
    pairs = tuple((float(x), float(r)) for x, r in zip(d, values))
    bounds = None
    d_min = float(d.min())
    if alg is AlgorithmId.DN1 and d_min > 0:
        bounds = {"dn1": bound_dn1(params, d_min)}
    elif alg is AlgorithmId.ND1 and params.gamma == 0:
        bounds = {"nd1": bound_nd1(params, d_min)}
    flags = []
    if not params.theta_is_canonical:
        flags.append("theta-outside-(0,1]")
    if bounds is not None and params.theta != 1:
        flags.append("bound-assumes-theta=1")
    return ConvergenceReport(
        algorithm=alg,
        per_eigenvalue=pairs,
        spectral_max=float(np.max(values)),
        rho_at_zero=rho_at_zero(alg, params),
        rho_at_inf=rho_at_infinity(alg, params.theta),
        theta_used=params.theta,
        bounds=bounds,
        flags=tuple(flags),
    )
