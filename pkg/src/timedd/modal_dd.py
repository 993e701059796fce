"""Exact single-mode runs of the six algorithms.

On one eigenmode the error equations reduce to

    z' = mu / nu - d z,    mu' = z + d mu,    z(0) = 0,    mu(T) + gamma z(T) = 0,

and each state satisfies ``f'' = sigma**2 f``. A subdomain solve is then a
one-coefficient problem: the homogeneous end condition fixes the shape of the
solution, the interface row fixes its amplitude. Iterating these closed-form
solves gives a brute-force reference for the convergence factors.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .algorithms import TRANSMISSION, AlgorithmId, Functional
from .errors import FactorizationError, InvalidInputError
from .spectral_model import ModalBvpSolution, ModalTriple, ProblemParams, modal_coefficients

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e12


@dataclass(frozen=True)
class ModalIterateState:
    """Interface value of a scalar iteration and everything it went through."""

    f_alpha: float
    k: int = 0
    history: tuple = ()
    status: str = "running"

    def __post_init__(self):
        if not self.history:
            object.__setattr__(self, "history", (float(self.f_alpha),))
        if len(self.history) != self.k + 1:
            raise InvalidInputError("history length must equal k + 1")


@dataclass(frozen=True)
class ModalSubdomainSolution:
    """Carried state on one subdomain; the other state follows from the ODEs."""

    algorithm: AlgorithmId
    side: int
    formulation: str
    solution: ModalBvpSolution

    @property
    def A_coef(self) -> float:
        return self.solution.A_coef

    @property
    def B_coef(self) -> float:
        return self.solution.B_coef

    def __call__(self, t):
        return self.solution.value(t)


def _basis(side: int, carried: str, mt: ModalTriple, params: ProblemParams) -> ModalBvpSolution:
    """Solution satisfying the homogeneous end row of ``side``, up to scale.

    Side 1 is anchored at ``(alpha, 0)``, side 2 at ``(T, alpha)`` so both
    exponentials are at most one on the subdomain.
    """
    s, smd, a, b = mt.sigma, mt.sigma_minus_d, mt.a, mt.b
    g, nu_inv = params.gamma, params.nu_inv
    ea, eb = math.exp(-a), math.exp(-b)
    if side == 1:
        if carried == "z":               # z(0) = 0
            growth, decay = 1.0, -ea
        else:                            # mu'(0) - d mu(0) = 0
            growth, decay = mt.sigma_plus_d, smd * ea
        return ModalBvpSolution(growth, decay, s, t_growth=params.alpha, t_decay=0.0, kind=f"{carried}1")
    if carried == "z":                   # z'(T) + omega z(T) = 0
        growth, decay = (smd - g * nu_inv) * eb, s + mt.omega
    else:                                # gamma mu'(T) + beta mu(T) = 0
        growth, decay = (g * mt.sigma_plus_d - 1.0) * eb, g * smd + 1.0
    return ModalBvpSolution(growth, decay, s, t_growth=params.T, t_decay=params.alpha, kind=f"{carried}2")


def _factors(functional: Functional, carried: str, mt: ModalTriple, nu: float) -> tuple[float, float]:
    """Growth/decay multipliers turning the carried state into ``functional``."""
    s, smd, spd = mt.sigma, mt.sigma_minus_d, mt.sigma_plus_d
    if carried == "z":
        return {
            Functional.STATE: (1.0, 1.0),
            Functional.STATE_RATE: (s, -s),
            Functional.ADJOINT: (nu * spd, -nu * smd),           # mu = nu (z' + d z)
            Functional.ADJOINT_RATE: (nu * s * spd, nu * s * smd),
        }[functional]
    return {
        Functional.ADJOINT: (1.0, 1.0),
        Functional.ADJOINT_RATE: (s, -s),
        Functional.STATE: (smd, -spd),                           # z = mu' - d mu
        Functional.STATE_RATE: (s * smd, s * spd),
    }[functional]


def functional_value(solution: ModalSubdomainSolution, functional: Functional, d: float,
                     params: ProblemParams, t: float | None = None) -> float:
    """Evaluate ``y``, ``lam``, ``y'`` or ``lam'`` of a modal subdomain solution (default at alpha)."""
    mt = modal_coefficients(d, params)
    g, q = _factors(functional, solution.formulation, mt, params.nu)
    return solution.solution.apply(g, q)(params.alpha if t is None else t)


def _check_side(side):
    if side not in (1, 2):
        raise InvalidInputError(f"side must be 1 or 2, got {side!r}")


def subdomain_solve(algorithm, side: int, d: float, params: ProblemParams,
                    interface_datum: float) -> ModalSubdomainSolution:
    """Solve one subdomain of the error iteration for a given interface value.

    On the side that receives the transmission datum the row is
    ``datum(alpha) = interface_datum``; on the other side it is
    ``coupling(alpha) = interface_datum``.
    """
    alg = AlgorithmId.parse(algorithm)
    _check_side(side)
    tr = TRANSMISSION[alg]
    functional = tr.datum if side == tr.first else tr.coupling
    mt = modal_coefficients(d, params)
    basis = _basis(side, tr.carried, mt, params)
    g, q = _factors(functional, tr.carried, mt, params.nu)
    at_alpha = basis.apply(g, q)(params.alpha)
    if at_alpha == 0.0 or not math.isfinite(at_alpha):
        raise FactorizationError(f"{alg} side {side}: interface row is singular for d = {d}")
    return ModalSubdomainSolution(alg, side, tr.carried, basis.scaled(float(interface_datum) / at_alpha))


def dd_step(algorithm, d: float, params: ProblemParams, state: ModalIterateState) -> ModalIterateState:
    """One relaxed sweep: first side, second side, update of the datum."""
    alg = AlgorithmId.parse(algorithm)
    tr = TRANSMISSION[alg]
    f = state.f_alpha
    first = subdomain_solve(alg, tr.first, d, params, f)
    coupled = functional_value(first, tr.coupling, d, params)
    second = subdomain_solve(alg, tr.second, d, params, coupled)
    trace = functional_value(second, tr.trace, d, params)
    f_new = (1.0 - params.theta) * f + params.theta * trace
    return ModalIterateState(f_new, state.k + 1, state.history + (f_new,), state.status)


def iteration_ratio(algorithm, d: float, params: ProblemParams) -> float:
    """``|f_1|`` after one sweep from ``f_0 = 1``: the per-mode contraction."""
    return abs(dd_step(algorithm, d, params, ModalIterateState(1.0)).f_alpha)


def run_modal_dd(algorithm, d: float, params: ProblemParams, f0: float = 1.0,
                 k_max: int = 100, tol: float = 1e-12) -> ModalIterateState:
    """Iterate until ``|f| <= tol |f0|``, ``k_max`` sweeps, or divergence."""
    if not isinstance(k_max, int) or k_max <= 0:
        raise InvalidInputError(f"k_max must be a positive integer, got {k_max!r}")
    state = ModalIterateState(float(f0))
    scale = abs(f0)
    if scale == 0.0:
        return ModalIterateState(0.0, status="converged")
    while state.k < k_max:
        state = dd_step(algorithm, d, params, state)
        if abs(state.f_alpha) <= tol * scale:
            return _with_status(state, "converged")
        if abs(state.f_alpha) > DIVERGENCE_FACTOR * scale or not math.isfinite(state.f_alpha):
            log.info("modal %s diverged at k=%d (|f|=%.3e)", algorithm, state.k, abs(state.f_alpha))
            return _with_status(state, "diverged")
    return _with_status(state, "max_iter")


def _with_status(state: ModalIterateState, status: str) -> ModalIterateState:
    return ModalIterateState(state.f_alpha, state.k, state.history, status)


def reconstruct_pair(solution: ModalSubdomainSolution, d: float,
                     params: ProblemParams) -> tuple[ModalBvpSolution, ModalBvpSolution]:
    """``(z, mu)`` evaluators from the carried state via ``mu = nu (z' + d z)`` and ``z = mu' - d mu``."""
    mt = modal_coefficients(d, params)
    z = solution.solution.apply(*_factors(Functional.STATE, solution.formulation, mt, params.nu), kind="z")
    mu = solution.solution.apply(*_factors(Functional.ADJOINT, solution.formulation, mt, params.nu), kind="mu")
    return z, mu
