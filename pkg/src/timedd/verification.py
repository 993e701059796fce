"""Self-checks run by ``timedd verify``.

The library checks compare independent evaluation routes (closed forms,
exact modal iteration, discrete solver) and the reference ``d = 0`` values.
The configuration checks run the discrete solver on the configured problem
and confirm that convergence or divergence matches the predicted factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .algorithms import ALL_ALGORITHMS, AlgorithmId
from .modal_dd import iteration_ratio
from .rho_analysis import (
    rho,
    rho_at_infinity,
    rho_at_zero,
    rho_dn1_via_mu,
    spectral_report,
    theta_star_closed_form,
    theta_star_numeric,
)
from .spectral_model import ProblemParams, build_laplacian_1d
from .time_dd_solver import DiscreteProblem, dd_solve, interface_trace, monolithic_solve

log = logging.getLogger(__name__)

# (gamma, alpha) -> (DN2/ND3 value, ND2/DN3 value) at d = 0, nu = 0.1, T = 1, theta = 1
REFERENCE_D0 = {
    (0.0, 0.5): (1.185, 0.844),
    (10.0, 0.5): (1.005, 0.995),
    (0.0, 0.3): (1.386, 0.722),
    (10.0, 0.7): (0.771, 1.296),
}
REFERENCE_TOL = 5e-4
MARGINAL = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def random_tuples(count: int, seed: int):
    """``(d, params)`` pairs spanning the documented parameter ranges."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        d = 0.0 if i % 20 == 0 else float(10 ** rng.uniform(-6, 6))
        params = ProblemParams(nu=float(10 ** rng.uniform(-4, 2)), gamma=float(rng.choice([0.0, 1.0, 10.0])),
                               T=1.0, alpha=float(rng.uniform(0.1, 0.9)), theta=float(rng.uniform(1e-3, 1.0)))
        out.append((d, params))
    return out


def check_reference_values() -> CheckResult:
    worst = 0.0
    for (gamma, alpha), (v_dn2, v_nd2) in REFERENCE_D0.items():
        p = ProblemParams(nu=0.1, gamma=gamma, alpha=alpha)
        for alg, ref in ((AlgorithmId.DN2, v_dn2), (AlgorithmId.ND3, v_dn2),
                         (AlgorithmId.ND2, v_nd2), (AlgorithmId.DN3, v_nd2)):
            worst = max(worst, abs(rho(alg, 0.0, p) - ref), abs(rho_at_zero(alg, p) - ref))
    return CheckResult("reference d=0 factors", worst <= REFERENCE_TOL, f"max deviation {worst:.2e}")


def check_oracle(count: int = 200, seed: int = 0, rtol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for d, p in random_tuples(count, seed):
        for alg in ALL_ALGORITHMS:
            a, b = rho(alg, d, p), iteration_ratio(alg, d, p)
            worst = max(worst, abs(a - b) / max(abs(a), abs(b), 1e-300))
    return CheckResult("closed form vs modal iteration", worst <= rtol, f"max rel. difference {worst:.2e}")


def check_symmetry(rtol: float = 1e-12) -> CheckResult:
    d = np.concatenate([[0.0], np.logspace(-4, 6, 200)])
    worst = 0.0
    for nu in (1e-2, 1e-1, 1.0):
        for alpha in (0.2, 0.35, 0.5, 0.8):
            for theta in (0.3, 0.7, 1.0):
                p = ProblemParams(nu=nu, alpha=alpha, theta=theta)
                q = p.replace(alpha=1.0 - alpha)
                pairs = [("DN2", "ND3", p, q), ("ND2", "DN3", p, q)]
                if alpha == 0.5:
                    pairs.append(("DN1", "ND1", p, p))
                for a1, a2, pa, pb in pairs:
                    x, y = rho(a1, d, pa), rho(a2, d, pb)
                    worst = max(worst, float(np.max(np.abs(x - y) / np.maximum(np.abs(x), 1e-300))))
    return CheckResult("exchange symmetry at gamma=0", worst <= rtol, f"max rel. difference {worst:.2e}")


def property_grid():
    """Parameter grid shared by the limit and equivalence checks."""
    for nu in 10.0 ** np.arange(-4, 3):
        for gamma in (0.0, 1.0, 10.0):
            for alpha in np.round(np.arange(0.1, 0.91, 0.1), 1):
                for theta in (0.25, 0.5, 0.75, 1.0):
                    yield ProblemParams(nu=float(nu), gamma=gamma, alpha=float(alpha), theta=theta)


def limit_deviations(small: float = 1e-9, large: float = 1e8):
    """Worst ``|rho(small) - rho_at_zero|`` and ``|rho(large) - rho_at_infinity|`` over the grid."""
    w0 = winf = 0.0
    for p in property_grid():
        for alg in ALL_ALGORITHMS:
            w0 = max(w0, abs(rho(alg, small, p) - rho_at_zero(alg, p)))
            winf = max(winf, abs(rho(alg, large, p) - rho_at_infinity(alg, p.theta)))
    return w0, winf


def check_limits(tol: float = 1e-5, small: float = 1e-12) -> CheckResult:
    # rho has slope up to ~1e6 at d = 0 when nu = 1e2, so the small-d proxy sits at 1e-12
    w0, winf = limit_deviations(small)
    return CheckResult(f"d -> 0 (proxy {small:g}) and d -> inf limits", max(w0, winf) <= tol,
                       f"max deviation {w0:.2e} at d=0, {winf:.2e} at d=inf")


def check_mu_route(rtol: float = 1e-12) -> CheckResult:
    d = np.concatenate([[0.0], np.logspace(-6, 8, 57)])
    worst = 0.0
    for p in property_grid():
        a, b = rho(AlgorithmId.DN1, d, p), rho_dn1_via_mu(d, p)
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
    return CheckResult("DN1 via the adjoint formulation", worst <= rtol, f"max rel. difference {worst:.2e}")


def check_theta_star() -> CheckResult:
    grid = np.logspace(-2, 2, 200)
    problems = []
    for nu in (1e-2, 1.0):
        for alpha in (0.2, 0.5, 0.8):
            p = ProblemParams(nu=nu, alpha=alpha)
            dn2, nd2 = theta_star_closed_form("DN2", p), theta_star_closed_form("ND2", p)
            if not dn2 < 0.5:
                problems.append(f"DN2 {dn2:.4f} at nu={nu}, alpha={alpha}")
            if not 0.5 < nd2 < 2 / 3:
                problems.append(f"ND2 {nd2:.4f} at nu={nu}, alpha={alpha}")
            for alg, closed in (("DN2", dn2), ("ND2", nd2)):
                num = theta_star_numeric(alg, p, grid)[0]
                if abs(num - closed) > 1e-3:
                    problems.append(f"{alg} numeric {num:.5f} vs {closed:.5f}")
    return CheckResult("optimal relaxation brackets", not problems, "; ".join(problems[:3]))


def check_fixed_point(tol: float = 1e-9) -> CheckResult:
    model = build_laplacian_1d(4)
    p = ProblemParams(nu=0.1, gamma=1.0, alpha=0.4)
    prob = DiscreteProblem.create(model, p, 100, y0=np.ones(4), yhat=np.full(4, 0.5))
    mono = monolithic_solve(prob)
    worst = 0.0
    for alg in ALL_ALGORITHMS:
        _, hist = dd_solve(prob, alg, 1.0, f0=interface_trace(prob, alg, mono), k_max=3, tol=tol,
                           reference=mono)
        worst = max(worst, hist.residual_norms[0])
    return CheckResult("monolithic trace is a fixed point", worst <= tol, f"max first residual {worst:.2e}")


LIBRARY_CHECKS = (check_reference_values, check_oracle, check_symmetry, check_limits,
                  check_mu_route, check_theta_star, check_fixed_point)


def run_library_checks() -> list[CheckResult]:
    out = []
    for check in LIBRARY_CHECKS:
        try:
            out.append(check())
        except Exception as exc:  # a crash is a failed check, reported with its reason
            out.append(CheckResult(check.__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return out


def check_expected_behaviour(problem: DiscreteProblem, alg: AlgorithmId, f0, k_max: int, tol: float) -> CheckResult:
    """Run the discrete iteration and compare its fate with the predicted spectral factor."""
    predicted = spectral_report(alg, problem.params, problem.model.eigenvalues).spectral_max
    name = f"{alg} on configured problem"
    if abs(predicted - 1.0) < MARGINAL:
        return CheckResult(name, True, f"predicted factor {predicted:.8f} too close to 1, skipped")
    _, hist = dd_solve(problem, alg, problem.params.theta, f0=f0, k_max=k_max, tol=tol, track_error=False)
    rate = hist.observed_rate
    if predicted > 1.0:
        ok = hist.status == "diverged" or (rate is not None and rate > 1.0)
        expect = "divergence"
    else:
        ok = hist.status == "converged" or (rate is not None and rate < 1.0)
        expect = "convergence"
    rate_text = "n/a" if rate is None else f"{rate:.8g}"
    return CheckResult(name, ok, f"expected {expect} (predicted {predicted:.8g}), got {hist.status}, "
                                 f"observed rate {rate_text}")
