import logging
import math

import numpy as np
import pytest
from scipy.linalg import expm

from timedd import (
    ALL_ALGORITHMS,
    InvalidDimensionError,
    InvalidInputError,
    ParameterError,
    ProblemParams,
    SpectralModel,
    TooFewIterationsError,
    build_laplacian_1d,
    rho,
)
from timedd.algorithms import TRANSMISSION, Functional
from timedd.time_dd_solver import (
    DiscreteProblem,
    TimeGrid,
    dd_solve,
    dd_solve_per_mode,
    equation_residual,
    functional_at,
    interface_trace,
    l2_difference,
    monolithic_solve,
    observed_rate,
    subdomain_solve_discrete,
)


def scalar_exact(d, p, y0, c, t):
    """Continuous solution of the scalar system with constant target ``c``, by shooting on lam(0)."""
    M = np.array([[-d, p.nu_inv], [1.0, d]])
    xp = np.linalg.solve(M, -np.array([0.0, -c]))

    def at(lam0, tt):
        return xp + expm(M * tt) @ (np.array([y0, lam0]) - xp)

    def final(lam0):
        y, lam = at(lam0, p.T)
        return p.gamma * y + lam - p.gamma * c

    f0, f1 = final(0.0), final(1.0)
    lam0 = -f0 / (f1 - f0)
    return np.array([at(lam0, tt) for tt in t])


def scalar_problem(nt, scheme="trapezoidal", d=2.0, p=None):
    p = p or ProblemParams(nu=0.5, gamma=1.0, alpha=0.5)
    return DiscreteProblem.create(SpectralModel.from_eigenvalues([d]), p, nt, scheme, y0=[1.0], yhat=[0.3])


class TestTimeGrid:
    def test_exact_node(self):
        g = TimeGrid.snapped(10, 1.0, 0.3)
        assert g.interface_index == 3 and g.alpha == pytest.approx(0.3)
        assert g.dt == pytest.approx(0.1) and g.times.size == 11

    def test_snapping_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="timedd"):
            g = TimeGrid.snapped(10, 1.0, 0.33)
        assert g.interface_index == 3
        assert "snapped" in caplog.text

    def test_clamped_to_interior(self):
        assert TimeGrid.snapped(4, 1.0, 0.01).interface_index == 1
        assert TimeGrid.snapped(4, 1.0, 0.99).interface_index == 3

    @pytest.mark.parametrize("nt", [1, 0, 2.5])
    def test_bad_nt(self, nt):
        with pytest.raises(InvalidDimensionError):
            TimeGrid.snapped(nt, 1.0, 0.5)

    def test_problem_params_follow_grid(self):
        prob = scalar_problem(10, p=ProblemParams(nu=1.0, alpha=0.33))
        assert prob.params.alpha == pytest.approx(0.3)


class TestProblemValidation:
    def test_scheme(self):
        with pytest.raises(InvalidInputError):
            scalar_problem(10, scheme="rk4")

    def test_shapes(self):
        model = build_laplacian_1d(3)
        with pytest.raises(InvalidDimensionError):
            DiscreteProblem.create(model, ProblemParams(nu=1.0), 10, y0=[1.0, 2.0])
        with pytest.raises(InvalidDimensionError):
            DiscreteProblem.create(model, ProblemParams(nu=1.0), 10, yhat=np.ones((5, 3)))

    def test_error_equations_zero_data(self):
        prob = DiscreteProblem.create(build_laplacian_1d(3), ProblemParams(nu=1.0), 10,
                                      y0=[1, 2, 3], error_equations=True)
        assert not prob.y0.any() and not prob.yhat.any()


class TestMonolithic:
    def test_zero_data(self):
        prob = DiscreteProblem.create(build_laplacian_1d(4), ProblemParams(nu=0.1), 20)
        pair = monolithic_solve(prob)
        assert not pair.y.any() and not pair.lam.any()

    @pytest.mark.parametrize("scheme, order", [("trapezoidal", 2.0), ("implicit-euler", 1.0)])
    def test_convergence_order(self, scheme, order):
        errs = []
        for nt in (40, 80, 160):
            prob = scalar_problem(nt, scheme)
            pair = monolithic_solve(prob)
            exact = scalar_exact(2.0, prob.params, 1.0, 0.3, prob.grid.times)
            errs.append(np.max(np.abs(np.hstack([pair.y, pair.lam]) - exact)))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(rates - order) < 0.15), rates

    def test_boundary_rows(self):
        p = ProblemParams(nu=0.2, gamma=3.0)
        prob = DiscreteProblem.create(build_laplacian_1d(5), p, 50, y0=np.arange(5.0), yhat=np.full(5, 0.5))
        pair = monolithic_solve(prob)
        np.testing.assert_allclose(pair.y[0], np.arange(5.0), atol=1e-13)
        np.testing.assert_allclose(p.gamma * pair.y[-1] + pair.lam[-1], p.gamma * 0.5, atol=1e-12)
        assert equation_residual(prob, pair) < 1e-13

    def test_residual_detects_perturbation(self):
        prob = scalar_problem(20)
        pair = monolithic_solve(prob)
        pair.y[5] += 1e-3
        assert equation_residual(prob, pair) > 1e-5


class TestSubdomains:
    def test_dn1_interface_row(self):
        prob = DiscreteProblem.create(build_laplacian_1d(4), ProblemParams(nu=0.1), 40, y0=np.ones(4))
        f = np.array([0.1, -0.2, 0.3, 0.4])
        left = subdomain_solve_discrete(prob, 1, "DN1", f)
        np.testing.assert_allclose(left.lam[-1], f, atol=1e-14)
        np.testing.assert_allclose(left.y[0], np.ones(4), atol=1e-14)
        assert left.t[-1] == pytest.approx(prob.grid.alpha)

    def test_rate_row_is_the_ode(self):
        prob = DiscreteProblem.create(build_laplacian_1d(3), ProblemParams(nu=0.1), 40, yhat=np.full(3, 0.2))
        v = np.array([1.0, 0.0, -1.0])
        right = subdomain_solve_discrete(prob, 2, "DN1", v)  # side 2 imposes y'(alpha)
        np.testing.assert_allclose(functional_at(prob, right, Functional.STATE_RATE, 0), v, atol=1e-12)
        right = subdomain_solve_discrete(prob, 2, "DN3", v)  # side 2 imposes lam'(alpha)
        np.testing.assert_allclose(functional_at(prob, right, Functional.ADJOINT_RATE, 0), v, atol=1e-12)

    def test_validation(self):
        prob = scalar_problem(10)
        with pytest.raises(InvalidInputError):
            subdomain_solve_discrete(prob, 3, "DN1", [0.0])
        with pytest.raises(InvalidDimensionError):
            subdomain_solve_discrete(prob, 1, "DN1", [0.0, 1.0])

    @pytest.mark.parametrize("alg", ALL_ALGORITHMS)
    def test_monolithic_is_a_fixed_point(self, alg):
        prob = DiscreteProblem.create(build_laplacian_1d(4), ProblemParams(nu=0.1, gamma=1.0), 40,
                                      y0=np.linspace(1, 2, 4), yhat=np.full(4, 0.5))
        ref = monolithic_solve(prob)
        f = interface_trace(prob, alg, ref)
        _, hist = dd_solve(prob, alg, theta=1.0, f0=f, k_max=1, tol=1e-300)
        assert hist.residual_norms[0] <= 1e-10 * max(1.0, np.linalg.norm(f))
        assert hist.error_norms[0] <= 1e-10


class TestObservedRate:
    def test_geometric(self):
        assert observed_rate([0.5**k for k in range(10)]) == pytest.approx(0.5, rel=1e-12)

    def test_uses_tail(self):
        res = [1.0, 1e-3] + [1e-3 * 0.1**k for k in range(1, 13)]
        assert observed_rate(res) == pytest.approx(0.1, rel=1e-10)

    def test_too_few(self):
        with pytest.raises(TooFewIterationsError):
            observed_rate([1.0, 0.5, 0.25])
        with pytest.raises(TooFewIterationsError):
            observed_rate([1.0, 0.0, 0.0, 0.0, 0.0])


class TestDDSolve:
    def setup_method(self):
        self.prob = DiscreteProblem.create(build_laplacian_1d(8), ProblemParams(nu=0.1), 200,
                                           y0=np.linspace(1, 2, 8), yhat=np.full(8, 0.5))

    def test_dn1_converges_to_monolithic(self):
        pair, hist = dd_solve(self.prob, "DN1", tol=1e-12)
        assert hist.status == "converged"
        assert l2_difference(self.prob, pair, monolithic_solve(self.prob)) < 1e-10
        assert hist.observed_rate < 1

    def test_dn2_diverges(self):
        _, hist = dd_solve(self.prob, "DN2", k_max=300)
        assert hist.status == "diverged"

    def test_tol_already_met(self):
        ref = monolithic_solve(self.prob)
        _, hist = dd_solve(self.prob, "ND2", theta=0.5, f0=interface_trace(self.prob, "ND2", ref), tol=1e-6)
        assert hist.iterations == 1 and hist.status == "converged"

    def test_rate_matches_discrete_spectral_factor(self):
        _, hist = dd_solve(self.prob, "ND2", k_max=40, tol=1e-300, track_error=False)
        assert hist.observed_rate == pytest.approx(rho("ND2", self.prob.model.eigenvalues, self.prob.params).max(),
                                                   rel=5e-2)

    @pytest.mark.parametrize("alg", ["DN1", "ND3"])
    def test_per_mode_matches_coupled(self, alg):
        a, ha = dd_solve(self.prob, alg, theta=0.7, k_max=30)
        b, hb = dd_solve_per_mode(self.prob, alg, theta=0.7, k_max=30, jobs=2)
        assert ha.iterations == hb.iterations
        np.testing.assert_allclose(hb.residual_norms, ha.residual_norms, rtol=1e-8, atol=1e-14)
        assert l2_difference(self.prob, a, b) <= 1e-8 * max(1.0, math.sqrt(np.sum(a.y**2)))
        assert len(hb.per_mode_rates) == 8

    def test_arguments(self):
        with pytest.raises(InvalidInputError):
            dd_solve(self.prob, "DN1", tol=0.0)
        with pytest.raises(InvalidInputError):
            dd_solve(self.prob, "DN1", k_max=0)
        with pytest.raises(ParameterError):
            dd_solve(self.prob, "DN1", theta=2.5)
        with pytest.raises(InvalidDimensionError):
            dd_solve(self.prob, "DN1", f0=np.zeros(3))

    def test_history_lengths(self):
        _, hist = dd_solve(self.prob, "DN1", k_max=3, tol=1e-300)
        assert hist.iterations == 3 and len(hist.interface_values) == 4 and len(hist.error_norms) == 3
        assert hist.status == "max_iter"

    def test_transmission_datum_used(self):
        ref = monolithic_solve(self.prob)
        f = interface_trace(self.prob, "DN2", ref)
        np.testing.assert_allclose(f, ref.y[self.prob.grid.interface_index])
        assert TRANSMISSION["DN2"].datum is Functional.STATE
