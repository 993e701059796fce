"""Randomised invariants of the convergence factors and the modal solver."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from timedd import ALL_ALGORITHMS, ProblemParams, divergence_margin, rho, rho_at_zero
from timedd.modal_dd import iteration_ratio

nus = st.floats(1e-3, 1e2)
alphas = st.floats(0.1, 0.9)
gammas = st.sampled_from([0.0, 0.5, 1.0, 10.0])
thetas = st.floats(0.05, 1.0)
ds = st.one_of(st.just(0.0), st.floats(1e-4, 1e4))
algs = st.sampled_from(ALL_ALGORITHMS)


def params(nu, gamma, alpha, theta=1.0):
    return ProblemParams(nu=nu, gamma=gamma, alpha=alpha, theta=theta)


@settings(max_examples=200, deadline=None)
@given(algs, nus, gammas, alphas, thetas, ds)
def test_modal_sweep_matches_closed_form(alg, nu, gamma, alpha, theta, d):
    p = params(nu, gamma, alpha, theta)
    assert math.isclose(iteration_ratio(alg, d, p), rho(alg, d, p), rel_tol=1e-8, abs_tol=1e-12)


@settings(max_examples=200, deadline=None)
@given(algs, nus, gammas, alphas, thetas, ds)
def test_rho_is_finite_and_nonnegative(alg, nu, gamma, alpha, theta, d):
    r = rho(alg, d, params(nu, gamma, alpha, theta))
    assert math.isfinite(r) and r >= 0


@settings(max_examples=150, deadline=None)
@given(nus, gammas, alphas, ds)
def test_category_three_mirrors_category_two(nu, gamma, alpha, d):
    # swapping alpha and T - alpha exchanges the two categories only when gamma = 0
    a, b = params(nu, 0.0, alpha), params(nu, 0.0, 1.0 - alpha)
    assert math.isclose(rho("DN3", d, a), rho("ND2", d, b), rel_tol=1e-10, abs_tol=1e-14)
    assert math.isclose(rho("ND3", d, a), rho("DN2", d, b), rel_tol=1e-10, abs_tol=1e-14)


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["DN2", "ND2", "DN3", "ND3"]), nus, gammas, alphas, st.floats(1e-3, 1e3))
def test_margin_sign_agrees_with_rho(alg, nu, gamma, alpha, d):
    p = params(nu, gamma, alpha)
    r = rho(alg, d, p)
    sign, _ = divergence_margin(alg, d, p)
    if abs(r - 1.0) > 1e-12:
        assert sign == np.sign(r - 1.0)


@settings(max_examples=150, deadline=None)
@given(algs, nus, gammas, alphas, thetas)
def test_zero_limit_is_continuous(alg, nu, gamma, alpha, theta):
    p = params(nu, gamma, alpha, theta)
    r0 = rho_at_zero(alg, p)
    slope = (rho(alg, 1e-8, p) - r0) / 1e-8
    # near d = 0 the factor is linear with the slope seen at 1e-8
    assert abs(rho(alg, 1e-12, p) - r0 - 1e-12 * slope) <= 1e-14 * max(1.0, r0) + 1e-2 * 1e-12 * abs(slope)


@settings(max_examples=100, deadline=None)
@given(nus, alphas, st.floats(1e-3, 1e3))
def test_relaxation_is_affine_in_theta(nu, alpha, d):
    p = params(nu, 1.0, alpha)
    for alg in ("DN1", "ND1"):
        # Category I gains lie in [0, 1], so rho(theta) = 1 - theta (1 - rho(1))
        g = 1.0 - rho(alg, d, p, theta=1.0)
        assert math.isclose(rho(alg, d, p, theta=0.5), 1.0 - 0.5 * g, rel_tol=1e-12, abs_tol=1e-15)
