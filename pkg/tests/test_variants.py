import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import descent_inequality_slack, triple_corpus
from threeop.diagnostics import rate_fit
from threeop.errors import DivergenceError, InvalidInputError, LineSearchError, StepsizeError
from threeop.numkit import make_rng
from threeop.operators import (ForwardOperator, ProxOperator, identity_prox, make_quadratic_prox,
                               quadratic_forward, zero_forward)
from threeop.splitting import RelaxationSchedule, SolverState, ThreeOperatorProblem, solve_basic, specialize
from threeop.variants import (AccelConfig, ErgodicAccumulator, ergodic_update, ergodic_weights, find_rho,
                              linesearch_step, next_stepsize_cocoercive, next_stepsize_lipschitz,
                              solve_accelerated, solve_linesearch)


def _state(x_b, x_a=None):
    x_b = np.atleast_1d(np.asarray(x_b, dtype=float))
    x_a = x_b if x_a is None else np.atleast_1d(np.asarray(x_a, dtype=float))
    zero = np.zeros_like(x_b)
    return SolverState(zero, x_b, zero, x_a, zero, zero, 0, 1.0, 0.0)


def strongly_convex_scalar(mu_b=1.0):
    """f = 0, g = μ_B x²/2, h = (x − 1)²/2; minimizer 1/(1 + μ_B)."""
    prob = ThreeOperatorProblem(identity_prox(), make_quadratic_prox([[mu_b]], [0.0], mu_b, mu_b),
                                quadratic_forward([[1.0]], [-1.0], 0.0))
    return prob, np.array([1.0 / (1.0 + mu_b)])


# stepsize rules

def test_cocoercive_rule_constant_without_strong_monotonicity():
    assert next_stepsize_cocoercive(0.37, 0.0, 0.0, 0.5) == pytest.approx(0.37, rel=1e-15)


def test_cocoercive_rule_examples():
    assert next_stepsize_cocoercive(1.0, 0.5, 0.0, 0.5) == pytest.approx(math.sqrt(8) / 4, rel=1e-12)
    assert next_stepsize_cocoercive(1.0, 0.0, 1.0, 0.5) == pytest.approx((math.sqrt(5) - 1) / 2, rel=1e-12)


@settings(max_examples=1000, deadline=None)
@given(st.floats(1e-4, 10), st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 0.99))
def test_cocoercive_rule_identity(gamma, mu_b, mu_c, eta):
    nxt = next_stepsize_cocoercive(gamma, mu_b, mu_c, eta)
    assert nxt > 0
    lhs = (1 + 2 * gamma * mu_b) / gamma**2
    rhs = (1 - 2 * nxt * mu_c * eta) / nxt**2
    assert rhs == pytest.approx(lhs, rel=1e-10)


def test_cocoercive_rule_rejects_bad_input():
    with pytest.raises(StepsizeError):
        next_stepsize_cocoercive(0.0, 1.0, 1.0, 0.5)
    with pytest.raises(InvalidInputError):
        next_stepsize_cocoercive(1.0, -1.0, 0.0, 0.5)


def test_lipschitz_rule_examples():
    assert next_stepsize_lipschitz(0.5, 0.25, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert next_stepsize_lipschitz(1.0, 1.0, 1.0) == pytest.approx(1 / math.sqrt(2), rel=1e-12)
    assert next_stepsize_lipschitz(0.5, 1.0, 1.0) == pytest.approx(0.5 / math.sqrt(1.75), rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 0.99))
def test_lipschitz_rule_nonincreasing(mu_b, l_c, frac):
    gamma = frac * mu_b * 2 / l_c**2 / 2  # keeps μ_B ≥ γL²/2
    seq = [gamma]
    for _ in range(20):
        seq.append(next_stepsize_lipschitz(seq[-1], mu_b, l_c))
    assert all(g > 0 for g in seq)
    assert all(b <= a for a, b in zip(seq, seq[1:]))


def test_lipschitz_rule_requires_strong_monotonicity():
    with pytest.raises(StepsizeError):
        next_stepsize_lipschitz(0.1, 0.0, 1.0)
    with pytest.raises(StepsizeError):
        next_stepsize_lipschitz(2.5, 1.0, 1.0)


# accelerated iteration

def test_accel_config_checks():
    prob, _ = strongly_convex_scalar()
    AccelConfig(0.9, 0.5).check(prob)
    with pytest.raises(StepsizeError):
        AccelConfig(1.0, 0.5).check(prob)
    with pytest.raises(StepsizeError, match="mu_b > 0"):
        AccelConfig(0.1, branch="lipschitz").check(specialize(prob, "fbs"))
    with pytest.raises(InvalidInputError):
        AccelConfig(0.1, branch="other").check(prob)


def test_accelerated_constant_stepsize_matches_basic():
    qt = triple_corpus(1, dim=6, seed=21)[0]
    p = qt.problem
    # strip the strong monotonicity metadata so the stepsize stays constant
    prob = ThreeOperatorProblem(ProxOperator(p.a.resolvent), ProxOperator(p.b.resolvent),
                                ForwardOperator(p.c.forward, p.c.beta))
    gamma = 0.9 * prob.c.beta
    z0 = make_rng(21).standard_normal(6)
    _, acc = solve_accelerated(prob, AccelConfig(gamma, 0.5), z0, 60, 0.0, keep_states=True)
    _, basic = solve_basic(prob, RelaxationSchedule.default(prob.c.beta, gamma), z0, 60, 0.0, keep_states=True)
    for a, b in zip(acc.states, basic.states):
        np.testing.assert_allclose(a.x_b, b.x_b, atol=1e-12)
        np.testing.assert_allclose(a.z, b.z, atol=1e-12)
    assert np.all(acc.column("gamma_k") == gamma)


def test_accelerated_scalar_rate_and_inequality():
    prob, x_star = strongly_convex_scalar()
    _, trace = solve_accelerated(prob, AccelConfig(0.9, 0.5), [3.0], 10_000, 0.0, reference=x_star,
                                 keep_states=True)
    assert rate_fit(trace.column("dist_ref") ** 2, 100, 10_000) <= -1.8
    u_star = prob.b.mu * x_star
    assert descent_inequality_slack(trace.states, x_star, u_star, prob.b.mu, prob.c.mu_c, prob.c.beta, 0.5) <= 1e-10
    gam = trace.column("gamma_k")
    assert np.all(np.diff(gam) < 0)


def test_accelerated_lipschitz_branch_converges():
    prob, x_star = strongly_convex_scalar(2.0)
    state, trace = solve_accelerated(prob, AccelConfig(0.5, branch="lipschitz"), [3.0], 5000, 1e-14,
                                     reference=x_star)
    assert rate_fit(trace.column("dist_ref") ** 2, 100, 5000) <= -1.8
    assert abs(state.x_b[0] - x_star[0]) <= 1e-6


def test_accelerated_rejects_invalid_config():
    prob, _ = strongly_convex_scalar()
    with pytest.raises(StepsizeError):
        solve_accelerated(prob, AccelConfig(5.0), [0.0])


# line search

def test_find_rho_zero_h():
    rho, _ = find_rho(identity_prox(), zero_forward(), 1.0, np.array([0.3]), np.array([2.0]))
    assert rho == 1.0


@pytest.mark.parametrize("gamma, expected", [(0.5, 1.0), (4.0, 0.25)])
def test_find_rho_quadratic(gamma, expected):
    h = quadratic_forward([[1.0]], [0.0])
    rho, x_a = find_rho(identity_prox(), h, gamma, np.array([0.0]), np.array([1.0]))
    assert rho == expected
    np.testing.assert_allclose(x_a, [1.0 + rho * 1.0 - gamma * rho * 1.0])


def test_find_rho_needs_value_and_can_fail():
    grad_only = ForwardOperator(lambda x: np.zeros_like(x), 1.0)
    with pytest.raises(InvalidInputError):
        find_rho(identity_prox(), grad_only, 1.0, np.zeros(1), np.zeros(1))
    step_h = ForwardOperator(lambda x: np.zeros_like(x), 1.0, value=lambda x: float(x[0] > 0))
    with pytest.raises(LineSearchError):
        find_rho(identity_prox(), step_h, 1.0, np.array([-1.0]), np.array([0.0]))


def test_linesearch_fixed_point_invariance():
    for qt in triple_corpus(5, seed=31):
        gamma = 1.5 * qt.problem.c.beta
        z_star = qt.z_star(gamma)
        for rho in (1.0, 0.5, 0.25):
            z_next, _, _ = linesearch_step(qt.problem, gamma, z_star, rho)
            assert np.linalg.norm(z_next - z_star) <= 1e-10


def test_linesearch_agrees_with_basic():
    for qt in triple_corpus(5, seed=32):
        beta = qt.problem.c.beta
        sb, _ = solve_basic(qt.problem, None, np.zeros(10), 10_000, 1e-12)
        sl, tr = solve_linesearch(qt.problem, beta, np.zeros(10), 10_000, 1e-12)
        assert tr.converged
        assert np.linalg.norm(sb.x_b - sl.x_b) <= 1e-6
        assert len(tr.extra["rho"]) == len(tr)


def test_linesearch_without_h_is_drs():
    qt = triple_corpus(1, dim=6, seed=33)[0]
    drs = specialize(qt.problem, "drs")
    z0 = make_rng(33).standard_normal(6)
    _, basic = solve_basic(drs, RelaxationSchedule.default(math.inf, 0.7), z0, 50, 0.0, keep_states=True)
    _, ls = solve_linesearch(drs, 0.7, z0, 50, 0.0, keep_states=True)
    assert all(r == 1.0 for r in ls.extra["rho"])
    for a, b in zip(basic.states, ls.states):
        np.testing.assert_allclose(a.z, b.z, rtol=0, atol=1e-14)


def test_linesearch_divergence_monitor():
    expanding = ProxOperator(lambda g, z: 3.0 * np.asarray(z, dtype=float))
    prob = ThreeOperatorProblem(expanding, identity_prox(), zero_forward())
    with pytest.raises(DivergenceError):
        solve_linesearch(prob, 1.0, np.array([1.0]), 10_000, 0.0)


# ergodic averaging

def test_uniform_average_of_two_points():
    acc = ErgodicAccumulator("uniform")
    for x in (2.0, 0.0):
        ergodic_update(acc, _state(x), 1.0)
    np.testing.assert_allclose(acc.x_b, [1.0])


def test_weighted_average_of_two_points():
    acc = ErgodicAccumulator("weighted")
    for x in (2.0, 0.0):
        ergodic_update(acc, _state(x), 1.0)
    np.testing.assert_allclose(acc.x_b, [2.0 / 3.0], atol=1e-15)


def test_weighted_weights_at_k2():
    w = ergodic_weights("weighted", 2)
    np.testing.assert_allclose(w, [1 / 6, 1 / 3, 1 / 2])
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("mode", ["uniform", "weighted"])
def test_weights_are_convex_combinations(mode):
    lambdas = make_rng(5).uniform(0.1, 1.5, 500)
    for k in range(500):
        w = ergodic_weights(mode, k, lambdas[: k + 1] if mode == "uniform" else None)
        assert np.all(w >= 0)
        assert abs(w.sum() - 1) <= 1e-12


@pytest.mark.parametrize("mode", ["uniform", "weighted"])
def test_incremental_average_matches_direct(mode):
    rng = make_rng(6)
    xs = rng.standard_normal((101, 3))
    lambdas = rng.uniform(0.2, 1.2, 101) if mode == "uniform" else np.ones(101)
    acc = ErgodicAccumulator(mode)
    for k in range(101):
        ergodic_update(acc, _state(xs[k], 2 * xs[k]), lambdas[k])
        if k in (1, 10, 100):
            w = ergodic_weights(mode, k, lambdas[: k + 1])
            np.testing.assert_allclose(acc.x_b, w @ xs[: k + 1], atol=1e-12)
            np.testing.assert_allclose(acc.x_a, 2 * (w @ xs[: k + 1]), atol=1e-12)


def test_weighted_average_rejects_varying_lambda():
    acc = ErgodicAccumulator("weighted")
    ergodic_update(acc, _state(1.0), 1.0)
    with pytest.raises(InvalidInputError):
        ergodic_update(acc, _state(1.0), 0.5)
    with pytest.raises(InvalidInputError):
        ErgodicAccumulator("median")


def test_solve_basic_averaging_records_objective():
    qt = triple_corpus(1)[0]
    _, trace = solve_basic(qt.problem, None, np.zeros(10), 30, 0.0, averaging="weighted")
    acc = trace.meta["ergodic"]
    assert acc.k == 29
    assert len(trace.extra["ergodic_objective"]) == 30
