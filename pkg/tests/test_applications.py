import math

import numpy as np
import pytest

from threeop.applications import (QpSpec, observations_from_mask, solve_constrained_qp, solve_matrix_completion,
                                  solve_multi_reg, solve_primal_dual, solve_split_feasibility, solve_three_objective)
from threeop.corpus import quadratic_triple
from threeop.errors import InvalidInputError, StepsizeError
from threeop.numkit import make_rng, solve_spd
from threeop.operators import (identity_prox, project_box, project_halfspace, project_hyperplane,
                               project_simplex, prox_l1, quadratic_forward, zero_forward)
from threeop.splitting import RelaxationSchedule, ThreeOperatorProblem, solve_basic

WHOLE_LINE = project_box(-math.inf, math.inf)


def half_square(target):
    target = np.atleast_1d(np.asarray(target, dtype=float))
    return quadratic_forward(np.eye(target.size), -target)


# split feasibility

def test_feasibility_whole_space_is_fixed():
    z0 = np.array([0.3, -1.2])
    x, trace = solve_split_feasibility(identity_prox(), identity_prox(), identity_prox(), np.eye(2), 0.5, z0=z0)
    assert trace.records[0].fpr_sq == 0.0
    np.testing.assert_array_equal(x, z0)


def test_feasibility_interval_intersection():
    x, trace = solve_split_feasibility(project_box(0, 2), project_box(1, 3), WHOLE_LINE, [[1.0]], 1.0,
                                       z0=np.array([5.0]))
    assert 1.0 - 1e-9 <= x[0] <= 2.0 + 1e-9
    assert trace.meta["distance_c3"] == 0.0


def test_feasibility_scaled_constraint_pins_point():
    x, trace = solve_split_feasibility(project_box(0, 2), project_box(1, 3), project_box(0, 2), [[2.0]], 0.4,
                                       z0=np.array([3.0]), tol=1e-12)
    assert x[0] == pytest.approx(1.0, abs=1e-8)
    assert trace.meta["distance_c3"] <= 1e-8


def test_feasibility_rejects_large_gamma():
    with pytest.raises(StepsizeError):
        solve_split_feasibility(project_box(0, 2), project_box(1, 3), WHOLE_LINE, [[2.0]], 0.5, z0=np.zeros(1))


@pytest.mark.parametrize("seed", range(5))
def test_feasibility_certificate(seed):
    rng = make_rng(seed)
    dim, rows = 4, 3
    point = rng.uniform(-1, 1, dim)
    lmat = rng.standard_normal((rows, dim))
    c1 = project_box(point - 1, point + 1)
    normal = rng.standard_normal(dim)
    c2 = project_halfspace(normal, float(normal @ point) - 0.5)
    y = lmat @ point
    c3 = project_box(y - 0.3, y + 0.3)
    x, trace = solve_split_feasibility(c1, c2, c3, lmat, z0=rng.standard_normal(dim) * 5, tol=1e-12,
                                       max_iter=200_000)
    assert np.linalg.norm(x - c1(1, x)) <= 1e-6
    assert np.linalg.norm(x - c2(1, x)) <= 1e-6
    assert trace.meta["distance_c3"] <= 1e-6


# three objective

def test_three_objective_pure_gradient():
    a = np.array([1.0, -2.0, 0.5])
    x, _ = solve_three_objective(identity_prox(), identity_prox(), None, half_square(a), z0=np.zeros(3))
    np.testing.assert_allclose(x, a, atol=1e-9)


def test_three_objective_nonnegative_orthant_one_step():
    x, trace = solve_three_objective(project_box(0, math.inf), identity_prox(), None, half_square(1.0),
                                     gamma=1.0, z0=np.zeros(1), keep_states=True)
    assert trace.states[0].x_a[0] == 1.0
    assert trace.meta["status"] == "converged"
    assert x[0] == 1.0


@pytest.mark.parametrize("weight, expected", [(0.5, 0.2), (1.0, 0.0)])
def test_three_objective_l1_and_interval(weight, expected):
    # minimizer of weight·|x| + ι_{[−0.2, 0.2]} + (x − 1)²/2
    x, _ = solve_three_objective(prox_l1(weight), project_box(-0.2, 0.2), None, half_square(1.0),
                                 z0=np.zeros(1), tol=1e-13)
    assert x[0] == pytest.approx(expected, abs=1e-9)
    grid = np.linspace(-0.2, 0.2, 40001)
    assert x[0] == pytest.approx(grid[np.argmin(weight * np.abs(grid) + 0.5 * (grid - 1) ** 2)], abs=1e-5)


def test_three_objective_with_linear_map():
    rng = make_rng(3)
    lmat = rng.standard_normal((5, 3))
    target = rng.standard_normal(5)
    x, _ = solve_three_objective(identity_prox(), identity_prox(), lmat, half_square(target), tol=1e-12)
    np.testing.assert_allclose(x, np.linalg.lstsq(lmat, target, rcond=None)[0], atol=1e-8)


def test_three_objective_requires_start_without_map():
    with pytest.raises(InvalidInputError):
        solve_three_objective(identity_prox(), identity_prox(), None, half_square(1.0))


# multiple regularizers

def test_multi_reg_single_block_matches_three_objective():
    rng = make_rng(4)
    lmat = rng.standard_normal((4, 3))
    grad_h = half_square(rng.standard_normal(4))
    reg = prox_l1(0.3)
    z0 = rng.standard_normal(3)
    _, tr_m = solve_multi_reg([reg], lmat, grad_h, gamma=0.05, z0s=[z0], max_iter=200, tol=0.0, keep_iterates=True)
    _, tr_t = solve_three_objective(reg, identity_prox(), lmat, grad_h, gamma=0.05, z0=z0, max_iter=200, tol=0.0,
                                    keep_states=True)
    for x, st in zip(tr_m.extra["x"], tr_t.states):
        np.testing.assert_allclose(x, st.x_b, atol=1e-12)


def test_multi_reg_zero_regularizers_minimize_h():
    rng = make_rng(5)
    lmat = rng.standard_normal((6, 3))
    target = rng.standard_normal(6)
    x, trace = solve_multi_reg([identity_prox(), identity_prox()], lmat, half_square(target), tol=1e-12)
    assert trace.meta["status"] == "converged"
    np.testing.assert_allclose(x, np.linalg.lstsq(lmat, target, rcond=None)[0], atol=1e-8)


def test_multi_reg_three_regularizers_objective():
    rng = make_rng(6)
    dim = 4
    lmat = rng.standard_normal((5, dim))
    grad_h = half_square(rng.standard_normal(5))
    regs = [project_box(0.0, 0.6), prox_l1(0.1), project_simplex()]
    x, trace = solve_multi_reg(regs, lmat, grad_h, tol=1e-9, max_iter=200_000)
    x_ref, ref = solve_multi_reg(regs, lmat, grad_h, tol=1e-14, max_iter=2_000_000)
    assert abs(trace.records[-1].objective - ref.records[-1].objective) <= 1e-6
    assert np.linalg.norm(x - x_ref) <= 1e-6
    assert abs(x_ref.sum() - 1) <= 1e-6 and x_ref.min() >= -1e-6 and x_ref.max() <= 0.6 + 1e-6


def test_multi_reg_block_mismatch():
    with pytest.raises(InvalidInputError):
        solve_multi_reg([identity_prox(), identity_prox()], np.eye(2), half_square([0, 0]), z0s=[np.zeros(2)])
    with pytest.raises(InvalidInputError):
        solve_multi_reg([], np.eye(2), half_square([0, 0]))


# matrix completion

def test_completion_full_observation_reproduces_data():
    x0 = make_rng(7).uniform(0, 1, (4, 3))
    obs = observations_from_mask(x0, np.ones((4, 3), dtype=bool))
    x, trace = solve_matrix_completion(obs, 0.0, 0.0, 1.0, 4, 3, tol=1e-12)
    np.testing.assert_allclose(x, x0, atol=1e-10)
    assert trace.extra["rmse"][-1] <= 1e-10


def test_completion_large_weight_annihilates():
    x0 = make_rng(8).uniform(0, 1, (4, 3))
    obs = observations_from_mask(x0, np.ones((4, 3), dtype=bool))
    big = 2 * np.linalg.norm(x0, 2)
    x, _ = solve_matrix_completion(obs, big, 0.0, 1.0, 4, 3, tol=1e-12)
    np.testing.assert_allclose(x, 0.0, atol=1e-9)


def test_completion_low_rank_rmse_against_reference():
    rng = make_rng(9)
    x0 = rng.standard_normal((20, 2)) @ rng.standard_normal((2, 15))
    mask = rng.uniform(size=x0.shape) < 0.6
    obs = observations_from_mask(x0, mask)
    bound = float(np.abs(x0).max())
    _, trace = solve_matrix_completion(obs, 0.05, -bound, bound, 20, 15, tol=1e-6, max_iter=20_000)
    _, ref = solve_matrix_completion(obs, 0.05, -bound, bound, 20, 15, tol=1e-10, max_iter=100_000)
    assert abs(trace.extra["rmse"][-1] - ref.extra["rmse"][-1]) <= 1e-3


def test_completion_input_errors():
    with pytest.raises(InvalidInputError):
        solve_matrix_completion([], 0.0, 0, 1, 2, 2)
    with pytest.raises(InvalidInputError):
        solve_matrix_completion([(5, 0, 1.0)], 0.0, 0, 1, 2, 2)
    with pytest.raises(InvalidInputError):
        solve_matrix_completion([(0, 0, 1.0)], -1.0, 0, 1, 2, 2)
    with pytest.raises(InvalidInputError):
        observations_from_mask(np.zeros((2, 2)), np.ones((2, 3), dtype=bool))


# constrained QP

def test_qp_simplex_and_halfspace():
    spec = QpSpec(np.eye(2), np.array([-1.0, -1.0]), project_simplex(), project_halfspace([1.0, 1.0], 1.0))
    x, _ = solve_constrained_qp(spec, tol=1e-12)
    np.testing.assert_allclose(x, [0.5, 0.5], atol=1e-9)


def test_qp_clamped_minimizer():
    spec = QpSpec(np.eye(1), np.array([-1.0]), project_box(0, 0.5), WHOLE_LINE)
    x, _ = solve_constrained_qp(spec, tol=1e-12)
    assert x[0] == pytest.approx(0.5, abs=1e-9)


def test_qp_unconstrained_matches_linear_solve():
    rng = make_rng(10)
    a = rng.standard_normal((5, 5))
    q = a @ a.T + np.eye(5)
    c = rng.standard_normal(5)
    whole = project_box(-math.inf, math.inf)
    x, _ = solve_constrained_qp(QpSpec(q, c, whole, whole), tol=1e-12, max_iter=500_000)
    np.testing.assert_allclose(x, solve_spd(q, -c), atol=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_qp_projected_gradient_stationarity(seed):
    rng = make_rng(20 + seed)
    a = rng.standard_normal((4, 4))
    q, c = a @ a.T + 0.1 * np.eye(4), rng.standard_normal(4) * 3
    box = project_box(-0.5, 0.5)
    x, _ = solve_constrained_qp(QpSpec(q, c, box, project_box(-math.inf, math.inf)), tol=1e-12,
                                max_iter=500_000)
    assert np.linalg.norm(x - box(1, x - (q @ x + c))) <= 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_qp_preconditioning_invariance(seed):
    rng = make_rng(30 + seed)
    a = rng.standard_normal((4, 4))
    q, c = a @ a.T + 0.1 * np.eye(4), rng.standard_normal(4)
    box = project_box(-1.0, 1.0)
    plane = project_hyperplane(rng.standard_normal(4), 0.0)
    x_plain, _ = solve_constrained_qp(QpSpec(q, c, box, plane), tol=1e-12, max_iter=500_000)
    x_pre, _ = solve_constrained_qp(QpSpec(q, c, box, plane, True), tol=1e-12, max_iter=500_000)
    np.testing.assert_allclose(x_plain, x_pre, atol=1e-6)


def test_qp_input_validation():
    with pytest.raises(InvalidInputError):
        QpSpec(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2), WHOLE_LINE, WHOLE_LINE).effective_q()
    with pytest.raises(InvalidInputError):
        QpSpec(np.eye(2), np.zeros(2), WHOLE_LINE, project_box(0, 1), True).effective_q()
    with pytest.raises(StepsizeError):
        solve_constrained_qp(QpSpec(2 * np.eye(1), np.zeros(1), WHOLE_LINE, WHOLE_LINE), gamma=1.0)


# primal-dual forms

def test_primal_dual_without_forward_term_variants_agree():
    rng = make_rng(11)
    problem = ThreeOperatorProblem(project_box(-0.3, 0.3), prox_l1(0.2), zero_forward())
    x0, y0 = rng.standard_normal(3), rng.standard_normal(3)
    _, _, a = solve_primal_dual(problem, 0.7, 1 / 0.7, x0, y0, "fbs_pd", 100, 0.0, keep_iterates=True)
    _, _, b = solve_primal_dual(problem, 0.7, None, x0, y0, "equivalent_form", 100, 0.0, keep_iterates=True)
    for key in ("x", "y"):
        for u, v in zip(a.extra[key], b.extra[key]):
            np.testing.assert_array_equal(u, v)


@pytest.mark.parametrize("seed", range(10))
def test_equivalent_form_tracks_basic_iteration(seed):
    qt = quadratic_triple(make_rng(seed), 6)
    gamma = qt.problem.c.beta
    sched = RelaxationSchedule.default(qt.problem.c.beta, gamma)
    _, tr = solve_basic(qt.problem, sched, make_rng(seed, 1).standard_normal(6), 60, 0.0, keep_states=True)
    s0 = tr.states[0]
    _, _, pd = solve_primal_dual(qt.problem, gamma, None, s0.x_b, s0.u_a, "equivalent_form", 59, 0.0,
                                 keep_iterates=True)
    for st, x, y in zip(tr.states, pd.extra["x"], pd.extra["y"]):
        np.testing.assert_allclose(x, st.x_b, atol=1e-12)
        np.testing.assert_allclose(y, st.u_a, atol=1e-12)


def test_zeroed_correction_reproduces_fbs_pd():
    qt = quadratic_triple(make_rng(12), 5)
    x0, y0 = make_rng(12, 1).standard_normal(5), make_rng(12, 2).standard_normal(5)
    tau = 0.4
    _, _, a = solve_primal_dual(qt.problem, tau, 1 / tau, x0, y0, "fbs_pd", 80, 0.0, keep_iterates=True)
    _, _, b = solve_primal_dual(qt.problem, tau, None, x0, y0, "equivalent_form", 80, 0.0, correction=False,
                                keep_iterates=True)
    for u, v in zip(a.extra["x"] + a.extra["y"], b.extra["x"] + b.extra["y"]):
        np.testing.assert_allclose(u, v, atol=1e-12)


def test_primal_dual_scalar_variants_share_solution():
    qt = quadratic_triple(make_rng(13), 1)
    beta = qt.problem.c.beta
    x_a, _, ta = solve_primal_dual(qt.problem, beta, 1 / beta, np.zeros(1), None, "fbs_pd", 100_000, 1e-13)
    x_b, _, tb = solve_primal_dual(qt.problem, beta, None, np.zeros(1), None, "equivalent_form", 100_000, 1e-13)
    assert ta.meta["status"] == tb.meta["status"] == "converged"
    np.testing.assert_allclose(x_a, qt.x_star, atol=1e-8)
    np.testing.assert_allclose(x_b, qt.x_star, atol=1e-8)


def test_primal_dual_stepsize_checks():
    problem = ThreeOperatorProblem(identity_prox(), identity_prox(), zero_forward())
    with pytest.raises(StepsizeError):
        solve_primal_dual(problem, 0.0, 1.0, np.zeros(1))
    with pytest.raises(StepsizeError):
        solve_primal_dual(problem, 1.0, -1.0, np.zeros(1))
    with pytest.raises(StepsizeError):
        solve_primal_dual(problem, 1.0, 2.0, np.zeros(1), variant="equivalent_form")
    with pytest.raises(InvalidInputError):
        solve_primal_dual(problem, 1.0, 1.0, np.zeros(1), variant="other")
