import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_grad, h_scalar
from spdist.blocks import (AggregativeBlock, BlockParams, ConsensusBlock, ConstraintCoupledBlock, DivergenceError,
                           GameBlock, cal_h_rho, grad_h_rho, h_rho, make_block, run_centralized)
from spdist.diagnostics import solve_cc_active_set, solve_consensus_min, solve_game_linear
from spdist.problems import (AggregativeGame, AggregativeProblem, ConsensusProblem, ConstraintCoupledProblem,
                             LinearContribution, QuadraticAggregativeCost, QuadraticCost,
                             generate_quadratic_aggregative, generate_quadratic_cc, generate_quadratic_consensus,
                             generate_quadratic_game)


def test_h_rho_matches_scalar_definition():
    rng = np.random.default_rng(0)
    v, lam = rng.standard_normal((2, 200))
    for rho in (0.5, 0.9, 2.0):
        assert np.allclose(h_rho(v, lam, rho), [h_scalar(a, b, rho) for a, b in zip(v, lam)], atol=0)


def test_h_rho_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    v, lam = rng.standard_normal((2, 6))
    rho = 0.9
    g1, g2 = grad_h_rho(v, lam, rho)
    assert np.allclose(g1, fd_grad(lambda t: cal_h_rho(t, lam, rho), v), atol=1e-6)
    assert np.allclose(g2, fd_grad(lambda t: cal_h_rho(v, t, rho), lam), atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(-50, 50), rho=st.floats(0.05, 20))
def test_h_rho_continuous_on_switching_surface(lam, rho):
    v = -lam / rho
    quad = (v * lam + 0.5 * rho * v * v, lam + rho * v, v)
    flat = (-lam * lam / (2 * rho), 0.0, -lam / rho)
    for a, b in zip(quad, flat):
        assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


def _scalar_cc(gamma=0.1, rho=1.0):
    # min 1/2 x^2 - x  s.t.  x <= 0
    pr = ConstraintCoupledProblem([QuadraticCost([[1.0]], [-1.0])], [[[1.0]]], [[0.0]])
    return ConstraintCoupledBlock(pr, BlockParams(gamma=gamma, nu=1.0, rho=rho))


def test_cc_scalar_fixed_point():
    blk = _scalar_cc()
    chi = np.array([0.0, 1.0])
    assert np.allclose(blk.step(chi, blk.exact_aggregate(chi)), chi, atol=1e-15)
    g1, g2 = grad_h_rho(np.array([0.0]), np.array([1.0]), 1.0)
    assert 0.0 - 1.0 + g1[0] == 0.0 and g2[0] == 0.0


def test_cc_zero_state_aggregate():
    pr = generate_quadratic_cc(4, 2, 2, seed=0)
    blk = ConstraintCoupledBlock(pr)
    agg = blk.exact_aggregate(blk.init_state())
    assert np.allclose(agg["residual"], -pr.b)
    assert np.allclose(agg["lambda_mean"], 0)


@pytest.mark.parametrize("seed", range(3))
def test_cc_oracle_point_is_fixed(seed):
    pr = generate_quadratic_cc(5, 2, 3, seed)
    blk = ConstraintCoupledBlock(pr)
    ref = blk.reference(solve_cc_active_set(pr))
    chi = ref.chi_star
    assert np.max(np.abs(blk.step(chi, blk.exact_aggregate(chi)) - chi)) <= 1e-9


@pytest.mark.parametrize("make", [
    lambda: ConstraintCoupledBlock(generate_quadratic_cc(4, 2, 2, 0), BlockParams(gamma=0.0)),
    lambda: ConsensusBlock(generate_quadratic_consensus(4, 2, 0), BlockParams(gamma=0.0)),
    lambda: AggregativeBlock(generate_quadratic_aggregative(4, 2, 2, 0), BlockParams(gamma=0.0)),
    lambda: GameBlock(generate_quadratic_game(4, 2, 2, 2, 0), BlockParams(gamma=0.0)),
])
def test_zero_step_is_identity(make):
    blk = make()
    chi = np.abs(np.random.default_rng(0).standard_normal(blk.state_dim))
    assert np.array_equal(blk.step(chi, blk.exact_aggregate(chi)), chi)


def test_consensus_two_agents_hand_step():
    # f_1 = 1/2 x^2, f_2 = 1/2 (x - 2)^2, chi = (0, 2): mean 1, grad sum 0
    pr = ConsensusProblem([QuadraticCost([[1.0]], [0.0]), QuadraticCost([[1.0]], [-2.0])])
    blk = ConsensusBlock(pr, BlockParams(gamma=0.5, nu=1.0))
    chi = np.array([0.0, 2.0])
    agg = blk.exact_aggregate(chi)
    assert agg["mean"] == pytest.approx([1.0]) and agg["grad_sum"] == pytest.approx([0.0])
    assert np.allclose(blk.step(chi, agg), [0.5, 1.5])


def test_consensus_identical_state_aggregate():
    pr = generate_quadratic_consensus(5, 3, seed=1)
    blk = ConsensusBlock(pr)
    c = np.array([1.0, -2.0, 0.5])
    assert np.allclose(blk.exact_aggregate(np.tile(c, 5))["mean"], c)


@pytest.mark.parametrize("seed", range(20))
def test_consensus_step_is_gradient_step_on_augmented_cost(seed):
    pr = generate_quadratic_consensus(4, 2, seed=seed)
    blk = ConsensusBlock(pr, BlockParams(gamma=0.1, nu=1.3))
    chi = np.random.default_rng(seed).standard_normal(blk.state_dim)
    step = blk.step(chi, blk.exact_aggregate(chi))
    assert np.max(np.abs(step - (chi - 0.1 * blk.augmented_grad(chi)))) <= 1e-10
    assert np.allclose(blk.augmented_grad(chi), fd_grad(blk.augmented_cost, chi), atol=1e-6)


def test_consensus_fixed_point_at_minimizer():
    pr = generate_quadratic_consensus(4, 2, seed=3)
    blk = ConsensusBlock(pr)
    chi = blk.reference(solve_consensus_min(pr)).chi_star
    assert np.max(np.abs(blk.step(chi, blk.exact_aggregate(chi)) - chi)) <= 1e-12


def test_aggregative_symmetric_origin_is_stationary():
    cost = QuadraticAggregativeCost([[1.0]], [0.0], [[0.0]], [[1.0]])
    pr = AggregativeProblem([cost, cost], [LinearContribution([[1.0]])] * 2)
    blk = AggregativeBlock(pr)
    assert np.array_equal(blk.step(np.zeros(2), blk.exact_aggregate(np.zeros(2))), np.zeros(2))


@pytest.mark.parametrize("seed", range(5))
def test_aggregative_step_matches_finite_difference_gradient(seed):
    pr = generate_quadratic_aggregative(4, 2, 3, seed)
    blk = AggregativeBlock(pr, BlockParams(gamma=0.1))
    x = np.random.default_rng(seed).standard_normal(pr.n)
    step = blk.step(x, blk.exact_aggregate(x))
    assert np.max(np.abs(step - (x - 0.1 * fd_grad(pr.value, x)))) <= 1e-6


def _small_game(b=1e6):
    # J_i = 1/2 x_i^2 + x_i s, phi_i = identity
    cost = QuadraticAggregativeCost([[1.0]], [0.0], [[1.0]])
    return AggregativeGame([cost, cost], [LinearContribution([[1.0]])] * 2, [[[1.0]]] * 2, [[b]] * 2)


def test_game_oracle_is_fixed_point():
    game = generate_quadratic_game(4, 2, 2, 2, seed=0)
    blk = GameBlock(game)
    chi = blk.reference(solve_game_linear(game)).chi_star
    assert np.max(np.abs(blk.step(chi, blk.exact_aggregate(chi)) - chi)) <= 1e-9


def test_small_symmetric_game_fixed_point():
    game = _small_game()
    blk = GameBlock(game)
    sol = solve_game_linear(game)
    # G_i = x_i + s + x_i / 2 with r = 0 -> x = 0
    assert np.allclose(sol.x_star, 0) and np.allclose(sol.lambda_star, 0)
    chi = blk.reference(sol).chi_star
    assert np.max(np.abs(blk.step(chi, blk.exact_aggregate(chi)) - chi)) <= 1e-9


def test_single_agent_game_is_constrained_minimization():
    Q, r, A, b = np.array([[2.0, 0.3], [0.3, 1.0]]), np.array([-1.0, -2.0]), np.array([[1.0, 1.0]]), np.array([0.5])
    game = AggregativeGame([QuadraticAggregativeCost(Q, r, np.zeros((2, 1)))], [LinearContribution(np.zeros((1, 2)))],
                           [A], [b])
    cc = ConstraintCoupledProblem([QuadraticCost(Q, r)], [A], [b])
    sg, sc = solve_game_linear(game), solve_cc_active_set(cc)
    assert np.allclose(sg.x_star, sc.x_star, atol=1e-12)
    chi = GameBlock(game).reference(sg).chi_star
    blk = GameBlock(game)
    assert np.max(np.abs(blk.step(chi, blk.exact_aggregate(chi)) - chi)) <= 1e-9


def test_game_residual_component_matches_constraint_residual():
    from spdist.problems import constraint_residual
    game = generate_quadratic_game(3, 2, 2, 1, seed=2)
    blk = GameBlock(game)
    chi = np.random.default_rng(0).standard_normal(blk.state_dim)
    x, _ = blk.split_state(chi)
    assert np.allclose(blk.exact_aggregate(chi)["residual"], constraint_residual(game, x))


def test_state_dimension_checked():
    blk = ConstraintCoupledBlock(generate_quadratic_cc(3, 2, 1, 0))
    with pytest.raises(ValueError):
        blk.exact_aggregate(np.zeros(3))


def test_negative_initial_multiplier_rejected():
    blk = _scalar_cc()
    with pytest.raises(ValueError):
        run_centralized(blk, 1, init=np.array([0.0, -1.0]))


def test_run_centralized_zero_iterations():
    blk = _scalar_cc()
    tr = run_centralized(blk, 0)
    assert tr.t == [0] and len(tr.states) == 1


def test_run_centralized_divergence_guard():
    # 1-d quadratic with curvature 50 and gamma 0.1: gamma * curvature = 5 > 2
    pr = ConstraintCoupledProblem([QuadraticCost([[50.0]], [1.0])], [[[1.0]]], [[1e6]])
    blk = ConstraintCoupledBlock(pr, BlockParams(gamma=0.1))
    with pytest.raises(DivergenceError) as info:
        run_centralized(blk, 1000)
    assert info.value.trace.diverged


def test_centralized_cc_converges_linearly(cc0):
    from spdist.diagnostics import fit_linear_rate
    _, _, _, block, _, ref = cc0
    tr = run_centralized(block, 3000, reference=ref, record_states=False)
    slope, r2 = fit_linear_rate(tr.array("x_err"))
    assert slope < 0 and tr.x_err[-1] < 1e-6 * tr.x_err[0]


def test_make_block_dispatch():
    assert isinstance(make_block(generate_quadratic_game(3, 1, 1, 1, 0)), GameBlock)
    assert isinstance(make_block(generate_quadratic_cc(3, 1, 1, 0)), ConstraintCoupledBlock)
    with pytest.raises(TypeError):
        make_block(object())
