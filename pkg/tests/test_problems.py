import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_grad
from spdist.problems import (AggregativeProblem, ConsensusProblem, ConstraintCoupledProblem, LinearContribution,
                             QuadraticAggregativeCost, QuadraticCost, constraint_residual, generate_quadratic_aggregative,
                             generate_quadratic_cc, generate_quadratic_consensus, generate_quadratic_game, sigma)


def test_sigma_identity_contributions():
    costs = [QuadraticAggregativeCost(np.eye(1), np.zeros(1), np.zeros((1, 1)), np.eye(1))] * 2
    pr = AggregativeProblem(costs, [LinearContribution(np.eye(1))] * 2)
    assert sigma(pr, np.array([1.0, 3.0])) == pytest.approx([2.0])


def test_constraint_residual_trivial():
    pr = ConstraintCoupledProblem([QuadraticCost(np.eye(1), [0.0])] * 2, [np.eye(1)] * 2, [[1.0], [2.0]])
    assert constraint_residual(pr, np.zeros(2)) == pytest.approx([-3.0])
    assert constraint_residual(pr, np.array([1.0, 2.0])) == pytest.approx([0.0])


def test_rank_deficient_coupling_rejected():
    with pytest.raises(ValueError, match="full row rank"):
        ConstraintCoupledProblem([QuadraticCost(np.eye(1), [0.0])] * 2, [np.ones((2, 1))] * 2, [np.ones(2)] * 2)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        ConstraintCoupledProblem([QuadraticCost(np.eye(2), [0.0, 0.0])], [np.eye(1)], [[1.0]])
    pr = generate_quadratic_cc(3, 2, 1, seed=0)
    with pytest.raises(ValueError):
        constraint_residual(pr, np.zeros(5))


def test_generators_are_deterministic():
    a = generate_quadratic_cc(10, 2, 2, seed=5)
    b = generate_quadratic_cc(10, 2, 2, seed=5)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.Q_blockdiag, b.Q_blockdiag)
    c = generate_quadratic_cc(10, 2, 2, seed=6)
    assert not np.array_equal(a.A, c.A)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), N=st.integers(1, 8), n=st.integers(1, 3), m=st.integers(1, 3))
def test_cc_generator_contract(seed, N, n, m):
    if m > N * n:
        return
    pr = generate_quadratic_cc(N, n, m, seed)
    for c in pr.costs:
        ev = np.linalg.eigvalsh(c.Q)
        assert np.all(ev > 0) and np.all(ev < 1)
    assert np.all((pr.b_stack > 0) & (pr.b_stack < 1))
    assert np.linalg.matrix_rank(pr.A) == m
    assert np.all(np.abs(pr.A) < 1)


def test_cc_gradient_matches_finite_differences():
    pr = generate_quadratic_cc(4, 2, 2, seed=1)
    x = np.random.default_rng(0).standard_normal(pr.n)
    assert np.allclose(pr.grad(x), fd_grad(pr.value, x), atol=1e-6)


def test_consensus_problem_gradient():
    pr = generate_quadratic_consensus(3, 2, seed=0)
    x = np.array([0.3, -1.0])
    assert np.allclose(pr.grad(x), fd_grad(pr.value, x), atol=1e-6)
    assert isinstance(pr, ConsensusProblem)


def test_aggregative_value_finite_difference_shape():
    pr = generate_quadratic_aggregative(4, 2, 3, seed=2)
    assert sigma(pr, np.zeros(pr.n)).shape == (3,)


def test_game_pseudo_gradient_is_strongly_monotone():
    game = generate_quadratic_game(4, 2, 2, 2, seed=0)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x, y = rng.standard_normal((2, game.n))
        assert (game.pseudo_gradient(x) - game.pseudo_gradient(y)) @ (x - y) > 0
