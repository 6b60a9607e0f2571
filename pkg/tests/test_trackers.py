import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spdist.graph import Graph, erdos_renyi, metropolis_weights
from spdist.trackers import (Cascade, ExactAverage, PerturbedConsensus, PIDac, RAdmmDac, SpectralGateError,
                             TrackerNotConverged, disagreement_basis, tracker_fixed_point_error)


def test_perturbed_two_agent_hand_iteration():
    tr = PerturbedConsensus(np.full((2, 2), 0.5))
    u = np.array([[0.0], [2.0]])
    z, est = tr.step(u, tr.init_state(u))
    assert np.allclose(z, [[1.0], [-1.0]])
    assert np.allclose(est, [[1.0], [1.0]])


def test_perturbed_constant_signals_are_fixed():
    W = metropolis_weights(Graph.cycle(5))
    tr = PerturbedConsensus(W)
    u = np.full((5, 2), 3.0)
    z, est = tr.step(u, tr.init_state(u))
    assert np.allclose(z, 0) and np.allclose(est, 3.0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 10), a=st.integers(1, 3))
def test_perturbed_preserves_state_sum(seed, n, a):
    W = metropolis_weights(erdos_renyi(n, 0.6, seed))
    tr = PerturbedConsensus(W)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, a))
    for _ in range(20):
        u = rng.standard_normal((n, a))
        z_next = tr.update(u, z)
        assert np.allclose(z_next.sum(axis=0), z.sum(axis=0), atol=1e-10)
        z = z_next


def test_non_doubly_stochastic_rejected():
    with pytest.raises(ValueError):
        PerturbedConsensus(np.array([[0.9, 0.1], [0.5, 0.5]]))


def test_pi_identical_signals_fixed_point():
    tr = PIDac(metropolis_weights(Graph.path(4)))
    u = np.full((4, 1), -1.5)
    p, q = tr.update(u, (u.copy(), np.zeros_like(u)))
    assert np.allclose(p, u) and np.allclose(q, 0)


def test_pi_converges_on_static_signals():
    W = metropolis_weights(erdos_renyi(8, 0.4, seed=2))
    tr = PIDac(W)
    u = np.random.default_rng(0).standard_normal((8, 2))
    state = tr.init_state(u)
    for _ in range(10**4):
        state = tr.update(u, state)
    assert np.max(np.abs(tr.estimate(u, state) - u.mean(axis=0))) <= 1e-6


def test_pi_without_integral_gain_keeps_q_zero():
    tr = PIDac(metropolis_weights(Graph.path(3)), k_i=0.0)
    u = np.arange(3.0)[:, None]
    state = tr.init_state(u)
    for _ in range(50):
        state = tr.update(u, state)
    assert np.array_equal(state[1], np.zeros((3, 1)))


def test_pi_spectral_gate_names_the_check():
    W = metropolis_weights(Graph.complete(6))
    with pytest.raises(SpectralGateError, match="spectral gate"):
        PIDac(W, k_p=10.0)


def test_pi_printed_integral_sign_is_unstable():
    # q+ = q + k_i L p paired with + k_i L q in p: the disagreement modes grow
    W = metropolis_weights(erdos_renyi(10, 0.3, seed=0))
    tr = PIDac(W)
    N, L = 10, tr.L
    M = tr.iteration_matrix().copy()
    M[N:, :N] = tr.k_i * L
    T = np.kron(np.eye(2), disagreement_basis(N))
    assert np.max(np.abs(np.linalg.eigvals(T @ M @ T.T))) > 1
    assert tr.spectral_radius() < 1


def test_radmm_zero_state_proxies():
    g = Graph.path(3)
    tr = RAdmmDac(g, rho=0.9)
    u = np.array([[1.0], [2.0], [3.0]])
    assert np.allclose(tr.estimate(u, tr.init_state(u)), u / (1 + 0.9 * g.degrees[:, None]))


def test_radmm_single_agent():
    tr = RAdmmDac(Graph(1, ()))
    u = np.array([[4.0, -1.0]])
    state = tr.init_state(u)
    for _ in range(5):
        state, est = tr.step(u, state)
        assert np.array_equal(est, u)


def test_radmm_converges_on_static_signals():
    g = erdos_renyi(8, 0.4, seed=5)
    tr = RAdmmDac(g)
    u = np.random.default_rng(1).standard_normal((8, 3))
    state = tr.init_state(u)
    for _ in range(10**4):
        state = tr.update(u, state)
    assert np.max(np.abs(tr.estimate(u, state) - u.mean(axis=0))) <= 1e-6


def test_radmm_parameter_ranges():
    with pytest.raises(ValueError):
        RAdmmDac(Graph.path(3), beta=1.0)
    with pytest.raises(ValueError):
        RAdmmDac(Graph.path(3), rho=0.0)


def test_exact_average():
    u = np.array([[1.0], [3.0]])
    assert np.allclose(ExactAverage().estimate(u, None), 2.0)


def test_cascade_graph_mismatch():
    a = PerturbedConsensus(metropolis_weights(Graph.path(4)))
    b = PerturbedConsensus(metropolis_weights(Graph.cycle(4)))
    with pytest.raises(ValueError, match="different graphs"):
        Cascade(a, b)
    with pytest.raises(ValueError):
        Cascade(a, PerturbedConsensus(metropolis_weights(Graph.path(5))))


def test_cascade_reproduces_composite_aggregate():
    W = metropolis_weights(erdos_renyi(6, 0.5, seed=1))
    rng = np.random.default_rng(3)
    u = rng.standard_normal((6, 2))
    C = rng.standard_normal((6, 2, 2))
    outer = lambda est: np.einsum("ijk,ik->ij", C, est) + np.sin(est)  # noqa: E731
    err = tracker_fixed_point_error(Cascade(PerturbedConsensus(W), PerturbedConsensus(W)), u, outer)
    assert err <= 1e-8


def test_fixed_point_error_rejects_disconnected_graph():
    g = Graph(4, ((0, 1), (2, 3)))
    u = np.array([[0.0], [0.0], [1.0], [1.0]])
    with pytest.raises(TrackerNotConverged):
        tracker_fixed_point_error(PerturbedConsensus(metropolis_weights(g)), u, atol=1e-8)


def test_fixed_point_error_budget():
    W = metropolis_weights(Graph.path(6))
    with pytest.raises(TrackerNotConverged):
        tracker_fixed_point_error(PerturbedConsensus(W), np.arange(6.0), max_iter=3)


def test_local_state_slices():
    g = Graph.path(3)
    tr = RAdmmDac(g)
    state = np.arange(4.0)[:, None]
    assert tr.local_state(state, 1).shape == (2, 1)
    pi = PIDac(metropolis_weights(g))
    assert pi.local_state((np.ones((3, 1)), np.zeros((3, 1))), 0).tolist() == [1.0, 0.0]


def test_disagreement_basis_orthonormal():
    T = disagreement_basis(7)
    assert np.allclose(T @ T.T, np.eye(6), atol=1e-14)
    assert np.allclose(T @ np.ones(7), 0, atol=1e-14)
