"""Dynamic average consensus trackers.

Every tracker works on per-agent signals ``u`` of shape ``(N, a)`` and exposes

* ``init_state(u)``: the admissible initial state,
* ``estimate(u, state)``: each agent's proxy of ``mean(u)``, shape ``(N, a)``,
* ``update(u, state)``: one synchronous round, returning the next state,
* ``step(u, state)``: ``update`` followed by ``estimate`` at the new state.

Agent ``i``'s part of a state is returned by ``local_state(state, i)``.
"""

import numpy as np

from .validation import check_agent_array, check_doubly_stochastic, check_interval, check_positive


class TrackerNotConverged(RuntimeError):
    def __init__(self, iters, error):
        super().__init__(f"tracker not stationary after {iters} iterations (proxy error {error:.3e})")
        self.iters = iters
        self.error = error


class SpectralGateError(ValueError):
    """PI-DAC gains make the disagreement dynamics non-contractive."""


def disagreement_basis(n_agents):
    """Rows form an orthonormal basis of ``{v : 1'v = 0}`` (Householder construction)."""
    if n_agents == 1:
        return np.zeros((0, 1))
    e = np.ones(n_agents) / np.sqrt(n_agents)
    v = e.copy()
    v[0] -= 1.0
    H = np.eye(n_agents) - 2.0 * np.outer(v, v) / (v @ v)
    return H[1:]


class Tracker:
    n_agents = None

    def init_state(self, u):
        raise NotImplementedError

    def estimate(self, u, state):
        raise NotImplementedError

    def update(self, u, state):
        raise NotImplementedError

    def step(self, u, state):
        state = self.update(u, state)
        return state, self.estimate(u, state)

    def local_state(self, state, i):
        return state[i]

    def _signals(self, u):
        if self.n_agents is None:
            return np.asarray(u, dtype=float)
        return check_agent_array(u, self.n_agents)


class ExactAverage(Tracker):
    """Stand-in for a central aggregator: every proxy is the true mean."""

    def init_state(self, u):
        return None

    def estimate(self, u, state):
        u = np.asarray(u, dtype=float)
        return np.broadcast_to(u.mean(axis=0), u.shape).copy()

    def update(self, u, state):
        return None

    def local_state(self, state, i):
        return None


class PerturbedConsensus(Tracker):
    """Causal perturbed consensus: ``z+ = W(z + u) - u``, proxy ``u + z``.

    Requires ``1'z = 0`` at start, which :meth:`init_state` provides.
    """

    def __init__(self, W):
        self.W = check_doubly_stochastic(W, atol=1e-10)
        self.n_agents = self.W.shape[0]

    def init_state(self, u):
        u = self._signals(u)
        return np.zeros_like(u)

    def estimate(self, u, state):
        return self._signals(u) + state

    def update(self, u, state):
        u = self._signals(u)
        return self.W @ (state + u) - u


class PIDac(Tracker):
    """Discretized proportional-integral dynamic average consensus.

    ``p+ = (1 - gamma) p - k_p L p + k_i L q + gamma u`` and
    ``q+ = q - k_i L p`` with ``L = I - W``; the proxy is ``p``.
    """

    def __init__(self, W, gamma=0.1, k_p=0.4, k_i=0.1, check=True):
        self.W = check_doubly_stochastic(W, atol=1e-10)
        self.n_agents = self.W.shape[0]
        self.gamma = check_interval(gamma, "gamma", 0.0, 1.0, closed=(False, False))
        self.k_p = check_positive(k_p, "k_p")
        self.k_i = check_positive(k_i, "k_i", strict=False)
        self.L = np.eye(self.n_agents) - self.W
        if check:
            rho = self.spectral_radius()
            if rho >= 1.0:
                raise SpectralGateError(
                    f"PI-DAC spectral gate failed: disagreement spectral radius {rho:.6f} >= 1 "
                    f"(gamma={gamma}, k_p={k_p}, k_i={k_i})")

    def iteration_matrix(self):
        """Linear map ``(p, q) -> (p+, q+)`` for scalar signals, with ``u = 0``."""
        N, L = self.n_agents, self.L
        I = np.eye(N)
        return np.block([
            [(1.0 - self.gamma) * I - self.k_p * L, self.k_i * L],
            [-self.k_i * L, I],
        ])

    def spectral_radius(self):
        """Spectral radius of the iteration matrix restricted to the disagreement subspace.

        With ``k_i = 0`` the integral state is frozen and decoupled, so only the
        proportional block is checked.
        """
        T = disagreement_basis(self.n_agents)
        if T.shape[0] == 0:
            return 0.0
        if self.k_i == 0:
            N = self.n_agents
            M = T @ ((1.0 - self.gamma) * np.eye(N) - self.k_p * self.L) @ T.T
            return float(np.max(np.abs(np.linalg.eigvals(M))))
        P = np.kron(np.eye(2), T)
        M = P @ self.iteration_matrix() @ P.T
        return float(np.max(np.abs(np.linalg.eigvals(M))))

    def init_state(self, u):
        u = self._signals(u)
        return u.copy(), np.zeros_like(u)

    def estimate(self, u, state):
        return state[0]

    def update(self, u, state):
        u = self._signals(u)
        p, q = state
        Lp = self.L @ p
        p_next = (1.0 - self.gamma) * p - self.k_p * Lp + self.k_i * (self.L @ q) + self.gamma * u
        q_next = q - self.k_i * Lp
        return p_next, q_next

    def local_state(self, state, i):
        return np.concatenate([state[0][i], state[1][i]])


class RAdmmDac(Tracker):
    """Relaxed-ADMM dynamic average consensus with one variable per directed link.

    Proxy ``(u_i + sum_j z_ij) / (1 + rho deg_i)``; link update
    ``z_ij+ = (1 - beta) z_ij + beta (-z_ji + 2 rho proxy_j)``.
    """

    def __init__(self, graph, rho=0.9, beta=0.5):
        self.graph = graph
        self.n_agents = graph.n_agents
        self.rho = check_positive(rho, "rho")
        self.beta = check_interval(beta, "beta", 0.0, 1.0, closed=(False, False))
        self.src, self.dst = graph.directed_links()
        index = {(int(i), int(j)): e for e, (i, j) in enumerate(zip(self.src, self.dst))}
        self.rev = np.array([index[(int(j), int(i))] for i, j in zip(self.src, self.dst)], dtype=int)
        self.incidence = np.zeros((self.n_agents, self.src.size))
        self.incidence[self.src, np.arange(self.src.size)] = 1.0
        self.scale = 1.0 / (1.0 + self.rho * graph.degrees.astype(float))

    def init_state(self, u):
        u = self._signals(u)
        return np.zeros((self.src.size, u.shape[1]))

    def estimate(self, u, state):
        u = self._signals(u)
        return self.scale[:, None] * (u + self.incidence @ state)

    def update(self, u, state):
        proxies = self.estimate(u, state)
        return (1.0 - self.beta) * state + self.beta * (-state[self.rev] + 2.0 * self.rho * proxies[self.dst])

    def local_state(self, state, i):
        return state[self.src == i]


class Cascade:
    """Two trackers in cascade for composite aggregates.

    The inner tracker averages ``u_inner``; its per-agent proxy is fed to
    ``outer_signals(inner_proxies) -> (N, a_E)`` and the outer tracker
    averages the result. Both stages must run over the same agents.
    """

    def __init__(self, inner, outer):
        if inner.n_agents is not None and outer.n_agents is not None and inner.n_agents != outer.n_agents:
            raise ValueError(f"cascade stages run on different graphs ({inner.n_agents} vs {outer.n_agents} agents)")
        if isinstance(inner, RAdmmDac) and isinstance(outer, RAdmmDac) and inner.graph != outer.graph:
            raise ValueError("cascade stages run on different graphs")
        if hasattr(inner, "W") and hasattr(outer, "W") and not np.array_equal(inner.W != 0, outer.W != 0):
            raise ValueError("cascade stages run on different graphs")
        self.inner = inner
        self.outer = outer
        self.n_agents = inner.n_agents if inner.n_agents is not None else outer.n_agents

    def init_state(self, u_inner, outer_signals):
        z_in = self.inner.init_state(u_inner)
        u_out = outer_signals(self.inner.estimate(u_inner, z_in))
        return z_in, self.outer.init_state(u_out)

    def estimate(self, u_inner, outer_signals, state):
        z_in, z_out = state
        est_in = self.inner.estimate(u_inner, z_in)
        return est_in, self.outer.estimate(outer_signals(est_in), z_out)

    def update(self, u_inner, outer_signals, state):
        z_in, z_out = state
        u_out = outer_signals(self.inner.estimate(u_inner, z_in))
        return self.inner.update(u_inner, z_in), self.outer.update(u_out, z_out)

    def step(self, u_inner, outer_signals, state):
        state = self.update(u_inner, outer_signals, state)
        return state, self.estimate(u_inner, outer_signals, state)

    def local_state(self, state, i):
        return self.inner.local_state(state[0], i), self.outer.local_state(state[1], i)


def flatten_state(state):
    """Concatenate every array inside a (possibly nested) tracker state."""
    if state is None:
        return np.zeros(0)
    if isinstance(state, dict):
        return np.concatenate([flatten_state(state[k]) for k in sorted(state)] or [np.zeros(0)])
    if isinstance(state, (tuple, list)):
        return np.concatenate([flatten_state(s) for s in state] or [np.zeros(0)])
    return np.asarray(state, dtype=float).ravel()


def tracker_fixed_point_error(tracker, u, outer_signals=None, max_iter=10**6, rtol=1e-12, atol=None,
                              state=None):
    """Run a tracker on static signals until stationary; return the proxy error.

    The error is the largest absolute deviation of any agent's proxy from the
    exact average (for a :class:`Cascade`, from the exact composite aggregate
    ``(mean u, mean outer_signals(1 mean u))``). Stationarity means the state
    change is below ``rtol`` relative to the state and signal magnitudes.

    Raises
    ------
    TrackerNotConverged
        If stationarity is not reached within ``max_iter`` rounds, or if
        ``atol`` is given and the stationary proxies miss the aggregate by
        more than ``atol`` (e.g. on a disconnected graph).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    cascade = isinstance(tracker, Cascade)
    if cascade:
        if outer_signals is None:
            raise ValueError("a cascade needs outer_signals")
        mean_in = u.mean(axis=0)
        exact_in = np.broadcast_to(mean_in, u.shape)
        u_out_exact = np.asarray(outer_signals(exact_in), dtype=float)
        exact = (exact_in, np.broadcast_to(u_out_exact.mean(axis=0), u_out_exact.shape))
        upd = lambda s: tracker.update(u, outer_signals, s)  # noqa: E731
        est = lambda s: tracker.estimate(u, outer_signals, s)  # noqa: E731
        if state is None:
            state = tracker.init_state(u, outer_signals)
    else:
        exact = (np.broadcast_to(u.mean(axis=0), u.shape),)
        upd = lambda s: tracker.update(u, s)  # noqa: E731
        est = lambda s: (tracker.estimate(u, s),)  # noqa: E731
        if state is None:
            state = tracker.init_state(u)

    def error(s):
        return max(float(np.max(np.abs(e - x))) for e, x in zip(est(s), exact))

    scale = max(float(np.linalg.norm(u)), 1e-300)
    flat = flatten_state(state)
    for k in range(1, max_iter + 1):
        state = upd(state)
        new_flat = flatten_state(state)
        change = float(np.linalg.norm(new_flat - flat))
        flat = new_flat
        if change <= rtol * max(float(np.linalg.norm(flat)), scale):
            err = error(state)
            if atol is not None and err > atol:
                raise TrackerNotConverged(k, err)
            return err
    raise TrackerNotConverged(max_iter, error(state))
