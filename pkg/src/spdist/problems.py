"""Problem setups: consensus, constraint-coupled, aggregative optimization and games.

Costs are plain objects with analytic gradients; nothing here differentiates
automatically. Agent ``i`` owns the slice ``offsets[i]:offsets[i + 1]`` of the
stacked decision vector.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import block_diag

from .rng import PROBLEM_STREAM, make_rng
from .validation import check_int

RANK_TOL = 1e-9


class RankRepairError(RuntimeError):
    """Raised when a generator cannot draw a full-row-rank coupling matrix."""


# ---------------------------------------------------------------------------
# cost and contribution objects


class QuadraticCost:
    """``f(x) = 1/2 x'Qx + r'x``."""

    def __init__(self, Q, r):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.Q.shape != (self.r.size, self.r.size):
            raise ValueError(f"Q shape {self.Q.shape} does not match r of length {self.r.size}")

    @property
    def dim(self):
        return self.r.size

    def value(self, x):
        return 0.5 * x @ self.Q @ x + self.r @ x

    def grad(self, x):
        return self.Q @ x + self.r


class SmoothCost:
    """User-supplied cost given as a value function and its gradient."""

    def __init__(self, value, grad, dim):
        self._value = value
        self._grad = grad
        self.dim = int(dim)

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)


class QuadraticAggregativeCost:
    """``f(x, s) = 1/2 x'Qx + r'x + x'Cs + 1/2 s'Ss + c's``.

    ``x`` is the agent's decision (size n), ``s`` the aggregative variable
    (size d); ``C`` is n-by-d and ``S`` is d-by-d symmetric.
    """

    def __init__(self, Q, r, C=None, S=None, c=None):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.r = np.atleast_1d(np.asarray(r, dtype=float))
        n = self.r.size
        self.C = np.zeros((n, 1)) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
        d = self.C.shape[1]
        self.S = np.zeros((d, d)) if S is None else np.atleast_2d(np.asarray(S, dtype=float))
        self.c = np.zeros(d) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
        if self.Q.shape != (n, n) or self.C.shape[0] != n or self.S.shape != (d, d) or self.c.size != d:
            raise ValueError("inconsistent QuadraticAggregativeCost shapes")

    @property
    def dim(self):
        return self.r.size

    def value(self, x, s):
        return 0.5 * x @ self.Q @ x + self.r @ x + x @ self.C @ s + 0.5 * s @ self.S @ s + self.c @ s

    def grad_x(self, x, s):
        return self.Q @ x + self.r + self.C @ s

    def grad_s(self, x, s):
        return self.C.T @ x + self.S @ s + self.c


class SmoothAggregativeCost:
    def __init__(self, value, grad_x, grad_s, dim):
        self._value, self._gx, self._gs = value, grad_x, grad_s
        self.dim = int(dim)

    def value(self, x, s):
        return float(self._value(x, s))

    def grad_x(self, x, s):
        return np.asarray(self._gx(x, s), dtype=float)

    def grad_s(self, x, s):
        return np.asarray(self._gs(x, s), dtype=float)


class LinearContribution:
    """``phi(x) = Bx + c`` with ``B`` of shape (d, n)."""

    def __init__(self, B, c=None):
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.c = np.zeros(self.B.shape[0]) if c is None else np.atleast_1d(np.asarray(c, dtype=float))

    def __call__(self, x):
        return self.B @ x + self.c

    def jac(self, x):
        """Transposed Jacobian, shape (n, d)."""
        return self.B.T


class Contribution:
    """Generic contribution ``phi`` with its transposed Jacobian (shape (n, d))."""

    def __init__(self, fn, jac):
        self._fn, self._jac = fn, jac

    def __call__(self, x):
        return np.atleast_1d(np.asarray(self._fn(x), dtype=float))

    def jac(self, x):
        return np.atleast_2d(np.asarray(self._jac(x), dtype=float))


def _offsets(dims):
    return np.concatenate([[0], np.cumsum(dims)]).astype(int)


# ---------------------------------------------------------------------------
# problem containers


@dataclass(frozen=True, eq=False)
class ConsensusProblem:
    """``min_x sum_i f_i(x)`` with ``x`` in R^dim."""

    costs: tuple

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        dims = {c.dim for c in self.costs}
        if len(dims) != 1:
            raise ValueError(f"all consensus costs must share one dimension, got {sorted(dims)}")

    @property
    def n_agents(self):
        return len(self.costs)

    @property
    def dim(self):
        return self.costs[0].dim

    def value(self, x):
        return sum(c.value(x) for c in self.costs)

    def grad(self, x):
        return sum(c.grad(x) for c in self.costs)

    def grads_at(self, X):
        """Per-agent gradients ``grad f_i(X[i])`` for ``X`` of shape (N, d)."""
        return np.stack([c.grad(x) for c, x in zip(self.costs, X)])


@dataclass(frozen=True, eq=False)
class _CoupledMixin:
    def _check_coupling(self):
        A = self.A
        if A.shape[0] > A.shape[1] or np.linalg.svd(A, compute_uv=False)[-1] <= RANK_TOL:
            raise ValueError("stacked coupling matrix A must have full row rank")

    @cached_property
    def offsets(self):
        return _offsets(self.local_dims)

    @cached_property
    def n_agents(self):
        return len(self.A_blocks)

    @cached_property
    def local_dims(self):
        return tuple(int(Ai.shape[1]) for Ai in self.A_blocks)

    @cached_property
    def constraint_dim(self):
        return int(self.A_blocks[0].shape[0])

    @cached_property
    def n(self):
        return int(sum(self.local_dims))

    @cached_property
    def A(self):
        return np.hstack(self.A_blocks)

    @cached_property
    def b(self):
        return np.sum(self.b_blocks, axis=0)

    @cached_property
    def A_blockdiag(self):
        """``blkdiag(A_1, .., A_N)``, shape (N m, n)."""
        return block_diag(*self.A_blocks)

    @cached_property
    def b_stack(self):
        return np.stack(self.b_blocks)

    def split(self, x):
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n_agents)]

    def local_residuals(self, x):
        """Rows ``A_i x_i - b_i``, shape (N, m)."""
        return (self.A_blockdiag @ x).reshape(self.n_agents, -1) - self.b_stack


@dataclass(frozen=True, eq=False)
class ConstraintCoupledProblem(_CoupledMixin):
    """``min sum_i f_i(x_i)  s.t.  sum_i (A_i x_i - b_i) <= 0``."""

    costs: tuple
    A_blocks: tuple
    b_blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        object.__setattr__(self, "A_blocks", tuple(np.atleast_2d(np.asarray(a, float)) for a in self.A_blocks))
        object.__setattr__(self, "b_blocks", tuple(np.atleast_1d(np.asarray(b, float)) for b in self.b_blocks))
        if not (len(self.costs) == len(self.A_blocks) == len(self.b_blocks)):
            raise ValueError("costs, A_blocks and b_blocks must have one entry per agent")
        m = self.A_blocks[0].shape[0]
        for i, (c, Ai, bi) in enumerate(zip(self.costs, self.A_blocks, self.b_blocks)):
            if Ai.shape != (m, c.dim) or bi.shape != (m,):
                raise ValueError(f"agent {i}: A_i must be ({m}, {c.dim}) and b_i of length {m}")
        self._check_coupling()

    @cached_property
    def is_quadratic(self):
        return all(isinstance(c, QuadraticCost) for c in self.costs)

    @cached_property
    def Q_blockdiag(self):
        return block_diag(*(c.Q for c in self.costs))

    @cached_property
    def r_stack(self):
        return np.concatenate([c.r for c in self.costs])

    def value(self, x):
        return sum(c.value(xi) for c, xi in zip(self.costs, self.split(x)))

    def grad(self, x):
        """Stacked ``col(grad f_i(x_i))``."""
        if self.is_quadratic:
            return self.Q_blockdiag @ x + self.r_stack
        return np.concatenate([c.grad(xi) for c, xi in zip(self.costs, self.split(x))])

    @property
    def strong_convexity(self):
        if not self.is_quadratic:
            raise TypeError("strong convexity modulus is only known for quadratic costs")
        return float(min(np.linalg.eigvalsh(c.Q).min() for c in self.costs))


@dataclass(frozen=True, eq=False)
class AggregativeProblem:
    """``min sum_i f_i(x_i, sigma(x))`` with ``sigma(x) = mean_i phi_i(x_i)``."""

    costs: tuple
    contributions: tuple

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        object.__setattr__(self, "contributions", tuple(self.contributions))
        if len(self.costs) != len(self.contributions):
            raise ValueError("need one contribution per cost")

    @property
    def n_agents(self):
        return len(self.costs)

    @property
    def local_dims(self):
        return tuple(int(c.dim) for c in self.costs)

    @property
    def n(self):
        return int(sum(self.local_dims))

    @cached_property
    def offsets(self):
        return _offsets(self.local_dims)

    def split(self, x):
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n_agents)]

    @cached_property
    def agg_dim(self):
        x0 = np.zeros(self.local_dims[0])
        return int(self.contributions[0](x0).size)

    def value(self, x):
        s = sigma(self, x)
        return sum(c.value(xi, s) for c, xi in zip(self.costs, self.split(x)))


@dataclass(frozen=True, eq=False)
class AggregativeGame(_CoupledMixin):
    """Agents minimize ``J_i(x_i, sigma(x))`` under ``sum_i (A_i x_i - b_i) <= 0``.

    Local sets ``X_i`` are not modelled: only the shared coupling constraint.
    """

    costs: tuple
    contributions: tuple
    A_blocks: tuple
    b_blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        object.__setattr__(self, "contributions", tuple(self.contributions))
        object.__setattr__(self, "A_blocks", tuple(np.atleast_2d(np.asarray(a, float)) for a in self.A_blocks))
        object.__setattr__(self, "b_blocks", tuple(np.atleast_1d(np.asarray(b, float)) for b in self.b_blocks))
        if not (len(self.costs) == len(self.contributions) == len(self.A_blocks) == len(self.b_blocks)):
            raise ValueError("costs, contributions, A_blocks and b_blocks must have one entry per agent")
        m = self.A_blocks[0].shape[0]
        for i, (c, Ai) in enumerate(zip(self.costs, self.A_blocks)):
            if Ai.shape != (m, c.dim):
                raise ValueError(f"agent {i}: A_i must have shape ({m}, {c.dim})")
        self._check_coupling()

    @cached_property
    def agg_dim(self):
        return int(self.contributions[0](np.zeros(self.local_dims[0])).size)

    def split(self, x):
        return [x[self.offsets[i]:self.offsets[i + 1]] for i in range(self.n_agents)]

    def pseudo_gradient(self, x):
        """Stacked ``col(G_i(x_i, sigma(x)))``."""
        s = sigma(self, x)
        N = self.n_agents
        return np.concatenate([
            c.grad_x(xi, s) + phi.jac(xi) @ c.grad_s(xi, s) / N
            for c, phi, xi in zip(self.costs, self.contributions, self.split(x))
        ])


# ---------------------------------------------------------------------------
# aggregation helpers


def sigma(problem, x):
    """Aggregative variable ``(1/N) sum_i phi_i(x_i)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != problem.n:
        raise ValueError(f"x must have stacked dimension {problem.n}, got shape {x.shape}")
    parts = problem.split(x)
    return np.mean([phi(xi) for phi, xi in zip(problem.contributions, parts)], axis=0)


def constraint_residual(problem, x):
    """``A x - b = sum_i (A_i x_i - b_i)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != problem.n:
        raise ValueError(f"x must have stacked dimension {problem.n}, got shape {x.shape}")
    return problem.A @ x - problem.b


# ---------------------------------------------------------------------------
# random instance generators


def random_orthogonal(rng, n):
    """Haar-distributed orthogonal matrix via sign-fixed QR of a Gaussian matrix."""
    G = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _open_unit(rng, size):
    d = rng.random(size)
    while np.any(d == 0.0):
        d[d == 0.0] = rng.random(int(np.sum(d == 0.0)))
    return d


def random_spd(rng, n, low=0.0, high=1.0):
    """``U diag(D) U'`` with ``D`` uniform on the open interval (low, high)."""
    U = random_orthogonal(rng, n)
    D = low + (high - low) * _open_unit(rng, n)
    Q = (U * D) @ U.T
    return 0.5 * (Q + Q.T)


def _draw_coupling(rng, n_agents, local_dim, constraint_dim, max_retries):
    for _ in range(max_retries):
        A_blocks = [rng.uniform(-1.0, 1.0, (constraint_dim, local_dim)) for _ in range(n_agents)]
        A = np.hstack(A_blocks)
        if A.shape[0] <= A.shape[1] and np.linalg.svd(A, compute_uv=False)[-1] > RANK_TOL:
            return A_blocks
    raise RankRepairError(f"no full-row-rank coupling matrix after {max_retries} draws")


def generate_quadratic_cc(n_agents, local_dim, constraint_dim, seed, max_retries=100):
    """Random strongly convex quadratic constraint-coupled instance.

    Per agent: ``Q_i`` with eigenvalues uniform in (0, 1), ``r_i`` standard
    Gaussian, ``b_i`` uniform in (0, 1). The entries of ``A_i`` are uniform in
    (-1, 1) and are redrawn together until the stacked ``A`` has full row rank.
    """
    check_int(n_agents, "n_agents", 1)
    check_int(local_dim, "local_dim", 1)
    check_int(constraint_dim, "constraint_dim", 1)
    rng = make_rng(seed, PROBLEM_STREAM)
    costs, b_blocks = [], []
    for _ in range(n_agents):
        Q = random_spd(rng, local_dim)
        r = rng.standard_normal(local_dim)
        costs.append(QuadraticCost(Q, r))
    for _ in range(n_agents):
        b_blocks.append(_open_unit(rng, constraint_dim))
    A_blocks = _draw_coupling(rng, n_agents, local_dim, constraint_dim, max_retries)
    return ConstraintCoupledProblem(tuple(costs), tuple(A_blocks), tuple(b_blocks))


def generate_quadratic_consensus(n_agents, dim, seed):
    """Quadratic consensus instance with each ``Q_i`` eigenvalues in (0, 1)."""
    rng = make_rng(seed, PROBLEM_STREAM)
    costs = []
    for _ in range(n_agents):
        Q = random_spd(rng, dim)
        costs.append(QuadraticCost(Q, rng.standard_normal(dim)))
    return ConsensusProblem(tuple(costs))


def generate_quadratic_aggregative(n_agents, local_dim, agg_dim, seed):
    """Strongly convex aggregative instance with linear contributions.

    ``f_i(x_i, s) = 1/2 x_i'Q_i x_i + r_i'x_i + 1/2 |s - c_i|^2`` and
    ``phi_i(x_i) = B_i x_i`` with Gaussian ``B_i``.
    """
    rng = make_rng(seed, PROBLEM_STREAM)
    costs, contribs = [], []
    for _ in range(n_agents):
        Q = random_spd(rng, local_dim)
        r = rng.standard_normal(local_dim)
        c = rng.standard_normal(agg_dim)
        B = rng.standard_normal((agg_dim, local_dim)) / np.sqrt(local_dim)
        costs.append(QuadraticAggregativeCost(Q, r, np.zeros((local_dim, agg_dim)), np.eye(agg_dim), -c))
        contribs.append(LinearContribution(B))
    return AggregativeProblem(tuple(costs), tuple(contribs))


def generate_quadratic_game(n_agents, local_dim, agg_dim, constraint_dim, seed, coupling=0.2,
                            max_retries=100):
    """Linear-quadratic aggregative game with a shared linear constraint.

    ``J_i(x_i, s) = 1/2 x_i'Q_i x_i + r_i'x_i + x_i'C_i s`` with ``Q_i``
    eigenvalues in (1, 2), ``phi_i(x_i) = B_i x_i``, and ``C_i`` scaled by
    ``coupling``. Draws are repeated until the pseudo-gradient is strongly
    monotone.
    """
    rng = make_rng(seed, PROBLEM_STREAM)
    for _ in range(max_retries):
        costs, contribs, b_blocks = [], [], []
        for _ in range(n_agents):
            Q = random_spd(rng, local_dim, 1.0, 2.0)
            r = rng.standard_normal(local_dim)
            C = coupling * rng.standard_normal((local_dim, agg_dim))
            B = rng.standard_normal((agg_dim, local_dim)) / np.sqrt(local_dim)
            costs.append(QuadraticAggregativeCost(Q, r, C))
            contribs.append(LinearContribution(B))
            b_blocks.append(_open_unit(rng, constraint_dim))
        A_blocks = _draw_coupling(rng, n_agents, local_dim, constraint_dim, max_retries)
        game = AggregativeGame(tuple(costs), tuple(contribs), tuple(A_blocks), tuple(b_blocks))
        M = linear_game_jacobian(game)
        if np.linalg.eigvalsh(0.5 * (M + M.T)).min() > 0:
            return game
    raise RankRepairError("could not draw a strongly monotone game")


def linear_game_jacobian(game):
    """Jacobian of the stacked pseudo-gradient of a linear-quadratic game."""
    n = game.n
    x0 = np.zeros(n)
    g0 = game.pseudo_gradient(x0)
    return np.column_stack([game.pseudo_gradient(e) - g0 for e in np.eye(n)])
