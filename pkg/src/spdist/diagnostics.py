"""Ground-truth solvers, tracker error coordinates, rate fitting and a Lyapunov diagnostic.

The solvers here never call the algorithm code: they work directly on the
problem data so that they can serve as independent references.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .problems import (AggregativeGame, ConsensusProblem, ConstraintCoupledProblem, LinearContribution,
                       QuadraticAggregativeCost, QuadraticCost)
from .trackers import disagreement_basis
from .validation import check_int, check_interval, check_positive

MAX_ACTIVE_SET_DIM = 10
KKT_TOL = 1e-9


class OracleError(RuntimeError):
    """No KKT point was found (infeasible or degenerate instance), or the instance is too large."""


@dataclass(frozen=True, eq=False)
class Solution:
    """KKT point ``(x_star, lambda_star)`` with its active set and residual."""

    x_star: np.ndarray
    lambda_star: np.ndarray
    active_set: tuple
    kkt_residual: float
    degenerate: bool = False


def kkt_residual(F, A, b, x, lam):
    """Max violation of stationarity, primal/dual feasibility and complementarity.

    ``F`` is the stacked gradient (or pseudo-gradient) evaluated at ``x``.
    """
    slack = A @ x - b
    parts = [
        np.max(np.abs(F + A.T @ lam), initial=0.0),
        np.max(slack, initial=0.0),
        np.max(-lam, initial=0.0),
        np.max(np.abs(lam * slack), initial=0.0),
    ]
    return float(max(parts))


def _active_set_affine(M, c, A, b, tol=KKT_TOL):
    """Solve ``M x + c + A'lam = 0``, ``A x <= b``, ``lam >= 0`` by enumerating active sets.

    ``M`` must be positive definite in the sense ``x'Mx > 0`` (not necessarily
    symmetric), which makes the solution unique.
    """
    m, n = A.shape
    if m > MAX_ACTIVE_SET_DIM:
        raise OracleError(f"active-set enumeration limited to m <= {MAX_ACTIVE_SET_DIM}, got m = {m}")
    candidates = []
    for size in range(m + 1):
        for S in itertools.combinations(range(m), size):
            S = list(S)
            k = len(S)
            K = np.zeros((n + k, n + k))
            K[:n, :n] = M
            K[:n, n:] = A[S].T
            K[n:, :n] = A[S]
            rhs = np.concatenate([-c, b[S]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x = sol[:n]
            lam = np.zeros(m)
            lam[S] = sol[n:]
            res = kkt_residual(M @ x + c, A, b, x, lam)
            scale = 1.0 + max(np.max(np.abs(c), initial=0.0), np.max(np.abs(b), initial=0.0))
            if res <= tol * scale:
                candidates.append((res, tuple(S), x, lam))
    if not candidates:
        raise OracleError("no active set satisfies the KKT conditions (infeasible or degenerate instance)")
    candidates.sort(key=lambda item: item[0])
    res, S, x, lam = candidates[0]
    slack = A @ x - b
    # weakly active: multiplier and slack both vanish
    degenerate = bool(np.any((np.abs(lam) <= tol) & (np.abs(slack) <= tol)))
    return Solution(x_star=x, lambda_star=lam, active_set=S, kkt_residual=res, degenerate=degenerate)


def solve_cc_active_set(problem: ConstraintCoupledProblem):
    """Exact solution of a quadratic constraint-coupled problem.

    Raises
    ------
    OracleError
        If no active set yields a KKT point, or ``m > 10``.
    """
    if not isinstance(problem, ConstraintCoupledProblem) or not problem.is_quadratic:
        raise TypeError("solve_cc_active_set needs a quadratic ConstraintCoupledProblem")
    return _active_set_affine(problem.Q_blockdiag, problem.r_stack, problem.A, problem.b)


def solve_consensus_min(problem: ConsensusProblem):
    """Minimizer of ``sum_i f_i`` for quadratic costs via ``(sum Q_i) x = -sum r_i``."""
    if not all(isinstance(c, QuadraticCost) for c in problem.costs):
        raise TypeError("solve_consensus_min needs quadratic costs")
    Q = sum(c.Q for c in problem.costs)
    r = sum(c.r for c in problem.costs)
    try:
        return np.linalg.solve(Q, -r)
    except np.linalg.LinAlgError as exc:
        raise OracleError("sum of Hessians is singular") from exc


def solve_game_linear(game: AggregativeGame):
    """v-GNE and shared multiplier of a linear-quadratic aggregative game.

    The stacked pseudo-gradient is affine, ``G(x) = M x + c``, with ``M`` and
    ``c`` read off the cost and contribution data.
    """
    M, c = affine_pseudo_gradient(game)
    return _active_set_affine(M, c, game.A, game.b)


def affine_pseudo_gradient(game):
    """``(M, c)`` with ``G(x) = M x + c`` for quadratic costs and linear contributions.

    ``G_i = Q_i x_i + r_i + C_i s + B_i'(C_i'x_i + S_i s + c_i) / N`` with
    ``s = mean_j (B_j x_j + d_j)``.
    """
    if not all(isinstance(c, QuadraticAggregativeCost) for c in game.costs) or \
            not all(isinstance(p, LinearContribution) for p in game.contributions):
        raise TypeError("solve_game_linear needs quadratic costs and linear contributions")
    N, off = game.n_agents, game.offsets
    M = np.zeros((game.n, game.n))
    c = np.zeros(game.n)
    s0 = sum(p.c for p in game.contributions) / N
    for i, (J, phi) in enumerate(zip(game.costs, game.contributions)):
        rows = slice(off[i], off[i + 1])
        ds = J.C + phi.B.T @ J.S / N  # d G_i / d s
        M[rows, rows] += J.Q + phi.B.T @ J.C.T / N
        for j, phj in enumerate(game.contributions):
            M[rows, off[j]:off[j + 1]] += ds @ phj.B / N
        c[rows] = J.r + phi.B.T @ J.c / N + ds @ s0
    return M, c


@dataclass(frozen=True, eq=False)
class ErrorCoordinates:
    """Disagreement projection ``T_perp`` for stacked per-agent tracker states."""

    n_agents: int
    per_agent_dim: int
    T_perp: np.ndarray

    def project(self, z):
        """``T_perp z`` for ``z`` given as (N, d) or stacked agent-major."""
        return self.T_perp @ np.asarray(z, dtype=float).ravel()

    def z_eq(self, problem, chi_x, chi_lam):
        """Tracker equilibrium ``-T_perp col(lambda_i, N(A_i x_i - b_i))`` for the constraint-coupled scheme.

        The stacking is agent-major, ``(lambda_1, N r_1, lambda_2, N r_2, ...)``,
        matching a tracker state laid out as ``(w_i, zeta_i)`` per agent.
        """
        lam = np.asarray(chi_lam, dtype=float).reshape(problem.n_agents, problem.constraint_dim)
        res = problem.n_agents * problem.local_residuals(chi_x)
        return -self.T_perp @ np.hstack([lam, res]).ravel()

    def error(self, problem, z_w, z_zeta, chi_x, chi_lam):
        """``|T_perp z - z_eq(chi)|`` with ``z`` built from the two tracker states."""
        z = np.hstack([np.asarray(z_w, float), np.asarray(z_zeta, float)])
        return float(np.linalg.norm(self.project(z) - self.z_eq(problem, chi_x, chi_lam)))


def build_error_coordinates(n_agents, per_agent_dim):
    """``T_perp = T_N kron I_d`` with ``T_N`` a Householder basis orthogonal to ``1``."""
    check_int(n_agents, "n_agents", 1)
    check_int(per_agent_dim, "per_agent_dim", 1)
    T = np.kron(disagreement_basis(n_agents), np.eye(per_agent_dim))
    return ErrorCoordinates(n_agents, per_agent_dim, T)


def fit_linear_rate(errors, tail_fraction=0.5, t=None):
    """Least-squares fit of ``log(error)`` against ``t`` on the trailing window.

    Returns ``(slope, r_squared)``. Nonpositive errors are floored at 1e-300
    with a warning. A constant window gives slope 0 and r^2 = 1.
    """
    e = np.asarray(errors, dtype=float)
    check_interval(tail_fraction, "tail_fraction", 0.0, 1.0, closed=(False, True))
    t = np.arange(e.size, dtype=float) if t is None else np.asarray(t, dtype=float)
    if t.shape != e.shape:
        raise ValueError("t and errors must have the same length")
    start = e.size - max(2, int(np.ceil(tail_fraction * e.size)))
    if start < 0:
        raise ValueError("need at least two errors to fit a rate")
    e, t = e[start:], t[start:]
    if np.any(~(e > 0)):
        warnings.warn("nonpositive errors in the fit window were floored at 1e-300", RuntimeWarning, stacklevel=2)
        e = np.where(e > 0, e, 1e-300)
    y = np.log(e)
    if np.ptp(y) == 0.0:
        return 0.0, 1.0
    fit = stats.linregress(t, y)
    return float(fit.slope), float(fit.rvalue ** 2)


def lyapunov_cc(problem, solution, kappa, chi):
    """Quadratic form ``W(chi)`` of the constraint-coupled primal-dual method.

    With ``dx = x - x*`` and ``dl = lambda - 1 lambda*``,
    ``W = kappa (|dx|^2 + |dl|^2) + 2 (A dx)' sum_i dl_i``. It is nonnegative
    whenever ``kappa >= sqrt(N) sigma_max(A)``.
    """
    check_positive(kappa, "kappa")
    chi = np.asarray(chi, dtype=float)
    N, m, n = problem.n_agents, problem.constraint_dim, problem.n
    if chi.shape != (n + N * m,):
        raise ValueError(f"state must have shape ({n + N * m},), got {chi.shape}")
    dx = chi[:n] - solution.x_star
    dl = chi[n:].reshape(N, m) - solution.lambda_star
    return float(kappa * (dx @ dx + np.sum(dl * dl)) + 2.0 * (problem.A @ dx) @ dl.sum(axis=0))


def lyapunov_kappa_threshold(problem):
    """Smallest ``kappa`` making the form of :func:`lyapunov_cc` positive semidefinite."""
    return float(np.sqrt(problem.n_agents) * np.linalg.norm(problem.A, 2))


def oracle_solution(problem):
    """Exact solution from the matching oracle, or ``None`` when no oracle covers ``problem``."""
    try:
        if isinstance(problem, ConstraintCoupledProblem):
            return solve_cc_active_set(problem)
        if isinstance(problem, AggregativeGame):
            return solve_game_linear(problem)
        if isinstance(problem, ConsensusProblem):
            return solve_consensus_min(problem)
    except TypeError:
        return None
    return None
