"""scikit-learn style front ends.

``fit`` takes a problem instance (and a graph for the distributed solver)
instead of ``X, y``; everything else follows the estimator conventions:
hyperparameters live in ``__init__``, fitted attributes end in ``_``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .blocks import BlockParams, DivergenceError, make_block, run_centralized
from .diagnostics import oracle_solution
from .interconnection import TRACKER_KINDS, assemble, bind_trackers, run
from .validation import check_int, check_interval


def _reference(block, problem, reference):
    if reference is not None:
        return reference
    sol = oracle_solution(problem)
    return None if sol is None else block.reference(sol)


def _converged(trace, tol):
    if trace.diverged:
        return False
    err = trace.array("opt_err")
    if tol is None or not np.isfinite(err[0]):
        return True
    return bool(err[-1] <= tol * err[0])


class _SolverBase(BaseEstimator):
    def _block(self, problem):
        check_int(self.max_iter, "max_iter", 0)
        check_int(self.record_every, "record_every", 1)
        return make_block(problem, BlockParams(gamma=self.gamma, nu=self.nu, rho=self.rho))

    def _finish(self, block, trace):
        self.block_ = block
        self.trace_ = trace
        self.n_iter_ = trace.t[-1]
        self.converged_ = _converged(trace, self.tol)
        self.state_ = trace.final_state
        self.x_ = None if self.state_ is None else block.output(self.state_)
        return self

    def score(self, problem=None):
        """Negative final optimality error (higher is better)."""
        check_is_fitted(self, "trace_")
        return -float(self.trace_.opt_err[-1])


class CentralizedSolver(_SolverBase):
    """Iterates a centralized block with the exact aggregate.

    Parameters
    ----------
    gamma, nu, rho : float
        Block step size, multiplier consensus gain and penalty parameter.
    max_iter : int
        Number of iterations.
    tol : float or None
        ``converged_`` requires the final error to be below ``tol`` times the
        initial one (only the absence of divergence when ``None``).
    """

    def __init__(self, gamma=0.1, nu=1.0, rho=0.9, max_iter=1000, tol=None, record_every=1):
        self.gamma = gamma
        self.nu = nu
        self.rho = rho
        self.max_iter = max_iter
        self.tol = tol
        self.record_every = record_every

    def fit(self, problem, init=None, reference=None):
        block = self._block(problem)
        ref = _reference(block, problem, reference)
        try:
            trace = run_centralized(block, self.max_iter, init=init, reference=ref, record_every=self.record_every)
        except DivergenceError as err:
            trace = err.trace
        return self._finish(block, trace)


class DistributedSolver(_SolverBase):
    """Distributed counterpart: block plus trackers, slowed down by ``delta``.

    Parameters
    ----------
    delta : float
        Time-scale separation gain in (0, 1].
    tracker : {"perturbed", "pi", "radmm", "exact"}
        Consensus tracker kind; ``tracker_params`` is forwarded to it.
    """

    def __init__(self, delta=0.1, gamma=0.1, nu=1.0, rho=0.9, tracker="perturbed", tracker_params=None,
                 max_iter=1000, tol=None, record_every=1):
        self.delta = delta
        self.gamma = gamma
        self.nu = nu
        self.rho = rho
        self.tracker = tracker
        self.tracker_params = tracker_params
        self.max_iter = max_iter
        self.tol = tol
        self.record_every = record_every

    def fit(self, problem, graph, init=None, reference=None, W=None):
        check_interval(self.delta, "delta", 0.0, 1.0, closed=(False, True))
        if self.tracker not in TRACKER_KINDS:
            raise ValueError(f"unknown tracker {self.tracker!r}; expected one of {TRACKER_KINDS}")
        if graph.n_agents != problem.n_agents:
            raise ValueError(f"graph has {graph.n_agents} agents, problem has {problem.n_agents}")
        block = self._block(problem)
        trackers = bind_trackers(block, self.tracker, graph, W, **(self.tracker_params or {}))
        self.algorithm_ = assemble(block, trackers, self.delta)
        ref = _reference(block, problem, reference)
        trace = run(self.algorithm_, self.max_iter, init=init, reference=ref, record_every=self.record_every,
                    record_states=True)
        return self._finish(block, trace)
