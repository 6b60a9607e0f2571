"""Centralized optimization-oriented building blocks.

Each block exposes the three ingredients of the centralized meta-algorithm:
the local dynamics ``step(chi, agg)`` (all agents at once), the output map
``output(chi)``, and the aggregation ``exact_aggregate(chi)``. ``agg`` maps a
component name to either one vector (the exact aggregate, shared by every
agent) or an ``(N, dim)`` array holding one estimate per agent.

State layouts:

* consensus: ``chi = col(chi_1, .., chi_N)``, each ``chi_i`` in R^d.
* aggregative: ``chi = x = col(x_1, .., x_N)``.
* constraint-coupled / game: ``chi = [x; lambda_1; ..; lambda_N]`` (all primal
  blocks first, then all multipliers).
"""

from dataclasses import dataclass

import numpy as np

from .problems import AggregativeGame, AggregativeProblem, ConsensusProblem, ConstraintCoupledProblem
from .trace import Reference, RunTrace
from .validation import check_int, check_positive

DIVERGENCE_NORM = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, t, trace=None):
        super().__init__(f"state norm exceeded {DIVERGENCE_NORM:g} (or became non-finite) at t={t}")
        self.t = t
        self.trace = trace


@dataclass(frozen=True)
class BlockParams:
    gamma: float = 0.1
    nu: float = 1.0
    rho: float = 0.9

    def __post_init__(self):
        check_positive(self.gamma, "gamma", strict=False)
        check_positive(self.nu, "nu")
        check_positive(self.rho, "rho")


@dataclass(frozen=True)
class AggComponent:
    """One block of the aggregation function.

    ``kind`` says whether the block is a mean or a sum of per-agent terms;
    ``stage="outer"`` marks blocks whose per-agent terms are evaluated at the
    inner blocks (the composite case).
    """

    name: str
    dim: int
    kind: str = "mean"
    stage: str = "inner"


# ---------------------------------------------------------------------------
# one-sided augmented-Lagrangian penalty


def h_rho(v, lam, rho):
    """``v lam + rho/2 v^2`` if ``rho v + lam >= 0`` else ``-lam^2 / (2 rho)``, elementwise."""
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    return np.where(rho * v + lam >= 0, v * lam + 0.5 * rho * v * v, -lam * lam / (2.0 * rho))


def cal_h_rho(v, lam, rho):
    """Sum of :func:`h_rho` over the components of ``v`` and ``lam``."""
    return float(np.sum(h_rho(v, lam, rho)))


def grad_h_rho(v, lam, rho):
    """Partial gradients ``(d/dv, d/dlam)`` of :func:`cal_h_rho`, elementwise."""
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    active = rho * v + lam >= 0
    g1 = np.where(active, lam + rho * v, 0.0)
    g2 = np.where(active, v, -lam / rho)
    return g1, g2


# ---------------------------------------------------------------------------
# blocks


def _per_agent(value, n_agents, dim):
    value = np.asarray(value, dtype=float)
    return np.broadcast_to(value, (n_agents, dim))


def _reduce(terms, kind):
    return terms.sum(axis=0) if kind == "sum" else terms.mean(axis=0)


class CentralizedBlock:
    nested = False
    components = ()

    def __init__(self, problem, params=None):
        self.problem = problem
        self.params = params if params is not None else BlockParams()

    @property
    def n_agents(self):
        return self.problem.n_agents

    @property
    def state_dim(self):
        raise NotImplementedError

    def component(self, name):
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def init_state(self):
        return np.zeros(self.state_dim)

    def check_state(self, chi):
        chi = np.asarray(chi, dtype=float)
        if chi.shape != (self.state_dim,):
            raise ValueError(f"state must have shape ({self.state_dim},), got {chi.shape}")
        return chi

    def contributions(self, chi):
        """Per-agent terms of the inner components, each of shape (N, dim)."""
        raise NotImplementedError

    def outer_contributions(self, chi, inner):
        """Per-agent terms of the outer components, evaluated at per-agent inner estimates."""
        return {}

    def exact_aggregate(self, chi):
        chi = self.check_state(chi)
        terms = self.contributions(chi)
        agg = {c.name: _reduce(terms[c.name], c.kind) for c in self.components if c.stage == "inner"}
        if self.nested:
            inner = {k: _per_agent(v, self.n_agents, v.size) for k, v in agg.items()}
            outer = self.outer_contributions(chi, inner)
            agg.update({c.name: _reduce(outer[c.name], c.kind) for c in self.components if c.stage == "outer"})
        return agg

    def step(self, chi, agg):
        raise NotImplementedError

    def output(self, chi):
        return np.asarray(chi, dtype=float)

    def agent_indices(self, i):
        """Indices of ``chi`` holding agent ``i``'s local state."""
        raise NotImplementedError

    def multipliers(self, chi):
        return None

    def constraint_violation(self, chi):
        return 0.0

    def reference(self, solution):
        raise NotImplementedError

    def metrics(self, chi, reference=None):
        """``(opt_err, x_err, constr_res, lambda_neg)`` for one state."""
        opt_err = x_err = float("nan")
        if reference is not None:
            if reference.chi_star is not None:
                opt_err = float(np.linalg.norm(chi - reference.chi_star))
            if reference.x_star is not None:
                x_err = float(np.linalg.norm(self.output(chi) - reference.x_star))
        lam = self.multipliers(chi)
        lambda_neg = bool(lam is not None and np.any(lam < 0))
        return opt_err, x_err, self.constraint_violation(chi), lambda_neg


class ConsensusBlock(CentralizedBlock):
    """Parallel gradient method on the augmented consensus cost."""

    nested = True

    def __init__(self, problem: ConsensusProblem, params=None):
        super().__init__(problem, params)
        d = problem.dim
        self.components = (
            AggComponent("mean", d, "mean", "inner"),
            AggComponent("grad_sum", d, "sum", "outer"),
        )

    @property
    def state_dim(self):
        return self.n_agents * self.problem.dim

    def _X(self, chi):
        return np.asarray(chi, dtype=float).reshape(self.n_agents, self.problem.dim)

    def contributions(self, chi):
        return {"mean": self._X(chi)}

    def outer_contributions(self, chi, inner):
        return {"grad_sum": self.problem.grads_at(inner["mean"])}

    def step(self, chi, agg):
        N, d = self.n_agents, self.problem.dim
        p = self.params
        X = self._X(chi)
        a1 = _per_agent(agg["mean"], N, d)
        a2 = _per_agent(agg["grad_sum"], N, d)
        return (X - p.gamma * (p.nu * (X - a1) + a2)).ravel()

    def agent_indices(self, i):
        d = self.problem.dim
        return np.arange(i * d, (i + 1) * d)

    def augmented_cost(self, chi):
        """``nu/2 chi'(I - 11'/N)chi + N sum_i f_i(mean(chi))``."""
        X = self._X(chi)
        mean = X.mean(axis=0)
        dev = X - mean
        return 0.5 * self.params.nu * np.sum(dev * dev) + self.n_agents * self.problem.value(mean)

    def augmented_grad(self, chi):
        X = self._X(chi)
        mean = X.mean(axis=0)
        g = self.problem.grad(mean)
        return (self.params.nu * (X - mean) + g).ravel()

    def reference(self, x_star):
        x_star = np.asarray(x_star, dtype=float)
        return Reference(x_star=np.tile(x_star, self.n_agents), chi_star=np.tile(x_star, self.n_agents))


class _PrimalDualBlock(CentralizedBlock):
    """Shared machinery for the blocks with state ``[x; lambda]``."""

    @property
    def state_dim(self):
        return self.problem.n + self.n_agents * self.problem.constraint_dim

    def split_state(self, chi):
        chi = np.asarray(chi, dtype=float)
        n = self.problem.n
        return chi[:n], chi[n:].reshape(self.n_agents, self.problem.constraint_dim)

    def join_state(self, x, lam):
        return np.concatenate([np.asarray(x, float).ravel(), np.asarray(lam, float).ravel()])

    def check_init(self, chi):
        """Initial multipliers must be nonnegative."""
        chi = self.check_state(chi)
        _, lam = self.split_state(chi)
        if np.any(lam < 0):
            raise ValueError("initial multipliers must be nonnegative")
        return chi

    def output(self, chi):
        return self.split_state(chi)[0]

    def multipliers(self, chi):
        return self.split_state(chi)[1]

    def constraint_violation(self, chi):
        x, _ = self.split_state(chi)
        res = self.problem.A @ x - self.problem.b
        return float(np.linalg.norm(np.maximum(res, 0.0)))

    def agent_indices(self, i):
        pr = self.problem
        m = pr.constraint_dim
        lam_start = pr.n + i * m
        return np.concatenate([np.arange(pr.offsets[i], pr.offsets[i + 1]), np.arange(lam_start, lam_start + m)])

    def _primal_dual(self, x, lam, primal_grad, residual, lam_mean):
        p = self.params
        N = self.n_agents
        g1, g2 = grad_h_rho(residual, lam_mean, p.rho)
        x_new = x - p.gamma * primal_grad - p.gamma * (self.problem.A_blockdiag.T @ g1.ravel())
        lam_new = lam + p.gamma * p.nu * (lam_mean - lam) + (p.gamma / N) * g2
        return self.join_state(x_new, lam_new)

    def reference(self, solution):
        x_star = np.asarray(solution.x_star, dtype=float)
        lam_star = np.asarray(solution.lambda_star, dtype=float)
        return Reference(x_star=x_star, chi_star=self.join_state(x_star, np.tile(lam_star, (self.n_agents, 1))))


class ConstraintCoupledBlock(_PrimalDualBlock):
    """Parallel augmented primal-dual method for coupled inequality constraints."""

    def __init__(self, problem: ConstraintCoupledProblem, params=None):
        super().__init__(problem, params)
        m = problem.constraint_dim
        self.components = (
            AggComponent("residual", m, "sum"),
            AggComponent("lambda_mean", m, "mean"),
        )

    def contributions(self, chi):
        x, lam = self.split_state(chi)
        return {"residual": self.problem.local_residuals(x), "lambda_mean": lam}

    def step(self, chi, agg):
        N, m = self.n_agents, self.problem.constraint_dim
        x, lam = self.split_state(chi)
        return self._primal_dual(
            x, lam, self.problem.grad(x),
            _per_agent(agg["residual"], N, m),
            _per_agent(agg["lambda_mean"], N, m),
        )


class AggregativeBlock(CentralizedBlock):
    """Parallel gradient method on ``f_sigma(x) = sum_i f_i(x_i, sigma(x))``."""

    nested = True

    def __init__(self, problem: AggregativeProblem, params=None):
        super().__init__(problem, params)
        d = problem.agg_dim
        self.components = (
            AggComponent("sigma", d, "mean", "inner"),
            AggComponent("grad2_mean", d, "mean", "outer"),
        )

    @property
    def state_dim(self):
        return self.problem.n

    def contributions(self, chi):
        pr = self.problem
        return {"sigma": np.stack([phi(xi) for phi, xi in zip(pr.contributions, pr.split(chi))])}

    def outer_contributions(self, chi, inner):
        pr = self.problem
        s = inner["sigma"]
        return {"grad2_mean": np.stack([c.grad_s(xi, s[i]) for i, (c, xi) in enumerate(zip(pr.costs, pr.split(chi)))])}

    def step(self, chi, agg):
        pr = self.problem
        N, d = self.n_agents, pr.agg_dim
        a1 = _per_agent(agg["sigma"], N, d)
        a2 = _per_agent(agg["grad2_mean"], N, d)
        gamma = self.params.gamma
        parts = []
        for i, (c, phi, xi) in enumerate(zip(pr.costs, pr.contributions, pr.split(chi))):
            parts.append(xi - gamma * (c.grad_x(xi, a1[i]) + phi.jac(xi) @ a2[i]))
        return np.concatenate(parts)

    def agent_indices(self, i):
        return np.arange(self.problem.offsets[i], self.problem.offsets[i + 1])

    def stacked_grad(self, x):
        """``grad f_sigma(x)`` assembled block by block."""
        pr = self.problem
        s = np.mean([phi(xi) for phi, xi in zip(pr.contributions, pr.split(x))], axis=0)
        mean_g2 = np.mean([c.grad_s(xi, s) for c, xi in zip(pr.costs, pr.split(x))], axis=0)
        return np.concatenate([
            c.grad_x(xi, s) + phi.jac(xi) @ mean_g2
            for c, phi, xi in zip(pr.costs, pr.contributions, pr.split(x))
        ])

    def reference(self, x_star):
        x_star = np.asarray(x_star, dtype=float)
        return Reference(x_star=x_star, chi_star=x_star)


class GameBlock(_PrimalDualBlock):
    """Augmented primal-dual equilibrium seeking for aggregative games."""

    def __init__(self, problem: AggregativeGame, params=None):
        super().__init__(problem, params)
        d, m = problem.agg_dim, problem.constraint_dim
        self.components = (
            AggComponent("sigma", d, "mean"),
            AggComponent("lambda_mean", m, "mean"),
            AggComponent("residual", m, "sum"),
        )

    def contributions(self, chi):
        pr = self.problem
        x, lam = self.split_state(chi)
        phis = np.stack([phi(xi) for phi, xi in zip(pr.contributions, pr.split(x))])
        return {"sigma": phis, "lambda_mean": lam, "residual": pr.local_residuals(x)}

    def local_pseudo_gradients(self, x, s):
        """Stacked ``G_i(x_i, s_i)`` where ``s`` holds one aggregate estimate per agent."""
        pr = self.problem
        N = self.n_agents
        return np.concatenate([
            c.grad_x(xi, s[i]) + phi.jac(xi) @ c.grad_s(xi, s[i]) / N
            for i, (c, phi, xi) in enumerate(zip(pr.costs, pr.contributions, pr.split(x)))
        ])

    def step(self, chi, agg):
        pr = self.problem
        N, m, d = self.n_agents, pr.constraint_dim, pr.agg_dim
        x, lam = self.split_state(chi)
        G = self.local_pseudo_gradients(x, _per_agent(agg["sigma"], N, d))
        return self._primal_dual(
            x, lam, G,
            _per_agent(agg["residual"], N, m),
            _per_agent(agg["lambda_mean"], N, m),
        )


BLOCKS = {
    "consensus": ConsensusBlock,
    "constraint_coupled": ConstraintCoupledBlock,
    "aggregative": AggregativeBlock,
    "game": GameBlock,
}


def make_block(problem, params=None):
    """Pick the block matching ``problem``'s type."""
    for cls, block in ((ConsensusProblem, ConsensusBlock), (ConstraintCoupledProblem, ConstraintCoupledBlock),
                       (AggregativeGame, GameBlock), (AggregativeProblem, AggregativeBlock)):
        if isinstance(problem, cls):
            return block(problem, params)
    raise TypeError(f"no block for problem type {type(problem).__name__}")


def exact_aggregate(block, chi):
    return block.exact_aggregate(chi)


def _diverged(chi):
    return not np.all(np.isfinite(chi)) or np.linalg.norm(chi) > DIVERGENCE_NORM


def run_centralized(block, iters, init=None, reference=None, record_every=1, record_states=True):
    """Iterate ``chi <- g(chi, 1 alpha(chi))`` with the exact aggregate.

    Raises
    ------
    DivergenceError
        When the state norm exceeds ``DIVERGENCE_NORM``; the partial trace is
        attached as ``err.trace``.
    """
    check_int(iters, "iters", 0)
    check_int(record_every, "record_every", 1)
    chi = block.init_state() if init is None else np.array(init, dtype=float)
    if hasattr(block, "check_init"):
        chi = block.check_init(chi)
    else:
        chi = block.check_state(chi)
    trace = RunTrace()
    _record(trace, block, 0, chi, reference, 0.0, record_states)
    for t in range(1, iters + 1):
        chi = block.step(chi, block.exact_aggregate(chi))
        if _diverged(chi):
            trace.diverged = True
            trace.divergence_t = t
            raise DivergenceError(t, trace)
        if t % record_every == 0 or t == iters:
            _record(trace, block, t, chi, reference, 0.0, record_states)
    return trace


def _record(trace, block, t, chi, reference, track_err, record_states, proxies=None, tracker_state=None):
    opt_err, x_err, constr_res, lambda_neg = block.metrics(chi, reference)
    trace.append(t, opt_err, x_err, track_err, constr_res, lambda_neg,
                 state=chi if record_states else None, proxies=proxies, tracker_state=tracker_state)
