"""Build and run experiments described by an :class:`~spdist.config.ExperimentConfig`.

The CLI is a thin wrapper around these functions.
"""

from dataclasses import dataclass

import numpy as np

from .blocks import BlockParams, DivergenceError, make_block, run_centralized
from .diagnostics import fit_linear_rate, oracle_solution
from .graph import DisconnectedGraphError, erdos_renyi, metropolis_weights, second_singular_value
from .interconnection import SignatureError, assemble, bind_trackers, run, run_sweep
from .io import read_graph, read_instance
from .problems import (generate_quadratic_aggregative, generate_quadratic_cc, generate_quadratic_consensus,
                       generate_quadratic_game)
from .trackers import SpectralGateError
from .validation import check_doubly_stochastic


@dataclass
class Experiment:
    config: object
    problem: object
    graph: object
    W: np.ndarray
    block: object
    solution: object
    reference: object

    def trackers(self):
        cfg = self.config
        return bind_trackers(self.block, cfg.tracker, self.graph, self.W, **cfg.tracker_params)


@dataclass
class RunResult:
    trace: object
    converged: bool
    status: str
    slope: float
    r_squared: float


def build_problem(cfg):
    if cfg.instance is not None:
        problem = read_instance(cfg.instance)
        expected = {"constraint_coupled": "ConstraintCoupledProblem", "consensus": "ConsensusProblem"}
        if type(problem).__name__ != expected.get(cfg.kind):
            raise ValueError(f"instance file holds a {type(problem).__name__}, config says {cfg.kind}")
        return problem
    if cfg.kind == "constraint_coupled":
        return generate_quadratic_cc(cfg.n_agents, cfg.local_dim, cfg.constraint_dim, cfg.seed)
    if cfg.kind == "consensus":
        return generate_quadratic_consensus(cfg.n_agents, cfg.local_dim, cfg.seed)
    if cfg.kind == "aggregative":
        return generate_quadratic_aggregative(cfg.n_agents, cfg.local_dim, cfg.agg_dim, cfg.seed)
    return generate_quadratic_game(cfg.n_agents, cfg.local_dim, cfg.agg_dim, cfg.constraint_dim, cfg.seed)


def build_graph(cfg, n_agents):
    if cfg.graph_file is not None:
        g = read_graph(cfg.graph_file)
        if not g.is_connected:
            raise DisconnectedGraphError(1)
    else:
        g = erdos_renyi(n_agents, cfg.p, cfg.seed)
    if g.n_agents != n_agents:
        raise ValueError(f"graph has {g.n_agents} agents, problem has {n_agents}")
    return g


def build_experiment(cfg):
    problem = build_problem(cfg)
    graph = build_graph(cfg, problem.n_agents)
    W = metropolis_weights(graph)
    block = make_block(problem, BlockParams(gamma=cfg.gamma, nu=cfg.nu, rho=cfg.rho))
    solution = oracle_solution(problem)
    reference = None if solution is None else block.reference(solution)
    return Experiment(cfg, problem, graph, W, block, solution, reference)


def _rate(trace, tail_fraction):
    err = trace.array("opt_err")
    if len(err) < 2 or not np.all(np.isfinite(err)):
        return float("nan"), float("nan")
    return fit_linear_rate(err, tail_fraction, t=trace.array("t"))


def assess(trace, tol, tail_fraction):
    """Status of a trace: ``converged``, ``diverged``, ``not_converged`` or ``empty``.

    ``empty`` is a zero-horizon run (nothing to assess). Converged means no divergence event and a final optimality error at most
    ``tol`` times the initial one (a run without a reference only needs to
    avoid divergence).
    """
    if trace.t[-1] == 0 and not trace.diverged:
        return RunResult(trace, False, "empty", float("nan"), float("nan"))
    slope, r2 = _rate(trace, tail_fraction)
    if trace.diverged:
        return RunResult(trace, False, "diverged", slope, r2)
    err = trace.array("opt_err")
    ok = not np.isfinite(err[0]) or err[0] == 0.0 or err[-1] <= tol * err[0]
    return RunResult(trace, bool(ok), "converged" if ok else "not_converged", slope, r2)


def run_experiment(exp, delta=None, record_states=False):
    cfg = exp.config
    alg = assemble(exp.block, exp.trackers(), cfg.delta if delta is None else delta)
    trace = run(alg, cfg.horizon, reference=exp.reference, record_every=cfg.record_every,
                record_states=record_states)
    return assess(trace, cfg.tol, cfg.tail_fraction)


def run_centralized_experiment(exp):
    cfg = exp.config
    try:
        trace = run_centralized(exp.block, cfg.horizon, reference=exp.reference, record_every=cfg.record_every,
                                record_states=False)
    except DivergenceError as err:
        trace = err.trace
    return assess(trace, cfg.tol, cfg.tail_fraction)


def sweep_experiment(exp, deltas=None, max_workers=None):
    """One distributed result per delta (in the given order)."""
    cfg = exp.config
    deltas = cfg.deltas if deltas is None else deltas
    traces = run_sweep(exp.block, exp.trackers, deltas, cfg.horizon, reference=exp.reference,
                       record_every=cfg.record_every, max_workers=max_workers)
    return [assess(tr, cfg.tol, cfg.tail_fraction) for tr in traces]


def validate_config(cfg):
    """Dry-run checks; returns a list of ``(name, ok, detail)``."""
    checks = []
    try:
        problem = build_problem(cfg)
        detail = f"{type(problem).__name__} with {problem.n_agents} agents"
        if hasattr(problem, "A"):
            s = np.linalg.svd(problem.A, compute_uv=False)
            detail += f", A is {problem.A.shape[0]}x{problem.A.shape[1]} with sigma_min {s[-1]:.3g}"
        checks.append(("instance (rank of A)", True, detail))
    except Exception as exc:  # noqa: BLE001 -- every failure becomes a reported check
        checks.append(("instance (rank of A)", False, str(exc)))
        return checks
    try:
        graph = build_graph(cfg, problem.n_agents)
        checks.append(("graph connectivity", True, f"{len(graph.edges)} edges, connected"))
    except Exception as exc:  # noqa: BLE001
        checks.append(("graph connectivity", False, str(exc)))
        return checks
    W = metropolis_weights(graph)
    try:
        check_doubly_stochastic(W)
        checks.append(("doubly stochastic weights", True, f"sigma_2(W) = {second_singular_value(W):.4f}"))
    except ValueError as exc:
        checks.append(("doubly stochastic weights", False, str(exc)))
    block = make_block(problem, BlockParams(gamma=cfg.gamma, nu=cfg.nu, rho=cfg.rho))
    try:
        trackers = bind_trackers(block, cfg.tracker, graph, W, **cfg.tracker_params)
        gate = "not applicable"
        first = trackers.inner if hasattr(trackers, "inner") else (
            next(iter(trackers.values())) if isinstance(trackers, dict) else None)
        if hasattr(first, "spectral_radius"):
            gate = f"disagreement spectral radius {first.spectral_radius():.6f} < 1"
        checks.append(("tracker spectral gate", True, gate))
    except (SpectralGateError, ValueError, TypeError) as exc:
        checks.append(("tracker spectral gate", False, str(exc)))
        return checks
    try:
        alg = assemble(block, trackers, cfg.delta)
        names = ", ".join(f"{c.name} ({c.kind}, dim {c.dim})" for c in block.components)
        alg.init()
        checks.append(("aggregate binding signature", True, names))
    except (SignatureError, ValueError) as exc:
        checks.append(("aggregate binding signature", False, str(exc)))
    return checks
