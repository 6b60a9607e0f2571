"""Plain-text formats for graphs, weights, problem instances and oracle solutions.

All numbers are written with 17 significant digits so a write/read round trip
is exact.

Graph::

    n_agents 4
    0 1
    1 2

Instance (quadratic constraint-coupled or consensus)::

    kind constraint_coupled
    n_agents 2
    agent 0
    Q
    1,0
    0,1
    r
    -1,0
    A
    1,1
    b
    0.5

Solution::

    active_set 0 1
    kkt_residual 1e-15
    degenerate 0
    x_star
    1,2,3
    lambda_star
    0.5,0
"""

import functools

import numpy as np

from .diagnostics import Solution
from .graph import Graph
from .problems import ConsensusProblem, ConstraintCoupledProblem, QuadraticCost


class FormatError(ValueError):
    pass


def _row(v):
    return ",".join(format(float(x), ".17g") for x in np.ravel(v))


def _parse_row(line):
    return np.array([float(x) for x in line.split(",")], dtype=float)


def _parse_errors(fn):
    """Report bad numbers and truncated files as :class:`FormatError`."""
    @functools.wraps(fn)
    def wrapper(path, *args, **kwargs):
        try:
            return fn(path, *args, **kwargs)
        except FormatError:
            raise
        except (ValueError, IndexError, KeyError) as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return wrapper


def _lines(path):
    with open(path) as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def write_graph(g, path):
    with open(path, "w") as fh:
        fh.write(f"n_agents {g.n_agents}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")


@_parse_errors
def read_graph(path):
    lines = _lines(path)
    if not lines or not lines[0].startswith("n_agents"):
        raise FormatError(f"{path}: first line must be 'n_agents N'")
    n = int(lines[0].split()[1])
    edges = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise FormatError(f"{path}: bad edge line {ln!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return Graph(n, tuple(edges))


def write_weights(W, path):
    np.savetxt(path, np.asarray(W, dtype=float), delimiter=",", fmt="%.17g")


@_parse_errors
def read_weights(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def _write_matrix(fh, name, M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    fh.write(f"{name}\n")
    for r in M:
        fh.write(_row(r) + "\n")


def write_instance(problem, path):
    """Serialize a quadratic constraint-coupled or consensus instance."""
    if isinstance(problem, ConstraintCoupledProblem) and problem.is_quadratic:
        kind = "constraint_coupled"
    elif isinstance(problem, ConsensusProblem) and all(isinstance(c, QuadraticCost) for c in problem.costs):
        kind = "consensus"
    else:
        raise TypeError("only quadratic constraint-coupled and consensus instances can be written")
    with open(path, "w") as fh:
        fh.write(f"kind {kind}\nn_agents {problem.n_agents}\n")
        for i, cost in enumerate(problem.costs):
            fh.write(f"agent {i}\n")
            _write_matrix(fh, "Q", cost.Q)
            fh.write("r\n" + _row(cost.r) + "\n")
            if kind == "constraint_coupled":
                _write_matrix(fh, "A", problem.A_blocks[i])
                fh.write("b\n" + _row(problem.b_blocks[i]) + "\n")


@_parse_errors
def read_instance(path):
    lines = _lines(path)
    try:
        kind = lines[0].split()[1]
        n_agents = int(lines[1].split()[1])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: missing 'kind' / 'n_agents' header") from exc
    if kind not in ("constraint_coupled", "consensus"):
        raise FormatError(f"{path}: unknown instance kind {kind!r}")
    agents, cur, key = [], None, None
    for ln in lines[2:]:
        if ln.startswith("agent"):
            cur = {}
            agents.append(cur)
        elif ln in ("Q", "r", "A", "b"):
            if cur is None:
                raise FormatError(f"{path}: block {ln!r} before any 'agent' line")
            key = ln
            cur[key] = []
        else:
            if key is None:
                raise FormatError(f"{path}: unexpected line {ln!r}")
            cur[key].append(_parse_row(ln))
    if len(agents) != n_agents:
        raise FormatError(f"{path}: expected {n_agents} agents, found {len(agents)}")
    costs = tuple(QuadraticCost(np.vstack(a["Q"]), a["r"][0]) for a in agents)
    if kind == "consensus":
        return ConsensusProblem(costs)
    return ConstraintCoupledProblem(costs, tuple(np.vstack(a["A"]) for a in agents),
                                    tuple(a["b"][0] for a in agents))


def write_solution(sol, path):
    with open(path, "w") as fh:
        fh.write("active_set " + " ".join(str(k) for k in sol.active_set) + "\n")
        fh.write(f"kkt_residual {format(float(sol.kkt_residual), '.17g')}\n")
        fh.write(f"degenerate {int(bool(sol.degenerate))}\n")
        fh.write("x_star\n" + _row(sol.x_star) + "\n")
        lam = np.ravel(sol.lambda_star) if sol.lambda_star is not None else np.zeros(0)
        fh.write("lambda_star\n" + (_row(lam) if lam.size else "") + "\n")


@_parse_errors
def read_solution(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    fields = {}
    k = 0
    while k < len(lines):
        ln = lines[k].strip()
        if ln in ("x_star", "lambda_star"):
            nxt = lines[k + 1].strip() if k + 1 < len(lines) else ""
            fields[ln] = _parse_row(nxt) if nxt else np.zeros(0)
            k += 2
            continue
        if ln:
            name, _, rest = ln.partition(" ")
            fields[name] = rest
        k += 1
    return Solution(
        x_star=fields["x_star"],
        lambda_star=fields.get("lambda_star", np.zeros(0)),
        active_set=tuple(int(v) for v in fields.get("active_set", "").split()),
        kkt_residual=float(fields.get("kkt_residual", "nan")),
        degenerate=bool(int(fields.get("degenerate", "0"))),
    )
