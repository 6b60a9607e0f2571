"""Communication graphs and doubly-stochastic consensus weights."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rng import GRAPH_STREAM, make_rng
from .validation import check_int, check_interval


class DisconnectedGraphError(RuntimeError):
    """Raised when no connected sample was found within the retry budget."""

    def __init__(self, attempts):
        super().__init__(f"disconnected graph after {attempts} attempt(s)")
        self.attempts = attempts


@dataclass(frozen=True)
class Graph:
    """Undirected graph on agents ``0 .. n_agents - 1``.

    Each edge ``(i, j)`` is stored once with ``i < j`` and stands for the two
    directed links ``i -> j`` and ``j -> i``.
    """

    n_agents: int
    edges: tuple

    def __post_init__(self):
        check_int(self.n_agents, "n_agents", minimum=1)
        normalized = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            if not (0 <= i < self.n_agents and 0 <= j < self.n_agents):
                raise ValueError(f"edge ({i}, {j}) out of range for {self.n_agents} agents")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(normalized)))

    @cached_property
    def neighbor_sets(self):
        nbrs = [[] for _ in range(self.n_agents)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return tuple(tuple(sorted(n)) for n in nbrs)

    @cached_property
    def degrees(self):
        return np.array([len(n) for n in self.neighbor_sets], dtype=int)

    @cached_property
    def adjacency(self):
        adj = np.zeros((self.n_agents, self.n_agents))
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = 1.0
        return adj

    @property
    def is_connected(self):
        return is_connected(self.n_agents, self.edges)

    def directed_links(self):
        """Return ``(src, dst)`` index arrays listing every ordered neighbor pair."""
        src, dst = [], []
        for i, nbrs in enumerate(self.neighbor_sets):
            for j in nbrs:
                src.append(i)
                dst.append(j)
        return np.array(src, dtype=int), np.array(dst, dtype=int)

    @classmethod
    def complete(cls, n_agents):
        return cls(n_agents, tuple((i, j) for i in range(n_agents) for j in range(i + 1, n_agents)))

    @classmethod
    def path(cls, n_agents):
        return cls(n_agents, tuple((i, i + 1) for i in range(n_agents - 1)))

    @classmethod
    def cycle(cls, n_agents):
        edges = [(i, i + 1) for i in range(n_agents - 1)]
        if n_agents > 2:
            edges.append((0, n_agents - 1))
        return cls(n_agents, tuple(edges))


def is_connected(n_agents, edges):
    """Union-find connectivity test."""
    parent = list(range(n_agents))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    components = n_agents
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


def erdos_renyi(n_agents, p, seed, max_retries=100):
    """Sample a connected Erdos-Renyi graph G(n_agents, p).

    Pairs ``(i, j)`` with ``i < j`` are visited in lexicographic order and each
    becomes an edge when the next uniform draw is ``< p``. A disconnected sample
    is discarded and the next one is drawn from the same (advanced) stream.

    Raises
    ------
    DisconnectedGraphError
        If ``max_retries`` consecutive samples are all disconnected.
    """
    check_int(n_agents, "n_agents", minimum=2)
    check_interval(p, "p", 0.0, 1.0)
    check_int(max_retries, "max_retries", minimum=1)
    rng = make_rng(seed, GRAPH_STREAM)
    pairs = [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)]
    for _ in range(max_retries):
        draws = rng.random(len(pairs))
        edges = tuple(pair for pair, u in zip(pairs, draws) if u < p)
        if is_connected(n_agents, edges):
            return Graph(n_agents, edges)
    raise DisconnectedGraphError(max_retries)


def metropolis_weights(g):
    """Metropolis-Hastings weights: ``w_ij = 1 / (1 + max(deg_i, deg_j))``.

    The result is symmetric, and therefore doubly stochastic, for any
    undirected graph.
    """
    deg = g.degrees
    W = np.zeros((g.n_agents, g.n_agents))
    for i, j in g.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(g.n_agents)] = 1.0 - W.sum(axis=1)
    return W


def second_singular_value(W):
    """Second-largest singular value of ``W``; governs the consensus rate."""
    s = np.linalg.svd(np.asarray(W, dtype=float), compute_uv=False)
    return float(s[1]) if s.size > 1 else 0.0
