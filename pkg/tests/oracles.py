"""Independent reference implementations used only by the tests."""

import numpy as np


def reachable(adj):
    """Connectivity by repeated boolean matrix products (no union-find)."""
    n = adj.shape[0]
    R = np.eye(n, dtype=bool) | (adj > 0)
    for _ in range(n):
        R = (R.astype(int) @ R.astype(int)) > 0
    return bool(R.all())


def h_scalar(v, lam, rho):
    if rho * v + lam >= 0:
        return v * lam + rho / 2 * v * v
    return -lam * lam / (2 * rho)


def eq36_step(problem, W, delta, gamma, rho, nu, x, lam, w, zeta):
    """Literal per-agent loop of the distributed constraint-coupled scheme.

    ``x`` is stacked, ``lam``, ``w``, ``zeta`` are (N, m).
    """
    N = problem.n_agents
    xs = problem.split(x)
    A, b = problem.A_blocks, problem.b_blocks
    loc = [N * (A[i] @ xs[i] - b[i]) for i in range(N)]
    x_new, lam_new, w_new, zeta_new = [], [], [], []
    for i in range(N):
        v = loc[i] + zeta[i]
        l = lam[i] + w[i]
        g1 = np.where(rho * v + l >= 0, l + rho * v, 0.0)
        g2 = np.where(rho * v + l >= 0, v, -l / rho)
        grad = problem.costs[i].grad(xs[i])
        x_new.append(xs[i] - delta * gamma * grad - delta * gamma * A[i].T @ g1)
        lam_new.append(lam[i] + delta * gamma * nu * w[i] + delta * gamma / N * g2)
        w_new.append(sum(W[i, j] * (w[j] + lam[j]) for j in range(N) if W[i, j] != 0) - lam[i])
        zeta_new.append(sum(W[i, j] * (zeta[j] + loc[j]) for j in range(N) if W[i, j] != 0) - loc[i])
    return np.concatenate(x_new), np.array(lam_new), np.array(w_new), np.array(zeta_new)


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g
