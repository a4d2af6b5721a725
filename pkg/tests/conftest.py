import math

import numpy as np
import pytest

from threeop.corpus import quadratic_triple
from threeop.numkit import make_rng


@pytest.fixture
def rng():
    return make_rng(20240611)


def triple_corpus(count, dim=10, seed=1, **kw):
    return [quadratic_triple(make_rng(seed, i), dim, **kw) for i in range(count)]


def brute_prox(value, gamma, z, grid):
    """Grid minimizer of value(x) + (x − z)²/(2γ) in one dimension."""
    obj = np.array([value(np.array([x])) for x in grid]) + (grid - z) ** 2 / (2 * gamma)
    return grid[int(np.argmin(obj))]


def descent_inequality_slack(states, x_star, u_star, mu_b, mu_c, beta, eta):
    """Largest per-step violation of the accelerated descent inequality."""
    worst = -math.inf
    for s, t in zip(states, states[1:]):
        g = s.gamma_k
        lhs = ((1 + 2 * g * mu_b) * np.sum((t.x_b - x_star) ** 2) + g**2 * np.sum((t.u_b - u_star) ** 2)
               + (1 - g / (2 * (1 - eta) * beta)) * np.sum((s.x_a - s.x_b) ** 2))
        rhs = (1 - 2 * g * mu_c * eta) * np.sum((s.x_b - x_star) ** 2) + g**2 * np.sum((s.u_b - u_star) ** 2)
        worst = max(worst, lhs - rhs)
    return worst


def fbs_reference(p_f, c_f, p_h, c_h, gamma, z0, steps):
    """Proximal gradient on quadratics, coded with numpy only."""
    n = z0.size
    z, out = z0.copy(), []
    for _ in range(steps):
        grad = p_h @ z + c_h
        z = np.linalg.solve(np.eye(n) + gamma * p_f, z - gamma * grad - gamma * c_f)
        out.append(z.copy())
    return out


def drs_reference(p_f, c_f, p_g, c_g, gamma, z0, steps):
    """Douglas-Rachford on quadratics, coded with numpy only."""
    n = z0.size
    z, out = z0.copy(), []
    for _ in range(steps):
        x = np.linalg.solve(np.eye(n) + gamma * p_g, z - gamma * c_g)
        y = np.linalg.solve(np.eye(n) + gamma * p_f, 2 * x - z - gamma * c_f)
        z = z + y - x
        out.append(z.copy())
    return out
