"""Seeded random problem families with closed-form KKT solutions.

Used by the test suite and by the CLI's randomly generated problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkit import solve_spd
from .operators import make_quadratic_prox, quadratic_forward
from .splitting import ThreeOperatorProblem

__all__ = ["random_orthogonal", "random_spd", "QuadraticTriple", "quadratic_triple", "QuadraticMonotropic",
           "quadratic_monotropic"]


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_spd(rng, n, lo=0.5, hi=2.0):
    """Symmetric matrix with eigenvalues drawn uniformly from ``[lo, hi]``; returns (P, eigenvalues)."""
    q = random_orthogonal(rng, n)
    eig = np.sort(rng.uniform(lo, hi, n))
    p = (q * eig) @ q.T
    return 0.5 * (p + p.T), eig


@dataclass
class QuadraticTriple:
    """``f, g, h`` all quadratic: ``½xᵀP x + cᵀx``."""

    p_f: np.ndarray
    c_f: np.ndarray
    p_g: np.ndarray
    c_g: np.ndarray
    p_h: np.ndarray
    c_h: np.ndarray
    problem: ThreeOperatorProblem
    x_star: np.ndarray

    @property
    def u_b_star(self):
        return self.p_g @ self.x_star + self.c_g

    @property
    def c_star(self):
        return self.p_h @ self.x_star + self.c_h

    def z_star(self, gamma):
        return self.x_star + gamma * self.u_b_star


def quadratic_triple(rng, dim=10, lo=0.5, hi=2.0, zero=()) -> QuadraticTriple:
    """Random strongly convex quadratic triple; names in ``zero`` (``"f"``, ``"g"``, ``"h"``) are set to 0."""
    mats = {}
    for name in ("f", "g", "h"):
        p, eig = random_spd(rng, dim, lo, hi)
        c = rng.standard_normal(dim)
        if name in zero:
            p, eig, c = np.zeros((dim, dim)), np.zeros(dim), np.zeros(dim)
        mats[name] = (p, c, eig)
    a = make_quadratic_prox(mats["f"][0], mats["f"][1], mats["f"][2][0], mats["f"][2][-1], "f")
    b = make_quadratic_prox(mats["g"][0], mats["g"][1], mats["g"][2][0], mats["g"][2][-1], "g")
    c = quadratic_forward(mats["h"][0], mats["h"][1], mats["h"][2][0], "h")
    total = mats["f"][0] + mats["g"][0] + mats["h"][0]
    x_star = solve_spd(total, -(mats["f"][1] + mats["g"][1] + mats["h"][1]))
    problem = ThreeOperatorProblem(a, b, c)
    return QuadraticTriple(mats["f"][0], mats["f"][1], mats["g"][0], mats["g"][1], mats["h"][0], mats["h"][1],
                           problem, x_star)


@dataclass
class QuadraticMonotropic:
    """``min Σ ½x_iᵀP_i x_i + c_iᵀx_i`` subject to ``Σ L_i x_i = b``."""

    ps: list
    cs: list
    ls: list
    b: np.ndarray
    x_star: list
    w_star: np.ndarray


def quadratic_monotropic(rng, m=4, dims=(3, 3, 3), lo=0.5, hi=2.0) -> QuadraticMonotropic:
    """Random program whose KKT system ``P_i x_i + c_i = L_iᵀw``, ``Σ L_i x_i = b`` is solved directly."""
    ps, cs, ls = [], [], []
    for n in dims:
        ps.append(random_spd(rng, n, lo, hi)[0])
        cs.append(rng.standard_normal(n))
        ls.append(rng.standard_normal((m, n)))
    b = rng.standard_normal(m)
    total = sum(dims)
    kkt = np.zeros((total + m, total + m))
    rhs = np.zeros(total + m)
    off = 0
    for p, c, l, n in zip(ps, cs, ls, dims):
        kkt[off:off + n, off:off + n] = p
        kkt[off:off + n, total:] = -l.T
        kkt[total:, off:off + n] = l
        rhs[off:off + n] = -c
        off += n
    rhs[total:] = b
    sol = np.linalg.solve(kkt, rhs)
    xs, off = [], 0
    for n in dims:
        xs.append(sol[off:off + n])
        off += n
    return QuadraticMonotropic(ps, cs, ls, b, xs, sol[total:])
