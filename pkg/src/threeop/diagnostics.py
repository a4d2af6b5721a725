"""Certificates for the rate theory: κ sequences, slope fits, contraction factors,
and a rotating-subspace instance on which the iteration converges arbitrarily slowly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError
from .operators import ForwardOperator, ProxOperator
from .splitting import SolverState, ThreeOperatorProblem

__all__ = [
    "KappaRecord",
    "kappa_term",
    "kappa_bounds",
    "kappa1_bound",
    "kappa2_bound",
    "feasibility_lower_bound",
    "rate_fit",
    "contraction_factor",
    "RotatingSubspaceExample",
    "slow_eigenvalues",
    "build_slow_example",
    "running_min",
]


@dataclass
class KappaRecord:
    """One κ value with the pieces it was assembled from.

    Only the field for the requested kind (``kappa1`` or ``kappa2``) is set.
    """

    k: int
    kappa1: Optional[float]
    kappa2: Optional[float]
    lambda_k: float
    step_sq: float
    inner_c: float


def kappa_term(z, z_next, c_term, point, gamma, lam):
    """``‖z − p‖² − ‖z⁺ − p‖² + (1 − 2/λ)‖z − z⁺‖² + 2γ⟨z − z⁺, c_term⟩``.

    Returns the value together with ``‖z − z⁺‖²`` and ``⟨z − z⁺, c_term⟩``.
    """
    z, z_next, point = (np.asarray(v, dtype=float) for v in (z, z_next, point))
    step = z - z_next
    step_sq = float(step @ step)
    inner = float(step @ np.asarray(c_term, dtype=float))
    a, b = z - point, z_next - point
    value = float(a @ a - b @ b) + (1.0 - 2.0 / lam) * step_sq + 2.0 * gamma * inner
    return value, step_sq, inner


def kappa_bounds(states: Sequence[SolverState], gamma: float, lambdas, point, which="k1",
                 grad_at_xstar=None) -> list:
    """κ values along a run.

    Parameters
    ----------
    states : sequence of SolverState
        Consecutive states; ``z^{k+1}`` is rebuilt as ``z^k + λ_k(x_A^k − x_B^k)``.
    gamma : float
    lambdas : float or callable
        Relaxation parameters of the run.
    point : array_like
        ``x`` for ``which="k1"``; the fixed point ``z*`` for ``which="k2"``.
    which : {"k1", "k2"}
    grad_at_xstar : array_like
        ``C x*``, required for ``"k2"``.
    """
    if which not in ("k1", "k2"):
        raise InvalidInputError(f"which must be 'k1' or 'k2', got {which!r}")
    if which == "k2" and grad_at_xstar is None:
        raise InvalidInputError("kappa2 needs grad_at_xstar = C x*")
    if len(states) == 0:
        raise InvalidInputError("kappa_bounds needs at least one state")
    out = []
    for s in states:
        lam = float(lambdas(s.k)) if callable(lambdas) else float(lambdas)
        z_next = s.z + lam * (s.x_a - s.x_b)
        c_term = s.c_xb if which == "k1" else s.c_xb - np.asarray(grad_at_xstar, dtype=float)
        value, step_sq, inner = kappa_term(s.z, z_next, c_term, point, gamma, lam)
        out.append(KappaRecord(s.k, value if which == "k1" else None, value if which == "k2" else None,
                               lam, step_sq, inner))
    return out


def _root(tau_min, k):
    if not tau_min > 0:
        raise InvalidInputError(f"tau_min must be > 0, got {tau_min}")
    return math.sqrt(tau_min * (k + 1))


def kappa2_bound(k, gamma, beta, tau_min, dist0) -> float:
    """``2(1 + γ/β)‖z⁰ − z*‖²/√(τ(k+1))``."""
    ratio = 0.0 if math.isinf(beta) else gamma / beta
    return 2.0 * (1.0 + ratio) * dist0**2 / _root(tau_min, k)


def kappa1_bound(k, gamma, beta, tau_min, dist0, dist_zstar_x, c_xstar_norm) -> float:
    """``2(‖z* − x‖ + (1 + γ/β)‖z⁰ − z*‖ + γ‖Cx*‖)‖z⁰ − z*‖/√(τ(k+1))``."""
    ratio = 0.0 if math.isinf(beta) else gamma / beta
    return 2.0 * (dist_zstar_x + (1.0 + ratio) * dist0 + gamma * c_xstar_norm) * dist0 / _root(tau_min, k)


def feasibility_lower_bound(k, tau_min, dist0, dual_norm) -> float:
    """``−‖z⁰ − z*‖·‖u_B* + Cx*‖/√(τ(k+1))``."""
    return -dist0 * dual_norm / _root(tau_min, k)


def rate_fit(points, k_min=0, k_max=math.inf) -> float:
    """Least-squares slope of ``log(value)`` against ``log(k + 1)``.

    ``points`` is a sequence of ``(k, value)`` pairs or a 1-d array whose
    index is ``k``.  At least 10 points must fall in ``[k_min, k_max]``.

    >>> round(rate_fit([(k, 3.0 / (k + 1) ** 2) for k in range(20)]), 6)
    -2.0
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = np.column_stack([np.arange(arr.size), arr])
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError("points must be (k, value) pairs or a 1-d series")
    sel = arr[(arr[:, 0] >= k_min) & (arr[:, 0] <= k_max)]
    if sel.shape[0] < 10:
        raise InvalidInputError(f"rate_fit needs >= 10 points in range, got {sel.shape[0]}")
    if np.any(~(sel[:, 1] > 0)) or not np.all(np.isfinite(sel[:, 1])):
        raise InvalidInputError("rate_fit needs positive finite values")
    slope, _ = np.polyfit(np.log(sel[:, 0] + 1.0), np.log(sel[:, 1]), 1)
    return float(slope)


def contraction_factor(case: int, *, gamma, lam=1.0, mu_a=0.0, mu_b=0.0, mu_c=0.0, l_a=math.inf,
                       l_b=math.inf, beta=math.inf, epsilon=None, eta=None, alpha=None) -> float:
    """Guaranteed decrease ``C(λ)`` in ``‖z⁺ − z*‖² <= (1 − C(λ))‖z − z*‖²``.

    Cases: 1 (B Lipschitz and strongly monotone), 2 (A Lipschitz and
    strongly monotone), 3 (A strongly monotone, B Lipschitz), 4 (A Lipschitz,
    B strongly monotone), 5 (A Lipschitz, C strongly monotone), 6 (B
    Lipschitz, C strongly monotone).  ``alpha`` defaults to ``1/(2 − ε)``.
    The result is clamped to ``[0, 1]``.
    """
    def need(name, value, positive=True):
        if value is None or (positive and not value > 0) or (not math.isfinite(value)):
            raise InvalidInputError(f"case {case} requires finite {name}{' > 0' if positive else ''}")
        return float(value)

    if case not in range(1, 7):
        raise InvalidInputError(f"case must be 1..6, got {case}")
    if not gamma > 0 or not lam > 0:
        raise InvalidInputError("gamma and lam must be > 0")
    if alpha is None and epsilon is not None:
        alpha = 1.0 / (2.0 - epsilon)

    def slack_lambda():
        return lam * (1.0 / (need("alpha", alpha) * lam) - 1.0)

    def coco(modulus):
        return (2.0 * modulus - gamma / need("epsilon", epsilon)) / gamma if math.isfinite(modulus) else math.inf

    if case == 1:
        value = 2 * gamma * lam * mu_b / (1 + gamma * need("l_b", l_b, False)) ** 2
    elif case == 6:
        value = 2 * gamma * lam * mu_c * (1 - need("eta", eta)) / (1 + gamma * need("l_b", l_b, False)) ** 2
    elif case == 2:
        la = need("l_a", l_a, False)
        value = lam / 3 * min(2 * mu_a * gamma / (1 + gamma * la) ** 2, lam / 4 * (1 / (need("alpha", alpha) * lam) - 1),
                              coco(beta))
    elif case == 3:
        lb = need("l_b", l_b, False)
        value = lam / (3 * (1 + 2 * gamma**2 * lb**2)) * min(2 * gamma * mu_a, slack_lambda())
    else:
        la = need("l_a", l_a, False)
        scale = 1 + 2 * gamma**2 * la**2
        if case == 4:
            first, modulus = 2 * gamma * mu_b / scale, beta
        else:
            e = need("eta", eta)
            first, modulus = 2 * gamma * mu_c * (1 - e) / scale, e * beta
        value = lam / 4 * min(first, coco(modulus), slack_lambda() / scale)
    return float(min(1.0, max(0.0, value)))


def running_min(values) -> np.ndarray:
    """Prefix minima of a sequence."""
    arr = np.asarray(values, dtype=float)
    return np.minimum.accumulate(arr) if arr.size else arr


@dataclass
class RotatingSubspaceExample:
    """Block-diagonal instance on ``(R²)^N`` with ``U`` spanned by rotated axes.

    ``f = ι_U + (a/2)‖·‖²``, ``g = ι_V`` with ``V`` the first axis of every
    block, ``h = ½‖·‖²``, ``γ = 1``, ``λ = 1``.  ``blocks[i]`` is the restriction
    of the fixed-point map to block ``i``.
    """

    a: float
    thetas: np.ndarray
    n_blocks: int
    blocks: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    z0: np.ndarray
    problem: ThreeOperatorProblem

    def step(self, z):
        """Apply the block map to a flattened iterate."""
        zz = np.asarray(z, dtype=float).reshape(self.n_blocks, 2)
        return np.einsum("nij,nj->ni", self.blocks, zz).reshape(-1)

    def run(self, k_max):
        """Norms ``‖z^k‖`` for ``k = 0..k_max`` from ``z0`` (exact block powers)."""
        w = self.z0.reshape(self.n_blocks, 2)
        sq = np.einsum("ni,ni->n", w, w)
        k = np.arange(k_max + 1)[:, None]
        return np.sqrt((self.eigenvalues[None, :] ** (2 * k) * sq[None, :]).sum(axis=1))


def slow_eigenvalues(n_blocks: int) -> np.ndarray:
    """Eigenvalues ``b_n = 1 − 1/(M_n + 1)``, ``M_n = ⌈exp(min(n + 2, 30))⌉``.

    With ``n_k = ⌈ln(k + 2)⌉ − 2`` they satisfy
    ``b_{n_k}^k/(n_k + 1) > e⁻¹/ln(k + 2)`` for ``1 <= k <= e³⁰ − 2``.
    """
    n = np.arange(n_blocks)
    m = np.ceil(np.exp(np.minimum(n + 2, 30)))
    return 1.0 - 1.0 / (m + 1.0)


def _angles_from_eigenvalues(a, b):
    b = np.asarray(b, dtype=float)
    lo = a / (a + 1.0)
    if np.any(b < lo) or np.any(b >= 1.0):
        raise InvalidInputError(f"eigenvalues must lie in [{lo}, 1) for a = {a}")
    return np.arcsin(np.sqrt((a + 1.0) * (1.0 - b)))


def _block_projections(thetas):
    c, s = np.cos(thetas), np.sin(thetas)
    pu = np.stack([np.stack([c * c, s * c], -1), np.stack([s * c, s * s], -1)], -2)
    return pu


def build_slow_example(a: float, theta_spec: Union[str, Sequence[float], Callable[[int], float]] = "slow",
                       n_blocks: int = 200) -> RotatingSubspaceExample:
    """Assemble the rotating-subspace instance.

    Parameters
    ----------
    a : float
        Strong convexity weight of ``f`` (``a >= 0``).
    theta_spec : "slow", sequence or callable
        ``"slow"`` picks angles whose eigenvalues are :func:`slow_eigenvalues`;
        otherwise explicit angles in ``(0, π/2]`` or a map ``i -> θ_i``.
    n_blocks : int

    Notes
    -----
    Each block map is ``P_U/(a+1)·(P_V − I) + I − P_V`` with
    ``P_V = diag(1, 0)``; eigenvalues and eigenvectors come from a numeric
    2×2 eigendecomposition.  Block ``i`` of ``z0`` is the unit eigenvector of
    the nonzero eigenvalue scaled by ``1/(i + 1)``.
    """
    if not a >= 0:
        raise InvalidInputError(f"a must be >= 0, got {a}")
    n_blocks = int(n_blocks)
    if n_blocks < 1:
        raise InvalidInputError("n_blocks must be >= 1")
    if isinstance(theta_spec, str):
        if theta_spec != "slow":
            raise InvalidInputError(f"unknown theta_spec {theta_spec!r}")
        thetas = _angles_from_eigenvalues(a, slow_eigenvalues(n_blocks))
    elif callable(theta_spec):
        thetas = np.array([float(theta_spec(i)) for i in range(n_blocks)])
    else:
        thetas = np.asarray(theta_spec, dtype=float).reshape(-1)
        if thetas.size != n_blocks:
            raise InvalidInputError(f"expected {n_blocks} angles, got {thetas.size}")
    if np.any(~(thetas > 0)) or np.any(thetas > math.pi / 2 + 1e-15):
        raise InvalidInputError("angles must lie in (0, pi/2]")
    pu = _block_projections(thetas)
    pv = np.diag([1.0, 0.0])
    eye = np.eye(2)
    blocks = pu @ (pv - eye) / (a + 1.0) + (eye - pv)
    vals, vecs = np.linalg.eig(blocks)
    vals, vecs = vals.real, vecs.real
    pick = np.argmax(np.abs(vals), axis=1)
    idx = np.arange(n_blocks)
    eigenvalues = vals[idx, pick]
    eigenvectors = vecs[idx, :, pick]
    eigenvectors /= np.linalg.norm(eigenvectors, axis=1, keepdims=True)
    z0 = (eigenvectors / (idx + 1.0)[:, None]).reshape(-1)
    problem = _slow_problem(a, pu)
    return RotatingSubspaceExample(float(a), thetas, n_blocks, blocks, eigenvalues, eigenvectors, z0, problem)


def _slow_problem(a, pu) -> ThreeOperatorProblem:
    n = pu.shape[0]

    def prox_f(gamma, z):
        zz = np.asarray(z, dtype=float).reshape(n, 2)
        return (np.einsum("nij,nj->ni", pu, zz) / (1.0 + gamma * a)).reshape(-1)

    def proj_v(gamma, z):
        zz = np.array(z, dtype=float).reshape(n, 2)
        zz[:, 1] = 0.0
        return zz.reshape(-1)

    a_op = ProxOperator(prox_f, float(a), math.inf, "indicator of U plus (a/2)|x|^2")
    b_op = ProxOperator(proj_v, 0.0, math.inf, "indicator of V")
    c_op = ForwardOperator(lambda x: np.array(x, dtype=float), 1.0, 1.0, 1.0, "identity",
                           lambda x: 0.5 * float(np.dot(x, x)))
    return ThreeOperatorProblem(a_op, b_op, c_op)
