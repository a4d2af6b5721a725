"""Accelerated stepsizes, backtracking line search and ergodic averaging."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceError, InvalidInputError, LineSearchError, StepsizeError
from .numkit import as_vector
from .operators import ForwardOperator, ProxOperator
from .splitting import SolverState, ThreeOperatorProblem, Trace, TraceRecord, _checked

__all__ = [
    "AccelConfig",
    "next_stepsize_cocoercive",
    "next_stepsize_lipschitz",
    "solve_accelerated",
    "find_rho",
    "linesearch_step",
    "solve_linesearch",
    "ErgodicAccumulator",
    "ergodic_update",
    "ergodic_weights",
]

RHO_MIN = 1e-6
ARMIJO_SLACK = 1e-12
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 100


@dataclass(frozen=True)
class AccelConfig:
    """Initial stepsize and branch for the accelerated iteration.

    ``branch="cocoercive"`` uses the cocoercivity of ``C`` and needs
    ``gamma0 < 2β(1 − eta)``; ``branch="lipschitz"`` only needs ``C`` to be
    Lipschitz but requires ``μ_B > 0`` and ``gamma0 < 2μ_B/L_C²``.
    """

    gamma0: float
    eta: float = 0.5
    branch: str = "cocoercive"

    def check(self, problem: ThreeOperatorProblem) -> None:
        if not self.gamma0 > 0:
            raise StepsizeError(f"gamma0 must be > 0, got {self.gamma0}")
        if self.branch == "cocoercive":
            if not 0 < self.eta < 1:
                raise StepsizeError(f"eta must lie in (0, 1), got {self.eta}")
            bound = 2 * problem.c.beta * (1 - self.eta)
            if not self.gamma0 < bound:
                raise StepsizeError(f"gamma0 must be < 2·beta·(1 − eta) = {bound!r}, got {self.gamma0!r}")
        elif self.branch == "lipschitz":
            mu_b, l_c = problem.b.mu, problem.c.l_c
            if not mu_b > 0:
                raise StepsizeError("lipschitz branch requires mu_b > 0 (strongly monotone B)")
            bound = math.inf if l_c == 0 else 2 * mu_b / l_c**2
            if not self.gamma0 < bound:
                raise StepsizeError(f"gamma0 must be < 2·mu_b/l_c² = {bound!r}, got {self.gamma0!r}")
        else:
            raise InvalidInputError(f"unknown branch {self.branch!r}; expected cocoercive or lipschitz")


def next_stepsize_cocoercive(gamma_k, mu_b, mu_c, eta) -> float:
    """Next stepsize solving ``(1 + 2γμ_B)/γ² = (1 − 2γ⁺μ_Cη)/γ⁺²`` for ``γ⁺ > 0``.

    >>> round(next_stepsize_cocoercive(1.0, 0.0, 1.0, 0.5), 5)
    0.61803
    """
    if not gamma_k > 0:
        raise StepsizeError(f"gamma_k must be > 0, got {gamma_k}")
    if mu_b < 0 or mu_c < 0:
        raise InvalidInputError("strong monotonicity moduli must be >= 0")
    g2 = gamma_k * gamma_k
    lin = 2.0 * g2 * mu_c * eta
    den = 1.0 + 2.0 * gamma_k * mu_b
    # rationalized root avoids cancellation when lin dominates
    return float(2.0 * g2 / (lin + math.sqrt(lin * lin + 4.0 * den * g2)))


def next_stepsize_lipschitz(gamma_k, mu_b, l_c) -> float:
    """``γ/√(1 + 2γ(μ_B − γL_C²/2))`` for ``μ_B > 0`` and ``γ <= 2μ_B/L_C²``.

    At ``γ = 2μ_B/L_C²`` the radicand is 1 and the stepsize is kept.
    """
    if not mu_b > 0:
        raise StepsizeError("lipschitz stepsize rule requires mu_b > 0")
    if not 0 < gamma_k <= (math.inf if l_c == 0 else 2 * mu_b / l_c**2):
        raise StepsizeError(f"gamma_k must lie in (0, 2·mu_b/l_c²], got {gamma_k!r}")
    return float(gamma_k / math.sqrt(1.0 + 2.0 * gamma_k * (mu_b - gamma_k * l_c**2 / 2.0)))


def _state(problem, gamma, x_b, u_b, k):
    """State at stepsize ``gamma`` for a given ``(x_B, u_B)`` pair."""
    n = x_b.size
    z = x_b + gamma * u_b
    c_xb = _checked(problem.c(x_b), n, "forward operator C")
    reflected = x_b - gamma * u_b - gamma * c_xb
    x_a = _checked(problem.a(gamma, reflected), n, "resolvent of A")
    u_a = (reflected - x_a) / gamma
    d = x_a - x_b
    return SolverState(z, x_b, u_b, x_a, u_a, c_xb, k, float(gamma), float(d @ d))


def solve_accelerated(problem: ThreeOperatorProblem, config: AccelConfig, x_a0, max_iter=10_000, tol=1e-10,
                      *, reference=None, keep_states=False):
    """Iteration with decreasing stepsizes for strongly monotone ``B`` or ``C``.

    The supplied point seeds ``x_B⁰ = J_{γ₀B}(x_a0)`` and
    ``u_B⁰ = (x_a0 − x_B⁰)/γ₀``; every later step is

        x_B^{k+1} = J_{γ_k B}(x_A^k + γ_k u_B^k)
        u_B^{k+1} = (x_A^k + γ_k u_B^k − x_B^{k+1})/γ_k
        x_A^{k+1} = J_{γ_{k+1} A}(x_B^{k+1} − γ_{k+1} u_B^{k+1} − γ_{k+1} C x_B^{k+1})

    Each recorded state uses ``z = x_B + γ_k u_B`` so that it coincides with
    :func:`apply_t` at stepsize ``γ_k``.  Stops when ``‖x_A − x_B‖ <= tol``.
    """
    config.check(problem)
    x0 = as_vector(x_a0, "x_a0")
    n = x0.size
    x_ref = None if reference is None else as_vector(reference, "reference")
    if x_ref is None and problem.reference_solution is not None:
        x_ref = as_vector(problem.reference_solution, "reference_solution")
    gamma = float(config.gamma0)
    x_b = _checked(problem.b(gamma, x0), n, "resolvent of B")
    u_b = (x0 - x_b) / gamma
    trace = Trace(meta={"reference": None if x_ref is None else "user", "variant": "accelerated",
                        "branch": config.branch})
    start = time.perf_counter()
    state = None
    for k in range(max_iter):
        state = _state(problem, gamma, x_b, u_b, k)
        dist = None if x_ref is None else float(np.linalg.norm(state.x_b - x_ref))
        trace.records.append(TraceRecord(k, state.fpr_sq, problem.split_objective(state.x_a, state.x_b), dist,
                                         gamma, 1.0, time.perf_counter() - start))
        if keep_states:
            trace.states.append(state)
        if state.fpr_sq <= tol * tol:
            trace.meta["status"] = "converged"
            break
        if config.branch == "cocoercive":
            gamma_next = next_stepsize_cocoercive(gamma, problem.b.mu, problem.c.mu_c, config.eta)
        else:
            gamma_next = next_stepsize_lipschitz(gamma, problem.b.mu, problem.c.l_c)
        w = state.x_a + gamma * u_b
        x_b = _checked(problem.b(gamma, w), n, "resolvent of B")
        u_b = (w - x_b) / gamma
        gamma = gamma_next
    else:
        trace.meta["status"] = "max_iter"
    trace.meta["iterations"] = len(trace.records)
    return state, trace


def find_rho(a: ProxOperator, c: ForwardOperator, gamma: float, z, x_b):
    """Backtrack ``ρ ∈ {1, 1/2, 1/4, …}`` down to ``1e−6`` until the descent test passes.

    For each candidate, ``x_A = J_{γρA}(x_B + ρ(x_B − z) − γρ∇h(x_B))`` is
    accepted when ``h(x_A) <= h(x_B) + ⟨x_A − x_B, ∇h(x_B)⟩ + ‖x_A − x_B‖²/(2γρ)``
    up to ``1e−12``.

    Parameters
    ----------
    a : ProxOperator
        Resolvent of ``A``.
    c : ForwardOperator
        Gradient of ``h``; ``c.value`` must evaluate ``h``.

    Returns
    -------
    rho : float
    x_a : ndarray
    """
    if c.value is None:
        raise InvalidInputError("line search needs the value callable of h (ForwardOperator.value)")
    if not gamma > 0:
        raise StepsizeError(f"gamma must be > 0, got {gamma}")
    z = np.asarray(z, dtype=float)
    x_b = np.asarray(x_b, dtype=float)
    grad = _checked(c(x_b), x_b.size, "forward operator C")
    h_b = float(c.value(x_b))
    rho = 1.0
    while rho >= RHO_MIN:
        step = gamma * rho
        x_a = _checked(a(step, x_b + rho * (x_b - z) - step * grad), x_b.size, "resolvent of A")
        d = x_a - x_b
        if float(c.value(x_a)) <= h_b + float(d @ grad) + float(d @ d) / (2 * step) + ARMIJO_SLACK:
            return rho, x_a
        rho *= 0.5
    raise LineSearchError(f"line search failed: no rho >= {RHO_MIN} satisfies the descent test")


def linesearch_step(problem: ThreeOperatorProblem, gamma: float, z, rho: float):
    """One step ``z ↦ z − x_B + x_A(ρ)`` at a fixed ``rho``; returns ``(z_next, x_b, x_a)``."""
    z = as_vector(z, "z")
    x_b = _checked(problem.b(gamma, z), z.size, "resolvent of B")
    grad = _checked(problem.c(x_b), z.size, "forward operator C")
    step = gamma * rho
    x_a = _checked(problem.a(step, x_b + rho * (x_b - z) - step * grad), z.size, "resolvent of A")
    return z - x_b + x_a, x_b, x_a


def solve_linesearch(problem: ThreeOperatorProblem, gamma: float, z0, max_iter=10_000, tol=1e-10,
                     *, reference=None, keep_states=False):
    """Iterate ``z⁺ = z + x_A − x_B`` with ``ρ`` chosen by :func:`find_rho` each step.

    Accepted ``ρ`` values are stored in ``trace.extra["rho"]``.  The run is
    aborted with :class:`DivergenceError` if ``fpr_sq`` stays above ten times
    its running minimum for 100 consecutive steps.
    """
    if not gamma > 0:
        raise StepsizeError(f"gamma must be > 0, got {gamma}")
    z = as_vector(z0, "z0").copy()
    n = z.size
    x_ref = None if reference is None else as_vector(reference, "reference")
    if x_ref is None and problem.reference_solution is not None:
        x_ref = as_vector(problem.reference_solution, "reference_solution")
    trace = Trace(meta={"reference": None if x_ref is None else "user", "variant": "linesearch"},
                  extra={"rho": []})
    start = time.perf_counter()
    best = math.inf
    strikes = 0
    state = None
    for k in range(max_iter):
        x_b = _checked(problem.b(gamma, z), n, "resolvent of B")
        rho, x_a = find_rho(problem.a, problem.c, gamma, z, x_b)
        d = x_a - x_b
        fpr = float(d @ d)
        u_b = (z - x_b) / gamma
        c_xb = problem.c(x_b)
        u_a = (x_b + rho * (x_b - z) - gamma * rho * c_xb - x_a) / (gamma * rho)
        state = SolverState(z, x_b, u_b, x_a, u_a, c_xb, k, float(gamma), fpr)
        dist = None if x_ref is None else float(np.linalg.norm(x_b - x_ref))
        trace.records.append(TraceRecord(k, fpr, problem.split_objective(x_a, x_b), dist, gamma, 1.0,
                                         time.perf_counter() - start))
        trace.extra["rho"].append(rho)
        if keep_states:
            trace.states.append(state)
        if fpr <= tol * tol:
            trace.meta["status"] = "converged"
            break
        best = min(best, fpr)
        strikes = strikes + 1 if fpr > DIVERGENCE_FACTOR * best else 0
        if strikes >= DIVERGENCE_PATIENCE:
            raise DivergenceError(
                f"line search iteration diverging: fpr_sq above {DIVERGENCE_FACTOR}x its minimum "
                f"for {DIVERGENCE_PATIENCE} steps", residual=fpr)
        z = z + d
    else:
        trace.meta["status"] = "max_iter"
    trace.meta["iterations"] = len(trace.records)
    return state, trace


@dataclass
class ErgodicAccumulator:
    """Running ergodic averages of ``x_B`` and ``x_A``.

    ``mode="uniform"`` weights iterate ``i`` by ``λ_i``; ``mode="weighted"``
    weights it by ``i + 1`` (normalised) and needs a constant ``λ``.
    """

    mode: str = "uniform"
    x_b: Optional[np.ndarray] = None
    x_a: Optional[np.ndarray] = None
    total_weight: float = 0.0
    k: int = -1
    lam: Optional[float] = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("uniform", "weighted"):
            raise InvalidInputError(f"unknown averaging mode {self.mode!r}; expected uniform or weighted")


def ergodic_update(acc: ErgodicAccumulator, state: SolverState, lambda_k: float) -> ErgodicAccumulator:
    """Fold ``state.x_b`` and ``state.x_a`` into the averages in place and return ``acc``."""
    lambda_k = float(lambda_k)
    if acc.mode == "weighted":
        if acc.lam is not None and lambda_k != acc.lam:
            raise InvalidInputError("weighted averaging requires a constant relaxation parameter")
        acc.lam = lambda_k
        acc.k += 1
        acc.total_weight += acc.k + 1
        share = 2.0 / (acc.k + 2)
    else:
        if not lambda_k > 0:
            raise InvalidInputError("relaxation parameters must be positive")
        acc.k += 1
        acc.total_weight += lambda_k
        share = lambda_k / acc.total_weight
    if acc.x_b is None:
        acc.x_b = np.array(state.x_b, dtype=float)
        acc.x_a = np.array(state.x_a, dtype=float)
    else:
        acc.x_b = acc.x_b + share * (state.x_b - acc.x_b)
        acc.x_a = acc.x_a + share * (state.x_a - acc.x_a)
    return acc


def ergodic_weights(mode: str, k: int, lambdas=None) -> np.ndarray:
    """Weights placed on iterates ``0..k`` by either averaging scheme."""
    if mode == "weighted":
        i = np.arange(k + 1)
        return 2.0 * (i + 1) / ((k + 1) * (k + 2))
    if mode == "uniform":
        lam = np.ones(k + 1) if lambdas is None else np.broadcast_to(np.asarray(lambdas, dtype=float), (k + 1,))
        return lam / lam.sum()
    raise InvalidInputError(f"unknown averaging mode {mode!r}")
