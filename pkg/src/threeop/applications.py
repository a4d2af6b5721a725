"""Problem-class front ends and the primal-dual forms of the basic iteration."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergenceError, InvalidInputError, StepsizeError
from .numkit import as_matrix, as_vector
from .operators import (ForwardOperator, ProxOperator, compose_gradient, grad_feasibility, identity_prox,
                        project_box, prox_nuclear, quadratic_forward)
from .splitting import RelaxationSchedule, ThreeOperatorProblem, Trace, TraceRecord, solve_basic

__all__ = [
    "solve_split_feasibility",
    "solve_three_objective",
    "solve_multi_reg",
    "observations_from_mask",
    "solve_matrix_completion",
    "QpSpec",
    "solve_constrained_qp",
    "PrimalDualState",
    "solve_primal_dual",
]


def _schedule(beta, gamma, lambdas, epsilon=None):
    if epsilon is None:
        return RelaxationSchedule.default(beta, gamma, lambdas)
    gamma = (beta if math.isfinite(beta) else 1.0) if gamma is None else gamma
    return RelaxationSchedule(float(gamma), float(epsilon), lambdas)


def solve_split_feasibility(c1: ProxOperator, c2: ProxOperator, c3: ProxOperator, l, gamma=None, lambdas=1.0,
                            z0=None, max_iter=100_000, tol=1e-10, epsilon=None, **kwargs):
    """Find ``x ∈ C₁ ∩ C₂`` with ``Lx ∈ C₃``.

    Uses ``A = N_{C₁}``, ``B = N_{C₂}`` and ``C = Lᵀ(L· − P_{C₃}(L·))`` whose
    cocoercivity is ``1/‖L‖²``, so ``gamma`` must stay below ``2/‖L‖²``.

    Returns
    -------
    x : ndarray
        ``J_{γB}`` of the final iterate (a point of ``C₂``).
    trace : Trace
        ``trace.meta["distance_c3"]`` holds the final ``d(Lx, C₃)``.
    """
    lmat = as_matrix(l, "L")
    c_op = grad_feasibility(lmat, c3)
    problem = ThreeOperatorProblem(c1, c2, c_op)
    sched = _schedule(c_op.beta, gamma, lambdas, epsilon)
    z = np.zeros(lmat.shape[1]) if z0 is None else z0
    state, trace = solve_basic(problem, sched, z, max_iter, tol, **kwargs)
    x = state.x_b
    y = lmat @ x
    trace.meta["distance_c3"] = float(np.linalg.norm(y - c3(1.0, y)))
    return x, trace


def solve_three_objective(prox_f: ProxOperator, prox_g: ProxOperator, l, grad_h: ForwardOperator, gamma=None,
                          lambdas=1.0, z0=None, max_iter=100_000, tol=1e-10, epsilon=None, **kwargs):
    """Minimize ``f(x) + g(x) + h(Lx)`` with ``C = Lᵀ∇h(L·)``; ``l=None`` means the identity.

    Returns ``(x, trace)`` with ``x = prox_{γg}`` of the final iterate.
    """
    c_op = compose_gradient(l, grad_h)
    problem = ThreeOperatorProblem(prox_f, prox_g, c_op)
    sched = _schedule(c_op.beta, gamma, lambdas, epsilon)
    if z0 is None:
        if l is None:
            raise InvalidInputError("z0 is required when L is not given")
        z0 = np.zeros(as_matrix(l, "L").shape[1])
    state, trace = solve_basic(problem, sched, z0, max_iter, tol, **kwargs)
    return state.x_b, trace


def solve_multi_reg(regs: Sequence[ProxOperator], l, grad_h: ForwardOperator, gamma=None, lambdas=1.0, z0s=None,
                    max_iter=100_000, tol=1e-10, epsilon=None, keep_iterates=False):
    """Minimize ``Σ_i r_i(x) + h(Lx)`` by consensus over ``m`` copies of ``x``.

    Per iteration: ``x = mean(z_i)``, one gradient ``g = Lᵀ∇h(Lx)``, then for
    every block ``z_i½ = 2x − z_i − (γ/m) g`` and
    ``z_i⁺ = z_i + λ(prox_{γ r_i}(z_i½) − x)``.  The product-space forward
    operator is ``m·β``-cocoercive, so ``gamma < 2mβ·ε``.

    Returns
    -------
    x : ndarray
        Final consensus point.
    trace : Trace
        ``extra["x"]`` and ``extra["z"]`` hold per-iteration iterates when
        ``keep_iterates`` is set.
    """
    regs = list(regs)
    m = len(regs)
    if m < 1:
        raise InvalidInputError("solve_multi_reg needs at least one regularizer")
    c_op = compose_gradient(l, grad_h)
    sched = _schedule(m * c_op.beta, gamma, lambdas, epsilon)
    sched.validate(m * c_op.beta)
    if z0s is None:
        if l is None:
            raise InvalidInputError("z0s is required when L is not given")
        z0s = [np.zeros(as_matrix(l, "L").shape[1])] * m
    zs = np.array([as_vector(z, "z0s[i]") for z in z0s], dtype=float)
    if zs.shape[0] != m:
        raise InvalidInputError(f"expected {m} starting blocks, got {zs.shape[0]}")
    n = zs.shape[1]
    gamma = sched.gamma
    values = [r.value for r in regs]
    trace = Trace(meta={"variant": "multi_reg", "blocks": m, "reference": None})
    if keep_iterates:
        trace.extra["x"], trace.extra["z"] = [], []
    start = time.perf_counter()
    x = zs.mean(axis=0)
    for k in range(max_iter):
        lam = sched.check_lambda(k)
        x = zs.mean(axis=0)
        grad = np.asarray(c_op(x), dtype=float)
        half = 2.0 * x - zs - (gamma / m) * grad
        prox = np.array([r(gamma, half[i]) for i, r in enumerate(regs)], dtype=float)
        if prox.shape != (m, n) or not np.all(np.isfinite(prox)):
            raise DivergenceError("regularizer prox returned invalid values")
        diff = prox - x
        fpr = float(np.sum(diff * diff))
        obj = None
        if all(v is not None for v in values) and c_op.value is not None:
            obj = float(sum(v(p) for v, p in zip(values, prox)) + c_op.value(x))
        trace.records.append(TraceRecord(k, fpr, obj, None, gamma, lam, time.perf_counter() - start))
        if keep_iterates:
            trace.extra["x"].append(x)
            trace.extra["z"].append(zs.copy())
        if fpr <= tol * tol:
            trace.meta["status"] = "converged"
            break
        zs = zs + lam * diff
    else:
        trace.meta["status"] = "max_iter"
    trace.meta["iterations"] = len(trace.records)
    return x, trace


def observations_from_mask(x0, mask):
    """``(i, j, value)`` triples for the ``True`` entries of ``mask``."""
    x0 = np.asarray(x0, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if x0.shape != mask.shape:
        raise InvalidInputError(f"x0 shape {x0.shape} differs from mask shape {mask.shape}")
    ii, jj = np.nonzero(mask)
    return [(int(i), int(j), float(x0[i, j])) for i, j in zip(ii, jj)]


def solve_matrix_completion(observations, mu, l_bound, u_bound, rows, cols, gamma=1.0, lambdas=1.0, z0=None,
                            max_iter=100_000, tol=1e-10, epsilon=None, **kwargs):
    """Box-constrained nuclear-norm matrix completion.

    Minimizes ``½‖mask ⊙ (X − X₀)‖² + μ‖X‖_*`` subject to ``l <= X <= u`` with
    ``f`` the box indicator, ``g = μ‖·‖_*`` and ``h`` the masked fit (β = 1).

    Parameters
    ----------
    observations : iterable of (i, j, value)
    mu : float
        Nuclear-norm weight (``mu = 0`` drops the regularizer).
    l_bound, u_bound : float or array_like
    rows, cols : int

    Returns
    -------
    X : ndarray, shape (rows, cols)
    trace : Trace
        ``extra["rmse"]`` holds the observed-entry RMSE of every ``x_B``.
    """
    rows, cols = int(rows), int(cols)
    mask = np.zeros((rows, cols), dtype=bool)
    x0 = np.zeros((rows, cols))
    for i, j, v in observations:
        if not (0 <= i < rows and 0 <= j < cols):
            raise InvalidInputError(f"observation ({i}, {j}) outside a {rows}x{cols} matrix")
        mask[i, j] = True
        x0[i, j] = float(v)
    if not mask.any():
        raise InvalidInputError("at least one observed entry is required")
    if mu < 0:
        raise InvalidInputError(f"mu must be >= 0, got {mu}")
    flat_mask = mask.reshape(-1).astype(float)
    flat_x0 = x0.reshape(-1)
    count = int(mask.sum())

    def fit_residual(x):
        return flat_mask * (np.asarray(x, dtype=float) - flat_x0)

    def fit_value(x):
        r = fit_residual(x)
        return 0.5 * float(r @ r)

    grad_h = ForwardOperator(fit_residual, 1.0, 0.0, 1.0, "masked fit", fit_value)
    lo = np.broadcast_to(np.asarray(l_bound, dtype=float), (rows, cols)).reshape(-1)
    hi = np.broadcast_to(np.asarray(u_bound, dtype=float), (rows, cols)).reshape(-1)
    box = project_box(lo, hi)
    nuclear = prox_nuclear(mu, rows, cols) if mu > 0 else identity_prox()
    problem = ThreeOperatorProblem(box, nuclear, grad_h)
    sched = _schedule(1.0, gamma, lambdas, epsilon)
    rmse = []

    def record(state, lam):
        rmse.append(math.sqrt(2.0 * fit_value(state.x_b) / count))

    z = np.clip(flat_x0, lo, hi) if z0 is None else np.asarray(z0, dtype=float).reshape(-1)
    state, trace = solve_basic(problem, sched, z, max_iter, tol, callback=record, **kwargs)
    trace.extra["rmse"] = rmse
    return state.x_b.reshape(rows, cols), trace


@dataclass(frozen=True)
class QpSpec:
    """``min ½⟨Qx, x⟩ + ⟨c, x⟩`` over ``C₁ ∩ C₂``.

    ``precondition`` replaces ``Q`` by ``P_{C₂} Q P_{C₂}``; this needs
    ``c2.projector`` (a linear projection).
    """

    q: np.ndarray
    c: np.ndarray
    c1: ProxOperator
    c2: ProxOperator
    precondition: bool = False

    def effective_q(self):
        q = as_matrix(self.q, "Q")
        if q.shape[0] != q.shape[1] or not np.allclose(q, q.T, atol=1e-12, rtol=0):
            raise InvalidInputError("Q must be square and symmetric")
        if self.precondition:
            if self.c2.projector is None:
                raise InvalidInputError("preconditioning requires C2 to be a linear subspace projection")
            p = self.c2.projector
            q = p @ q @ p
            q = 0.5 * (q + q.T)
        return q


def solve_constrained_qp(spec: QpSpec, gamma=None, lambdas=1.0, z0=None, max_iter=100_000, tol=1e-10,
                         epsilon=None, **kwargs):
    """Solve the QP with ``A = N_{C₂}``, ``B = N_{C₁}``, ``C = Qx + c``; returns ``(x ∈ C₁, trace)``."""
    q = spec.effective_q()
    c = as_vector(spec.c, "c")
    c_op = quadratic_forward(q, c)
    problem = ThreeOperatorProblem(spec.c2, spec.c1, c_op)
    sched = _schedule(c_op.beta, gamma, lambdas, epsilon)
    z = np.zeros(c.size) if z0 is None else z0
    state, trace = solve_basic(problem, sched, z, max_iter, tol, **kwargs)
    return state.x_b, trace


@dataclass
class PrimalDualState:
    x: np.ndarray
    y: np.ndarray
    tau: float
    sigma: float


def _dual_resolvent(a: ProxOperator, sigma, v):
    """``J_{σA⁻¹}(v) = v − σ J_{σ⁻¹A}(v/σ)``."""
    return v - sigma * a(1.0 / sigma, v / sigma)


def solve_primal_dual(problem: ThreeOperatorProblem, tau, sigma=None, x0=None, y0=None, variant="fbs_pd",
                      max_iter=100_000, tol=1e-10, *, correction=True, keep_iterates=False):
    """Primal-dual iteration on ``x`` and a dual variable ``y ∈ Ax``.

    ``variant="fbs_pd"``::

        x⁺ = J_{τB}(x − τCx − τy)
        y⁺ = J_{σA⁻¹}(y + σ(2x⁺ − x))

    ``variant="equivalent_form"`` (``σ = 1/τ``)::

        x⁺ = J_{τB}(x − τCx − τy)
        y⁺ = J_{σA⁻¹}(y + σ(2x⁺ − x) + Cx − Cx⁺)

    The second form reproduces the basic iteration with ``λ = 1`` through
    ``x ↔ x_B``, ``y ↔ u_A``.  ``correction=False`` drops the ``Cx − Cx⁺`` term.
    Stops when ``‖Δx‖² + ‖Δy‖² <= tol²``.

    Returns
    -------
    x, y : ndarray
    trace : Trace
        ``extra["x"]``/``extra["y"]`` hold iterates when ``keep_iterates`` is set.
    """
    if not tau > 0:
        raise StepsizeError(f"tau must be > 0, got {tau}")
    if variant == "equivalent_form":
        if sigma is not None and not math.isclose(sigma, 1.0 / tau, rel_tol=1e-12):
            raise StepsizeError("equivalent_form requires sigma = 1/tau")
        sigma = 1.0 / tau
    elif variant == "fbs_pd":
        if sigma is None or not sigma > 0:
            raise StepsizeError(f"sigma must be > 0, got {sigma}")
    else:
        raise InvalidInputError(f"unknown variant {variant!r}; expected fbs_pd or equivalent_form")
    x = as_vector(x0, "x0").copy()
    y = np.zeros_like(x) if y0 is None else as_vector(y0, "y0").copy()
    use_corr = variant == "equivalent_form" and correction
    trace = Trace(meta={"variant": variant, "reference": None})
    if keep_iterates:
        trace.extra["x"], trace.extra["y"] = [x.copy()], [y.copy()]
    start = time.perf_counter()
    c_x = np.asarray(problem.c(x), dtype=float)
    for k in range(max_iter):
        x_new = np.asarray(problem.b(tau, x - tau * c_x - tau * y), dtype=float)
        c_new = np.asarray(problem.c(x_new), dtype=float)
        v = y + sigma * (2.0 * x_new - x)
        if use_corr:
            v = v + (c_x - c_new)
        y_new = _dual_resolvent(problem.a, sigma, v)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(y_new))):
            raise DivergenceError("primal-dual iteration produced non-finite values")
        dx, dy = x_new - x, y_new - y
        fpr = float(dx @ dx + dy @ dy)
        x, y, c_x = x_new, y_new, c_new
        trace.records.append(TraceRecord(k, fpr, problem.total_objective(x), None, float(tau), 1.0,
                                         time.perf_counter() - start))
        if keep_iterates:
            trace.extra["x"].append(x.copy())
            trace.extra["y"].append(y.copy())
        if fpr <= tol * tol:
            trace.meta["status"] = "converged"
            break
    else:
        trace.meta["status"] = "max_iter"
    trace.meta["iterations"] = len(trace.records)
    trace.meta["state"] = PrimalDualState(x, y, float(tau), float(sigma))
    return x, y, trace
