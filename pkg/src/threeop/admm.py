"""Multi-block ADMM obtained by splitting the dual of a monotropic program.

Problem: minimize ``Σ f_i(x_i)`` subject to ``Σ L_i x_i = b``.

Sign convention (used everywhere in this module): the Lagrangian is
``Σ f_i(x_i) − ⟨w, Σ L_i x_i − b⟩`` and the dual objective is
``Σ d_i(w)`` with ``d_i(w) = f_i*(L_iᵀw) − ⟨w, c_i⟩`` (``c_i = b`` for the
last block, ``0`` otherwise).  Then ``∇d_i(w) = L_i x − c_i`` for
``x ∈ argmin f_i(x) − ⟨w, L_i x⟩`` and

    prox_{γd}(y) = y − γ(L x'' − c),   x'' ∈ argmin f(x) + (γ/2)‖L x − c − y/γ‖².
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DivergenceError, InvalidInputError, StepsizeError
from .numkit import as_matrix, as_vector, op_norm, solve_spd
from .splitting import Trace, TraceRecord

__all__ = [
    "ArgminOracle",
    "quadratic_block",
    "zero_block",
    "AdmmProblem",
    "prox_dual",
    "solve_admm3",
    "solve_admm_dual",
    "solve_admm_m",
]


@dataclass(frozen=True)
class ArgminOracle:
    """One block ``(f, L)`` accessed through its two minimization subproblems.

    Attributes
    ----------
    linear_argmin : callable
        ``w -> argmin_x f(x) + ⟨w, Lx⟩``.
    penalized_argmin : callable
        ``(gamma, v) -> argmin_x f(x) + (gamma/2)‖Lx − v‖²`` (any minimizer).
    L : ndarray
        The block's coupling matrix.
    value : callable, optional
        ``f``.
    mu : float
        Strong convexity modulus of ``f`` (0 when unknown).
    """

    linear_argmin: Callable[[np.ndarray], np.ndarray]
    penalized_argmin: Callable[[float, np.ndarray], np.ndarray]
    L: np.ndarray
    value: Optional[Callable[[np.ndarray], float]] = None
    mu: float = 0.0
    label: str = ""

    @property
    def dim(self) -> int:
        return self.L.shape[1]


def quadratic_block(P, c, L, mu=None, label="quadratic") -> ArgminOracle:
    """Block with ``f(x) = ½xᵀPx + cᵀx``.

    ``linear_argmin`` needs ``P`` positive definite; ``penalized_argmin``
    falls back on least squares when ``P + γLᵀL`` is singular.
    """
    p = as_matrix(P, "P")
    cv = as_vector(c, "c")
    lmat = as_matrix(L, "L")
    n = cv.size
    if p.shape != (n, n) or lmat.shape[1] != n:
        raise InvalidInputError(f"block shapes disagree: P {p.shape}, c {cv.shape}, L {lmat.shape}")
    if mu is None:
        mu = float(np.linalg.eigvalsh(0.5 * (p + p.T))[0])

    def linear_argmin(w):
        return solve_spd(p, -(cv + lmat.T @ np.asarray(w, dtype=float)))

    def penalized_argmin(gamma, v):
        m = p + gamma * lmat.T @ lmat
        rhs = gamma * lmat.T @ np.asarray(v, dtype=float) - cv
        try:
            return solve_spd(m, rhs)
        except InvalidInputError:
            return np.linalg.lstsq(m, rhs, rcond=None)[0]

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ p @ x + cv @ x)

    return ArgminOracle(linear_argmin, penalized_argmin, lmat, value, max(float(mu), 0.0), label)


def zero_block(rows, cols=1, label="vanished") -> ArgminOracle:
    """Block with ``f = 0`` and ``L = 0``; it contributes nothing to the iteration."""
    lmat = np.zeros((int(rows), int(cols)))
    return ArgminOracle(lambda w: np.zeros(cols), lambda g, v: np.zeros(cols), lmat, lambda x: 0.0, 0.0, label)


@dataclass(frozen=True)
class AdmmProblem:
    """Blocks, right-hand side and stepsize.

    The stepsize must satisfy ``gamma < 2 / Σ_{i <= m−2} ‖L_i‖²/μ_i``, which
    for three blocks is ``gamma < 2μ₁/‖L₁‖²``.
    """

    blocks: Sequence[ArgminOracle]
    b: np.ndarray
    gamma: float

    @property
    def m(self) -> int:
        return len(self.blocks)

    def stepsize_bound(self) -> float:
        head = self.blocks[: self.m - 2]
        total = 0.0
        for i, blk in enumerate(head):
            norm = op_norm(blk.L)
            if norm == 0.0:
                continue
            if not blk.mu > 0:
                raise InvalidInputError(f"block {i + 1} needs a strong convexity modulus mu > 0")
            total += norm**2 / blk.mu
        return math.inf if total == 0.0 else 2.0 / total

    def validate(self) -> None:
        if self.m < 3:
            raise InvalidInputError(f"ADMM needs at least 3 blocks, got {self.m}")
        b = as_vector(self.b, "b")
        for i, blk in enumerate(self.blocks):
            if blk.L.shape[0] != b.size:
                raise InvalidInputError(f"block {i + 1} maps into R^{blk.L.shape[0]}, expected R^{b.size}")
        bound = self.stepsize_bound()
        if not 0 < self.gamma < bound:
            raise StepsizeError(f"gamma must lie in (0, {bound!r}), got {self.gamma!r}")


def prox_dual(oracle: ArgminOracle, c, gamma: float, y):
    """``prox_{γd}`` for ``d(w) = f*(Lᵀw) − ⟨w, c⟩``; returns ``(prox, x'')``.

    >>> blk = quadratic_block([[1.0]], [0.0], [[1.0]])
    >>> float(prox_dual(blk, [0.0], 1.0, [2.0])[0][0])
    1.0
    """
    if not gamma > 0:
        raise StepsizeError(f"gamma must be > 0, got {gamma}")
    c = np.asarray(c, dtype=float)
    y = np.asarray(y, dtype=float)
    x_pp = oracle.penalized_argmin(gamma, c + y / gamma)
    return y - gamma * (oracle.L @ x_pp - c), x_pp


def _residual(blocks, xs, b):
    return sum(blk.L @ x for blk, x in zip(blocks, xs)) - b


def _objective(blocks, xs):
    if any(blk.value is None for blk in blocks):
        return None
    return float(sum(blk.value(x) for blk, x in zip(blocks, xs)))


def _run_admm(problem: AdmmProblem, w0, xm_0, max_iter, tol):
    problem.validate()
    b = as_vector(problem.b, "b")
    gamma = float(problem.gamma)
    blocks = list(problem.blocks)
    head, tail_prev, tail_last = blocks[:-2], blocks[-2], blocks[-1]
    w = as_vector(w0, "w0").copy()
    x_last = as_vector(xm_0, "x_last0").copy()
    xs = None
    trace = Trace(meta={"variant": "admm", "blocks": len(blocks), "reference": None})
    start = time.perf_counter()
    for k in range(max_iter):
        # first m-2 blocks are independent of each other
        x_head = [blk.linear_argmin(-w) for blk in head]
        base = sum(blk.L @ x for blk, x in zip(head, x_head)) - b - w / gamma
        x_prev = tail_prev.penalized_argmin(gamma, -(base + tail_last.L @ x_last))
        x_last = tail_last.penalized_argmin(gamma, -(base + tail_prev.L @ x_prev))
        xs = x_head + [x_prev, x_last]
        r = _residual(blocks, xs, b)
        w_next = w - gamma * r
        dw = w_next - w
        w = w_next
        rn, dn = float(np.linalg.norm(r)), float(np.linalg.norm(dw))
        trace.records.append(TraceRecord(k, float(dw @ dw), _objective(blocks, xs), None, gamma, 1.0,
                                         time.perf_counter() - start))
        trace.extra.setdefault("residual", []).append(rn)
        trace.extra.setdefault("w", []).append(w)
        if not (math.isfinite(rn) and math.isfinite(dn)):
            raise DivergenceError("ADMM produced non-finite values")
        if rn <= tol and dn <= tol:
            trace.meta["status"] = "converged"
            break
    else:
        trace.meta["status"] = "max_iter"
    trace.meta["iterations"] = len(trace.records)
    return w, xs, trace


def solve_admm3(problem: AdmmProblem, w0, x3_0, max_iter=10_000, tol=1e-10):
    """Three-block ADMM.

    Each iteration computes

    1. ``x₁ = argmin f₁(x) − ⟨w, L₁x⟩``
    2. ``x₂ ∈ argmin f₂(x) + (γ/2)‖L₁x₁ + L₂x + L₃x₃ − b − w/γ‖²``
    3. ``x₃ ∈ argmin f₃(x) + (γ/2)‖L₁x₁ + L₂x₂ + L₃x − b − w/γ‖²``
    4. ``w⁺ = w − γ(L₁x₁ + L₂x₂ + L₃x₃ − b)``

    and stops when both ``‖Σ L_i x_i − b‖`` and ``‖w⁺ − w‖`` are at most ``tol``.

    Returns
    -------
    w : ndarray
    x_blocks : list of ndarray
    trace : Trace
        ``fpr_sq`` holds ``‖w⁺ − w‖²``; ``extra["residual"]`` the constraint
        residual norms and ``extra["w"]`` the multipliers ``w¹, w², …``.
    """
    if len(problem.blocks) != 3:
        raise InvalidInputError(f"solve_admm3 needs exactly 3 blocks, got {len(problem.blocks)}")
    return _run_admm(problem, w0, x3_0, max_iter, tol)


def solve_admm_m(problem: AdmmProblem, w0, xm_0, max_iter=10_000, tol=1e-10):
    """ADMM for ``m >= 3`` blocks: blocks ``1..m−2`` use independent linear argmins, then two penalized steps."""
    return _run_admm(problem, w0, xm_0, max_iter, tol)


def solve_admm_dual(problem: AdmmProblem, z0, max_iter=100, tol=0.0):
    """Basic three-operator iteration on the dual ``d₁ + d₂ + d₃``.

    ``d₁`` is handled by its gradient and ``d₂, d₃`` by :func:`prox_dual`:

        w = prox_{γd₃}(z);  z½ = 2w − z − γ∇d₁(w);  z⁺ = z + prox_{γd₂}(z½) − w

    Starting from ``z0 = w0 + γ(L₃x₃⁰ − b)`` it reproduces the multipliers of
    :func:`solve_admm3` provided ``x₃⁰`` minimizes ``f₃ − ⟨w0, L₃·⟩``.

    Returns
    -------
    list of ndarray
        ``w^k`` for ``k = 0, 1, …`` (one entry per evaluated iteration).
    """
    if len(problem.blocks) != 3:
        raise InvalidInputError(f"solve_admm_dual needs exactly 3 blocks, got {len(problem.blocks)}")
    problem.validate()
    gamma = float(problem.gamma)
    b = as_vector(problem.b, "b")
    blk1, blk2, blk3 = problem.blocks
    zero = np.zeros_like(b)
    z = as_vector(z0, "z0").copy()
    ws = []
    for _ in range(max_iter):
        w, _ = prox_dual(blk3, b, gamma, z)
        ws.append(w)
        grad = blk1.L @ blk1.linear_argmin(-w)
        p2, _ = prox_dual(blk2, zero, gamma, 2 * w - z - gamma * grad)
        step = p2 - w
        z = z + step
        if not np.all(np.isfinite(z)):
            raise DivergenceError("dual iteration produced non-finite values")
        if float(np.linalg.norm(step)) <= tol:
            break
    return ws
