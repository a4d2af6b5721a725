"""Resolvent-backed monotone operators and cocoercive forward operators.

A :class:`ProxOperator` wraps ``J_{γA}`` as a callable ``resolvent(gamma, z)``;
a :class:`ForwardOperator` wraps a single-valued cocoercive map.  Both carry
the regularity constants consumed by stepsize rules and rate certificates.
Unknown constants are encoded as 0 (moduli) and ``inf`` (Lipschitz bounds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError
from .numkit import as_matrix, as_vector, cho_solve_factor, cholesky, op_norm, svd

__all__ = [
    "ProxOperator",
    "ForwardOperator",
    "identity_prox",
    "zero_forward",
    "make_quadratic_prox",
    "quadratic_forward",
    "project_box",
    "project_simplex",
    "project_halfspace",
    "project_hyperplane",
    "project_subspace",
    "prox_l1",
    "prox_nuclear",
    "grad_feasibility",
    "compose_gradient",
]

INDICATOR_TOL = 1e-9


@dataclass(frozen=True)
class ProxOperator:
    """Maximal monotone operator given through its resolvent.

    Attributes
    ----------
    resolvent : callable
        ``resolvent(gamma, z)`` returns ``(I + gamma A)^{-1} z``.
    mu : float
        Strong monotonicity modulus (0 when unknown).
    lipschitz : float
        Lipschitz constant of the operator (``inf`` when unknown or set-valued).
    label : str
        Human-readable description.
    value : callable, optional
        Value of the underlying convex function when ``A`` is a subdifferential.
    projector : ndarray, optional
        Matrix of the resolvent when it is a γ-independent linear projection.
    """

    resolvent: Callable[[float, np.ndarray], np.ndarray]
    mu: float = 0.0
    lipschitz: float = math.inf
    label: str = ""
    value: Optional[Callable[[np.ndarray], float]] = field(default=None, compare=False)
    projector: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __call__(self, gamma, z):
        return self.resolvent(gamma, z)


@dataclass(frozen=True)
class ForwardOperator:
    """Single-valued β-cocoercive operator.

    ``beta = inf`` denotes the zero operator (cocoercive for every modulus).
    """

    forward: Callable[[np.ndarray], np.ndarray]
    beta: float
    mu_c: float = 0.0
    l_c: float = math.inf
    label: str = ""
    value: Optional[Callable[[np.ndarray], float]] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError(f"ForwardOperator beta must be > 0, got {self.beta}")

    def __call__(self, x):
        return self.forward(x)


def _indicator(test):
    def value(x):
        return 0.0 if test(np.asarray(x, dtype=float)) else math.inf

    return value


def identity_prox(label="zero") -> ProxOperator:
    """Resolvent of the zero operator (``f = 0``)."""
    return ProxOperator(lambda gamma, z: np.array(z, dtype=float), 0.0, 0.0, label, lambda x: 0.0)


def zero_forward(label="zero") -> ForwardOperator:
    """The zero forward operator (``h = 0``)."""
    return ForwardOperator(lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                           math.inf, 0.0, 0.0, label, lambda x: 0.0)


def make_quadratic_prox(P, c, mu=0.0, lipschitz=None, label="quadratic") -> ProxOperator:
    """Resolvent of the gradient of ``x ↦ ½ xᵀPx + cᵀx``.

    Parameters
    ----------
    P : array_like, shape (n, n)
        Symmetric positive semidefinite matrix.
    c : array_like, shape (n,)
    mu, lipschitz : float
        Extreme eigenvalues of ``P`` (caller supplied).  ``lipschitz``
        defaults to ``op_norm(P)``.

    Notes
    -----
    ``resolvent(gamma, z)`` solves ``(I + gamma P) x = z - gamma c``.
    """
    p = as_matrix(P, "P")
    cv = as_vector(c, "c")
    n = cv.size
    if p.shape != (n, n):
        raise InvalidInputError(f"P has shape {p.shape}, expected {(n, n)}")
    if lipschitz is None:
        lipschitz = op_norm(p)
    eye = np.eye(n)
    if not np.any(p):
        def resolvent(gamma, z):
            z = np.asarray(z, dtype=float)
            if z.shape != (n,):
                raise InvalidInputError(f"quadratic resolvent expects dim {n}, got {z.shape}")
            return z - gamma * cv
    else:
        cache = {}

        def resolvent(gamma, z):
            z = np.asarray(z, dtype=float)
            if z.shape != (n,):
                raise InvalidInputError(f"quadratic resolvent expects dim {n}, got {z.shape}")
            # factor reuse for repeated stepsizes; invisible to callers
            factor = cache.get(gamma)
            if factor is None:
                factor = cholesky(eye + gamma * p)
                if len(cache) > 8:
                    cache.clear()
                cache[gamma] = factor
            return cho_solve_factor(factor, z - gamma * cv)

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ p @ x + cv @ x)

    return ProxOperator(resolvent, float(mu), float(lipschitz), label, value)


def quadratic_forward(P, c, mu_c=0.0, label="quadratic gradient") -> ForwardOperator:
    """Forward operator ``x ↦ Px + c`` with ``beta = 1/‖P‖``."""
    p = as_matrix(P, "P")
    cv = as_vector(c, "c")
    if p.shape != (cv.size, cv.size):
        raise InvalidInputError(f"P has shape {p.shape}, expected {(cv.size, cv.size)}")
    norm = op_norm(p)
    beta = 1.0 / norm if norm > 0 else math.inf

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ p @ x + cv @ x)

    return ForwardOperator(lambda x: p @ x + cv, beta, float(mu_c), norm, label, value)


def project_box(l, u, label="box") -> ProxOperator:
    """Projection onto ``{x : l <= x <= u}``; bounds may be infinite."""
    lo = np.atleast_1d(np.asarray(l, dtype=float))
    hi = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
        raise InvalidInputError("box bounds must not be NaN")
    if np.any(lo > hi):
        raise InvalidInputError("box bounds require l <= u componentwise")

    def resolvent(gamma, z):
        return np.clip(np.asarray(z, dtype=float), lo, hi)

    test = _indicator(lambda x: bool(np.all(x >= lo - INDICATOR_TOL) and np.all(x <= hi + INDICATOR_TOL)))
    return ProxOperator(resolvent, 0.0, math.inf, label, test)


def _simplex(z):
    srt = np.sort(z)[::-1]
    cum = np.cumsum(srt) - 1.0
    idx = np.arange(1, z.size + 1)
    rho = np.nonzero(srt - cum / idx > 0)[0][-1]
    theta = cum[rho] / (rho + 1)
    return np.maximum(z - theta, 0.0)


def project_simplex(label="simplex") -> ProxOperator:
    """Projection onto the standard simplex by sort-and-threshold."""

    def resolvent(gamma, z):
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or z.size == 0:
            raise InvalidInputError("simplex projection expects a nonempty vector")
        return _simplex(z)

    test = _indicator(lambda x: bool(np.all(x >= -INDICATOR_TOL) and abs(x.sum() - 1.0) <= INDICATOR_TOL))
    return ProxOperator(resolvent, 0.0, math.inf, label, test)


def project_halfspace(m, r, label="halfspace") -> ProxOperator:
    """Projection onto ``{x : ⟨m, x⟩ >= r}``."""
    normal = as_vector(m, "m")
    nn = float(normal @ normal)
    if nn == 0.0:
        raise InvalidInputError("halfspace normal vector must be nonzero")
    r = float(r)

    def resolvent(gamma, z):
        z = np.asarray(z, dtype=float)
        gap = r - float(normal @ z)
        return z + (gap / nn) * normal if gap > 0 else z.copy()

    test = _indicator(lambda x: float(normal @ x) >= r - INDICATOR_TOL)
    return ProxOperator(resolvent, 0.0, math.inf, label, test)


def project_hyperplane(m, r=0.0, label="hyperplane") -> ProxOperator:
    """Projection onto ``{x : ⟨m, x⟩ = r}``; linear (with a matrix) when ``r = 0``."""
    normal = as_vector(m, "m")
    nn = float(normal @ normal)
    if nn == 0.0:
        raise InvalidInputError("hyperplane normal vector must be nonzero")
    r = float(r)

    def resolvent(gamma, z):
        z = np.asarray(z, dtype=float)
        return z + ((r - float(normal @ z)) / nn) * normal

    matrix = np.eye(normal.size) - np.outer(normal, normal) / nn if r == 0.0 else None
    test = _indicator(lambda x: abs(float(normal @ x) - r) <= INDICATOR_TOL * max(1.0, math.sqrt(nn)))
    return ProxOperator(resolvent, 0.0, math.inf, label, test, matrix)


def project_subspace(basis, label="subspace") -> ProxOperator:
    """Orthogonal projection onto the column span of ``basis``."""
    b = as_matrix(basis, "basis")
    u, s, _ = svd(b)
    rank = int(np.sum(s > max(b.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)))
    q = u[:, :rank]
    matrix = q @ q.T

    def resolvent(gamma, z):
        return matrix @ np.asarray(z, dtype=float)

    test = _indicator(lambda x: float(np.linalg.norm(matrix @ x - x)) <= INDICATOR_TOL * max(1.0, float(np.linalg.norm(x))))
    return ProxOperator(resolvent, 0.0, math.inf, label, test, matrix)


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_l1(weight=1.0, label="l1") -> ProxOperator:
    """Proximal map of ``weight·‖x‖₁``: soft threshold at ``gamma·weight``."""
    weight = float(weight)
    if not weight > 0:
        raise InvalidInputError(f"prox_l1 weight must be > 0, got {weight}")

    def resolvent(gamma, z):
        return _soft(np.asarray(z, dtype=float), gamma * weight)

    return ProxOperator(resolvent, 0.0, math.inf, label,
                        lambda x: weight * float(np.abs(np.asarray(x, dtype=float)).sum()))


def prox_nuclear(weight, rows, cols, label="nuclear") -> ProxOperator:
    """Proximal map of ``weight·‖X‖_*`` on row-major flattened ``rows × cols`` matrices."""
    weight = float(weight)
    if not weight > 0:
        raise InvalidInputError(f"prox_nuclear weight must be > 0, got {weight}")
    rows, cols = int(rows), int(cols)

    def resolvent(gamma, z):
        z = np.asarray(z, dtype=float)
        if z.size != rows * cols:
            raise InvalidInputError(f"nuclear prox expects {rows * cols} entries, got {z.size}")
        if not np.any(z):
            return np.zeros(rows * cols)
        u, s, v = svd(z.reshape(rows, cols))
        shrunk = np.maximum(s - gamma * weight, 0.0)
        keep = shrunk > 0
        return ((u[:, keep] * shrunk[keep]) @ v[:, keep].T).reshape(-1)

    def value(x):
        x = np.asarray(x, dtype=float).reshape(rows, cols)
        return weight * float(svd(x)[1].sum()) if np.any(x) else 0.0

    return ProxOperator(resolvent, 0.0, math.inf, label, value)


def grad_feasibility(L, project_c3: ProxOperator, label="feasibility gradient") -> ForwardOperator:
    """Gradient of ``x ↦ ½ d²(Lx, C₃)``, i.e. ``Lᵀ(Lx − P(Lx))``, with ``beta = 1/‖L‖²``."""
    lmat = as_matrix(L, "L")
    norm = op_norm(lmat)
    beta = 1.0 / norm**2 if norm > 0 else math.inf

    def residual(x):
        x = np.asarray(x, dtype=float)
        if x.shape != (lmat.shape[1],):
            raise InvalidInputError(f"feasibility gradient expects dim {lmat.shape[1]}, got {x.shape}")
        y = lmat @ x
        return y - project_c3(1.0, y)

    def forward(x):
        return lmat.T @ residual(x)

    def value(x):
        d = residual(x)
        return 0.5 * float(d @ d)

    return ForwardOperator(forward, beta, 0.0, norm**2, label, value)


def compose_gradient(L, grad_h: ForwardOperator, label=None) -> ForwardOperator:
    """Forward operator ``x ↦ Lᵀ ∇h(Lx)`` with ``beta = grad_h.beta / ‖L‖²``.

    ``L = None`` returns ``grad_h`` unchanged.
    """
    if L is None:
        return grad_h
    lmat = as_matrix(L, "L")
    norm = op_norm(lmat)
    beta = grad_h.beta / norm**2 if norm > 0 else math.inf

    def forward(x):
        x = np.asarray(x, dtype=float)
        if x.shape != (lmat.shape[1],):
            raise InvalidInputError(f"composed gradient expects dim {lmat.shape[1]}, got {x.shape}")
        return lmat.T @ grad_h(lmat @ x)

    value = None if grad_h.value is None else (lambda x: grad_h.value(lmat @ np.asarray(x, dtype=float)))

    l_c = norm**2 * grad_h.l_c if norm > 0 else 0.0
    return ForwardOperator(forward, beta, 0.0, l_c, label or f"L^T grad({grad_h.label}) L", value)
