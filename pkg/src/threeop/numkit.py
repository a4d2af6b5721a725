"""Dense numerical kernels: Jacobi SVD, SPD solves, operator norms, seeded RNG.

Everything here is a pure function of its inputs.  Vectors are 1-d float
arrays and matrices are 2-d float arrays.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NumericalError

__all__ = [
    "as_vector",
    "as_matrix",
    "svd",
    "solve_spd",
    "cholesky",
    "cho_solve_factor",
    "op_norm",
    "make_rng",
]

SVD_MAX_SWEEPS = 60
POWER_MAX_ITER = 1000
POWER_TOL = 1e-12


def as_vector(x, name="x") -> np.ndarray:
    """Return ``x`` as a finite 1-d float array or raise InvalidInputError."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def as_matrix(m, name="M") -> np.ndarray:
    """Return ``m`` as a finite 2-d float array or raise InvalidInputError."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise InvalidInputError(f"{name} must be a nonempty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def _round_robin(n):
    """Pair schedule covering every column pair once per sweep.

    Returns a list of (p, q) index arrays; pairs inside one round are disjoint
    so their rotations commute and can be applied together.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_basis(u, keep):
    """Replace columns of ``u`` not flagged in ``keep`` by an orthonormal completion."""
    rows, cols = u.shape
    out = u.copy()
    basis = [out[:, j] for j in range(cols) if keep[j]]
    candidates = iter(np.eye(rows))
    for j in range(cols):
        if keep[j]:
            continue
        while True:
            v = next(candidates).copy()
            for _ in range(2):
                for b in basis:
                    v -= (b @ v) * b
            nv = np.linalg.norm(v)
            if nv > 1e-8:
                v /= nv
                break
        out[:, j] = v
        basis.append(v)
    return out


def svd(M, tol=1e-15):
    """Thin singular value decomposition by one-sided Jacobi rotations.

    The columns are first rotated by the eigenvectors of ``MᵀM``; Jacobi
    sweeps then restore full accuracy.

    Parameters
    ----------
    M : array_like, shape (m, n)
        Finite real matrix.
    tol : float
        Relative orthogonality threshold for skipping a column pair (floored
        at ``rows·eps``).  Columns of norm below ``eps·‖M‖_F`` are skipped.

    Returns
    -------
    U : ndarray, shape (m, k)
    S : ndarray, shape (k,)
        Nonincreasing singular values, ``k = min(m, n)``.
    V : ndarray, shape (n, k)

    Raises
    ------
    NumericalError
        If the columns are not mutually orthogonal after ``SVD_MAX_SWEEPS``
        sweeps.  The largest remaining relative inner product is attached.
    """
    a = as_matrix(M)
    if a.shape[0] < a.shape[1]:
        v, s, u = svd(a.T, tol)
        return u, s, v
    rows, n = a.shape
    # eigenvectors of the Gram matrix leave nearly orthogonal columns, so the
    # rotations below only polish and typically finish in two sweeps
    _, v_start = np.linalg.eigh(a.T @ a)
    v_start = v_start[:, ::-1]
    # row j holds column j of the rotated matrix followed by column j of V
    work = np.hstack([(a @ v_start).T, v_start.T])
    rounds = _round_robin(n)
    thresh = max(tol, rows * np.finfo(float).eps)
    # columns below this squared norm are rounding noise and need no rotation
    negligible = (np.finfo(float).eps * np.linalg.norm(a)) ** 2
    off = 0.0
    for _ in range(SVD_MAX_SWEEPS):
        rotated = False
        off = 0.0
        for p, q in rounds:
            if p.size == 0:
                continue
            wp, wq = work[p], work[q]
            ap, aq = wp[:, :rows], wq[:, :rows]
            alpha = np.einsum("ij,ij->i", ap, ap)
            beta = np.einsum("ij,ij->i", aq, aq)
            gamma = np.einsum("ij,ij->i", ap, aq)
            scale = np.sqrt(alpha * beta)
            rel = np.abs(gamma) / np.where(scale > 0, scale, 1.0)
            rel = np.where(np.minimum(alpha, beta) > negligible, rel, 0.0)
            off = max(off, float(rel.max()))
            active = rel > thresh
            if not active.any():
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t = np.where(active, t, 0.0)
            c = (1.0 / np.sqrt(1.0 + t * t))[:, None]
            s = c * t[:, None]
            work[p] = c * wp - s * wq
            work[q] = s * wp + c * wq
        if not rotated:
            break
    else:
        raise NumericalError(
            f"Jacobi SVD did not converge in {SVD_MAX_SWEEPS} sweeps", residual=off
        )
    work, v = work[:, :rows].T, work[:, rows:].T
    sing = np.linalg.norm(work, axis=0)
    order = np.argsort(-sing, kind="stable")
    sing = sing[order]
    work = work[:, order]
    v = v[:, order]
    floor = max(rows, n) * np.finfo(float).eps * (sing[0] if sing.size else 0.0)
    keep = sing > floor
    u = np.zeros_like(work)
    u[:, keep] = work[:, keep] / sing[keep]
    if not np.all(keep):
        u = _complete_basis(u, keep)
    return u, sing, v


def cholesky(M):
    """Cholesky factor of a symmetric positive definite matrix (for repeated solves)."""
    m = as_matrix(M)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"cholesky: matrix must be square, got {m.shape}")
    try:
        return scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(f"matrix is not positive definite ({exc})") from exc


def cho_solve_factor(factor, b) -> np.ndarray:
    """Solve with a factor from :func:`cholesky`."""
    return scipy.linalg.cho_solve(factor, np.asarray(b, dtype=float), check_finite=False)


def solve_spd(M, b) -> np.ndarray:
    """Solve ``M x = b`` for symmetric positive definite ``M`` via Cholesky.

    Raises
    ------
    InvalidInputError
        On shape mismatch or when the factorization detects that ``M`` is
        not positive definite.
    """
    m = as_matrix(M)
    rhs = as_vector(b, "b")
    if m.shape[0] != m.shape[1] or m.shape[0] != rhs.size:
        raise InvalidInputError(
            f"solve_spd: matrix shape {m.shape} incompatible with rhs of size {rhs.size}"
        )
    try:
        factor = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(f"solve_spd: matrix is not positive definite ({exc})") from exc
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def _power(gram, start):
    x = start / np.linalg.norm(start)
    rq = float(x @ gram @ x)
    for _ in range(POWER_MAX_ITER):
        y = gram @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        new = float(x @ gram @ x)
        if abs(new - rq) < POWER_TOL:
            return new
        rq = new
    return rq


def op_norm(L) -> float:
    """Largest singular value of ``L`` by power iteration on ``LᵀL``.

    The start vector is all ones.  If the estimate falls below the largest
    column norm (a hard lower bound, reached when the start vector is
    deficient in the dominant direction) the iteration restarts from that
    column's coordinate vector.  The zero matrix returns exactly 0.
    """
    a = as_matrix(L, "L")
    if not np.any(a):
        return 0.0
    gram = a.T @ a
    lam = _power(gram, np.ones(a.shape[1]))
    col = np.linalg.norm(a, axis=0)
    if np.sqrt(max(lam, 0.0)) < col.max() * (1 - 1e-12):
        start = np.zeros(a.shape[1])
        start[int(np.argmax(col))] = 1.0
        lam = max(lam, _power(gram, start))
    return float(np.sqrt(max(lam, 0.0)))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator (Philox) keyed by a 64-bit seed and optional stream ids."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))
