"""Three-operator fixed-point map, the relaxed basic iteration and its reductions.

For maximal monotone ``A``, ``B`` and β-cocoercive ``C`` the map

    T = I − J_{γB} + J_{γA} ∘ (2J_{γB} − I − γ C ∘ J_{γB})

has fixed points ``z`` with ``J_{γB}(z)`` a zero of ``A + B + C``.  The
iteration ``z⁺ = z + λ_k (Tz − z)`` converges when ``γ < 2βε`` and
``λ_k ∈ (0, 2 − ε)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import DivergenceError, InvalidInputError, StepsizeError
from .numkit import as_vector
from .operators import ForwardOperator, ProxOperator, identity_prox, zero_forward

__all__ = [
    "ThreeOperatorProblem",
    "RelaxationSchedule",
    "SolverState",
    "TraceRecord",
    "Trace",
    "apply_t",
    "solve_basic",
    "recover_solution",
    "specialize",
    "averaged_inequality_gap",
    "strengthened_inequality_gap",
]

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True)
class ThreeOperatorProblem:
    """The inclusion ``0 ∈ Ax + Bx + Cx``.

    ``objective`` optionally supplies value callables ``(f, g, h)`` with
    ``A = ∂f``, ``B = ∂g``, ``C = ∇h``; when omitted the operators' own
    ``value`` callables are used if all three exist.
    """

    a: ProxOperator
    b: ProxOperator
    c: ForwardOperator
    objective: Optional[tuple] = None
    reference_solution: Optional[np.ndarray] = None

    def objective_triple(self):
        if self.objective is not None:
            return self.objective
        vals = (self.a.value, self.b.value, self.c.value)
        return vals if all(v is not None for v in vals) else None

    def split_objective(self, x_a, x_b):
        """``f(x_a) + g(x_b) + h(x_b)``; ``None`` without value callables."""
        triple = self.objective_triple()
        if triple is None:
            return None
        f, g, h = triple
        return float(f(x_a) + g(x_b) + h(x_b))

    def total_objective(self, x):
        """``(f + g + h)(x)``; ``None`` without value callables."""
        triple = self.objective_triple()
        if triple is None:
            return None
        return float(sum(fn(x) for fn in triple))


@dataclass(frozen=True)
class RelaxationSchedule:
    """Stepsize ``gamma``, averagedness slack ``epsilon`` and relaxations ``λ_k``.

    ``lambdas`` is a constant or a callable ``k -> λ_k``.
    """

    gamma: float
    epsilon: float
    lambdas: Union[float, Callable[[int], float]] = 1.0

    @property
    def alpha(self) -> float:
        return 1.0 / (2.0 - self.epsilon)

    @property
    def constant_lambda(self) -> bool:
        return not callable(self.lambdas)

    def lam(self, k: int) -> float:
        return float(self.lambdas(k)) if callable(self.lambdas) else float(self.lambdas)

    def tau(self, k: int) -> float:
        lam, alpha = self.lam(k), self.alpha
        return lam * (1.0 - alpha * lam) / alpha

    @classmethod
    def default(cls, beta, gamma=None, lambdas=1.0):
        """``gamma = beta`` unless given, ``epsilon = min(1 − 1e−6, gamma/(2 beta) + 1e−6)``."""
        if gamma is None:
            gamma = beta if math.isfinite(beta) else 1.0
        ratio = gamma / (2.0 * beta) if math.isfinite(beta) else 0.0
        return cls(float(gamma), min(1.0 - 1e-6, ratio + 1e-6), lambdas)

    def validate(self, beta: float) -> None:
        """Reject ``gamma``/``epsilon`` outside ``0 < gamma < 2·beta·epsilon``, ``0 < epsilon < 1``."""
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise StepsizeError(f"gamma must be positive and finite, got {self.gamma}")
        if not 0.0 < self.epsilon < 1.0:
            raise StepsizeError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not self.gamma < 2.0 * beta * self.epsilon:
            raise StepsizeError(
                f"gamma must be < 2·beta·epsilon (gamma={self.gamma!r}, beta={beta!r}, "
                f"epsilon={self.epsilon!r})"
            )
        if self.constant_lambda:
            self.check_lambda(0)

    def check_lambda(self, k: int) -> float:
        lam = self.lam(k)
        if not 0.0 < lam < 1.0 / self.alpha:
            raise StepsizeError(
                f"lambda_k must lie in (0, 1/alpha) = (0, {1.0 / self.alpha!r}); got {lam!r} at k={k}"
            )
        return lam


@dataclass
class SolverState:
    """All points produced by one evaluation of ``T`` at ``z``."""

    z: np.ndarray
    x_b: np.ndarray
    u_b: np.ndarray
    x_a: np.ndarray
    u_a: np.ndarray
    c_xb: np.ndarray
    k: int
    gamma_k: float
    fpr_sq: float

    @property
    def tz(self) -> np.ndarray:
        return self.z + self.x_a - self.x_b


@dataclass
class TraceRecord:
    k: int
    fpr_sq: float
    objective: Optional[float]
    dist_ref: Optional[float]
    gamma_k: float
    lambda_k: float
    elapsed: float


@dataclass
class Trace:
    """Per-iteration records plus run metadata.

    ``meta`` always holds ``status`` (``converged`` / ``max_iter``) and
    ``reference`` (``user``, ``self`` or ``None``).  ``states`` is filled only
    when requested; ``extra`` stores variant-specific columns.
    """

    records: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    states: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records], dtype=float)

    @property
    def converged(self) -> bool:
        return self.meta.get("status") == "converged"


def _checked(out, dim, what):
    arr = np.asarray(out, dtype=float)
    if arr.shape != (dim,):
        raise InvalidInputError(f"{what} returned shape {arr.shape}, expected ({dim},)")
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(f"{what} returned non-finite values")
    return arr


def apply_t(problem: ThreeOperatorProblem, gamma: float, z, k: int = 0) -> SolverState:
    """Evaluate ``T`` at ``z`` and return every intermediate point.

    Examples
    --------
    >>> import numpy as np
    >>> from threeop.operators import identity_prox, zero_forward
    >>> p = ThreeOperatorProblem(identity_prox(), identity_prox(), zero_forward())
    >>> apply_t(p, 1.0, np.array([3.0])).tz
    array([3.])
    """
    if not gamma > 0:
        raise StepsizeError(f"gamma must be > 0, got {gamma}")
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise InvalidInputError(f"z must be a vector, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise DivergenceError("iterate z contains non-finite values")
    n = z.size
    x_b = _checked(problem.b(gamma, z), n, "resolvent of B")
    u_b = (z - x_b) / gamma
    c_xb = _checked(problem.c(x_b), n, "forward operator C")
    reflected = 2.0 * x_b - z - gamma * c_xb
    x_a = _checked(problem.a(gamma, reflected), n, "resolvent of A")
    u_a = (reflected - x_a) / gamma
    diff = x_a - x_b
    return SolverState(z, x_b, u_b, x_a, u_a, c_xb, k, float(gamma), float(diff @ diff))


def _reference(problem, schedule, z0, max_iter, reference):
    if reference is None and problem.reference_solution is not None:
        return as_vector(problem.reference_solution, "reference_solution"), "user"
    if reference is None:
        return None, None
    if isinstance(reference, str):
        if reference != "self":
            raise InvalidInputError(f"reference must be an array, 'self' or None; got {reference!r}")
        state, _ = solve_basic(problem, schedule, z0, 10 * max_iter, 1e-14)
        return state.x_b.copy(), "self"
    return as_vector(reference, "reference"), "user"


def solve_basic(
    problem: ThreeOperatorProblem,
    schedule: Optional[RelaxationSchedule],
    z0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    *,
    reference=None,
    keep_states: bool = False,
    averaging: Optional[str] = None,
    callback=None,
):
    """Run ``z⁺ = z + λ_k (x_A − x_B)`` until ``fpr_sq <= tol²`` or ``max_iter`` evaluations.

    Parameters
    ----------
    problem : ThreeOperatorProblem
    schedule : RelaxationSchedule or None
        ``None`` selects :meth:`RelaxationSchedule.default` for ``problem.c.beta``.
    z0 : array_like
    max_iter : int
        Maximum number of evaluations of ``T`` (rows of the trace).
    tol : float
        Stop once ``‖Tz − z‖ <= tol``.
    reference : array_like, ``"self"`` or None
        Point ``x*`` for the ``dist_ref`` column.  ``"self"`` triggers a long
        run (``10·max_iter``, tol ``1e−14``).  Falls back on
        ``problem.reference_solution``.
    keep_states : bool
        Store every :class:`SolverState` in ``trace.states``.
    averaging : {None, "uniform", "weighted"}
        Maintain an ergodic average of ``x_B`` and ``x_A``, stored in
        ``trace.meta["ergodic"]``; per-step average objectives go into
        ``trace.extra["ergodic_objective"]``.
    callback : callable, optional
        Called as ``callback(state, lambda_k)`` after each evaluation.

    Returns
    -------
    state : SolverState
        The last evaluated state; the solution estimate is ``state.x_b``.
    trace : Trace
    """
    if tol < 0:
        raise InvalidInputError(f"tol must be >= 0, got {tol}")
    if max_iter < 1:
        raise InvalidInputError(f"max_iter must be >= 1, got {max_iter}")
    if schedule is None:
        schedule = RelaxationSchedule.default(problem.c.beta)
    schedule.validate(problem.c.beta)
    z = as_vector(z0, "z0").copy()
    x_ref, ref_kind = _reference(problem, schedule, z, max_iter, reference)
    acc = None
    if averaging is not None:
        from .variants import ErgodicAccumulator, ergodic_update

        acc = ErgodicAccumulator(averaging)
    trace = Trace(meta={"reference": ref_kind, "variant": "basic"})
    if acc is not None:
        trace.extra["ergodic_objective"] = []
    start = time.perf_counter()
    state = None
    tol_sq = tol * tol
    for k in range(max_iter):
        lam = schedule.check_lambda(k)
        state = apply_t(problem, schedule.gamma, z, k)
        dist = None if x_ref is None else float(np.linalg.norm(state.x_b - x_ref))
        obj = problem.split_objective(state.x_a, state.x_b)
        trace.records.append(
            TraceRecord(k, state.fpr_sq, obj, dist, schedule.gamma, lam, time.perf_counter() - start)
        )
        if keep_states:
            trace.states.append(state)
        if acc is not None:
            ergodic_update(acc, state, lam)
            trace.extra["ergodic_objective"].append(problem.split_objective(acc.x_a, acc.x_b))
        if callback is not None:
            callback(state, lam)
        if state.fpr_sq <= tol_sq:
            trace.meta["status"] = "converged"
            break
        z = z + lam * (state.x_a - state.x_b)
    else:
        trace.meta["status"] = "max_iter"
    if acc is not None:
        trace.meta["ergodic"] = acc
    trace.meta["iterations"] = len(trace.records)
    return state, trace


def recover_solution(problem: ThreeOperatorProblem, gamma: float, z_star) -> np.ndarray:
    """Map a fixed point of ``T`` to a zero of ``A + B + C`` via ``J_{γB}``."""
    z = as_vector(z_star, "z_star")
    return _checked(problem.b(gamma, z), z.size, "resolvent of B")


def _as_projection(subspace) -> ProxOperator:
    if isinstance(subspace, ProxOperator):
        return subspace
    from .operators import project_subspace

    return project_subspace(subspace, "subspace V")


def specialize(problem: ThreeOperatorProblem, mode: str, subspace=None) -> ThreeOperatorProblem:
    """Reduce the problem to a classical two-operator scheme.

    ``fbs`` drops ``B``; ``drs`` drops ``C``; ``fdrs`` keeps ``A`` and
    ``C′ = problem.c``, sets ``B = N_V`` and ``C = P_V ∘ C′ ∘ P_V`` for the
    subspace ``V`` given as a projection operator or a basis matrix.
    """
    triple = problem.objective_triple()
    if mode == "fbs":
        obj = None if triple is None else (triple[0], lambda x: 0.0, triple[2])
        return ThreeOperatorProblem(problem.a, identity_prox(), problem.c, obj, problem.reference_solution)
    if mode == "drs":
        obj = None if triple is None else (triple[0], triple[1], lambda x: 0.0)
        return ThreeOperatorProblem(problem.a, problem.b, zero_forward(), obj, problem.reference_solution)
    if mode == "fdrs":
        if subspace is None:
            raise InvalidInputError("fdrs requires a subspace projector")
        proj = _as_projection(subspace)
        inner = problem.c

        def forward(x):
            return proj(1.0, inner(proj(1.0, x)))

        sandwiched = ForwardOperator(forward, inner.beta, 0.0, inner.l_c, f"P_V {inner.label} P_V",
                                     None if inner.value is None else (lambda x: inner.value(proj(1.0, x))))
        obj = None
        if triple is not None and proj.value is not None:
            obj = (triple[0], proj.value, sandwiched.value)
        return ThreeOperatorProblem(problem.a, proj, sandwiched, obj, problem.reference_solution)
    raise InvalidInputError(f"unknown mode {mode!r}; expected fbs, drs or fdrs")


def _t_diff(problem, gamma, z, w):
    sz = apply_t(problem, gamma, as_vector(z, "z"))
    sw = apply_t(problem, gamma, as_vector(w, "w"))
    return sz, sw


def averaged_inequality_gap(problem: ThreeOperatorProblem, gamma: float, z, w, beta=None) -> float:
    """Slack in the averagedness inequality with ``α = 2β/(4β − γ)``.

    Returns ``‖z−w‖² − (1−α)/α ‖(I−T)z − (I−T)w‖² − ‖Tz − Tw‖²``, which is
    nonnegative for ``γ ∈ (0, 2β)``.
    """
    beta = problem.c.beta if beta is None else beta
    if not 0 < gamma < 2 * beta:
        raise StepsizeError(f"gamma must lie in (0, 2·beta) = (0, {2 * beta!r}), got {gamma!r}")
    alpha = 0.5 if math.isinf(beta) else 2 * beta / (4 * beta - gamma)
    sz, sw = _t_diff(problem, gamma, z, w)
    dz = sz.z - sw.z
    dres = (sz.z - sz.tz) - (sw.z - sw.tz)
    dt = sz.tz - sw.tz
    return float(dz @ dz - (1 - alpha) / alpha * (dres @ dres) - dt @ dt)


def strengthened_inequality_gap(problem: ThreeOperatorProblem, gamma: float, z, w, epsilon: float) -> float:
    """Averagedness slack with coefficient ``1/(2 − ε)`` and the cocoercivity bonus.

    Returns ``‖z−w‖² − (1−ε)‖(I−T)z − (I−T)w‖² − ‖Tz − Tw‖²
    − γ(2β − γ/ε)‖C J_{γB} z − C J_{γB} w‖²``, nonnegative for ``γ < 2βε``.
    """
    beta = problem.c.beta
    if not 0 < epsilon < 1:
        raise StepsizeError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0 < gamma < 2 * beta * epsilon:
        raise StepsizeError(f"gamma must be < 2·beta·epsilon, got gamma={gamma!r}")
    sz, sw = _t_diff(problem, gamma, z, w)
    dz = sz.z - sw.z
    dres = (sz.z - sz.tz) - (sw.z - sw.tz)
    dt = sz.tz - sw.tz
    dc = sz.c_xb - sw.c_xb
    bonus = 0.0 if math.isinf(beta) else gamma * (2 * beta - gamma / epsilon) * float(dc @ dc)
    return float(dz @ dz - (1 - epsilon) * (dres @ dres) - dt @ dt - bonus)
