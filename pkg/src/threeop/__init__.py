"""Three-operator splitting for ``0 ∈ Ax + Bx + Cx`` with cocoercive ``C``."""

from .errors import (DivergenceError, InvalidInputError, LineSearchError, NumericalError, SplittingError,
                     StepsizeError)
from .operators import ForwardOperator, ProxOperator
from .splitting import (RelaxationSchedule, SolverState, ThreeOperatorProblem, Trace, TraceRecord, apply_t,
                        recover_solution, solve_basic, specialize)

__version__ = "0.1.0"

__all__ = [
    "DivergenceError",
    "InvalidInputError",
    "LineSearchError",
    "NumericalError",
    "SplittingError",
    "StepsizeError",
    "ForwardOperator",
    "ProxOperator",
    "RelaxationSchedule",
    "SolverState",
    "ThreeOperatorProblem",
    "Trace",
    "TraceRecord",
    "apply_t",
    "recover_solution",
    "solve_basic",
    "specialize",
]
