"""Standard-form LP/SOCP model and interior-point solver."""

from .problem import SCHEMA, AffineExpr, ConicFormatError, ConicProblem, ProblemBuilder
from .solver import ConicSolution, SolverOptions, Status, solve

__all__ = [
    "SCHEMA", "AffineExpr", "ConicFormatError", "ConicProblem", "ProblemBuilder",
    "ConicSolution", "SolverOptions", "Status", "solve",
]
