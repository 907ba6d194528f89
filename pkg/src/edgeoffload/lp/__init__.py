"""Self-contained linear programming: model types and a bounded revised simplex."""
from .model import EQ, GE, LE, DimensionError, LinearProgram, LPSolution, LPStatus, NotOptimalError, extract_duals
from .simplex import IterationLimitError, SimplexSolver, SingularBasisError, solve_lp

__all__ = [
    "EQ", "GE", "LE", "DimensionError", "LinearProgram", "LPSolution", "LPStatus", "NotOptimalError",
    "extract_duals", "IterationLimitError", "SimplexSolver", "SingularBasisError", "solve_lp",
]
