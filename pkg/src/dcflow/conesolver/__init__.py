"""Self-contained conic-program solver.

Supports linear equalities, variable bounds, and nonnegative /
second-order / rotated second-order cone memberships.
"""

from .ipm import (
    DUAL_INFEASIBLE,
    ITERATION_LIMIT,
    NUMERICAL_FAILURE,
    OPTIMAL,
    PRIMAL_INFEASIBLE,
    SolveReport,
    SolverSettings,
    solve,
)
from .presolve import Presolution, ProvenInfeasible, presolve
from .program import (
    Cone,
    ConeProgram,
    ProgramBuilder,
    ProgramError,
    dump_program,
    parse_dump,
)

__all__ = [
    "Cone",
    "ConeProgram",
    "ProgramBuilder",
    "ProgramError",
    "Presolution",
    "ProvenInfeasible",
    "SolveReport",
    "SolverSettings",
    "OPTIMAL",
    "PRIMAL_INFEASIBLE",
    "DUAL_INFEASIBLE",
    "ITERATION_LIMIT",
    "NUMERICAL_FAILURE",
    "dump_program",
    "parse_dump",
    "presolve",
    "solve",
]
