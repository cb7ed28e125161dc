"""Reduced-order feedback control of semi-discretized PDEs.

The pipeline: build a benchmark control system (`models`), compress it with
one of four Petrov-Galerkin reduction methods (`reduction`), solve the
reduced dynamic-programming problem by semi-Lagrangian value iteration
(`hjb`) and benchmark the resulting feedback against the exact LQR solution
(`benchmarks`).  Dense matrix-equation solvers live in `linalg`.
"""

from . import errors
from .benchmarks import (
    ComparisonReport,
    LqrSolution,
    ScenarioConfig,
    burgers_config,
    closed_loop_lqr,
    emit_report,
    heat_config,
    load_config,
    quadrature_cost,
    run_lqr_reference,
    run_table1,
    run_table2,
)
from .hjb import ValueGrid, ValueIterationSolver, closed_loop, interpolate
from .linalg import SvdResult, lu_solve, solve_are, solve_lyapunov, svd, sym_eig
from .models import (
    ControlSystem,
    Trajectory,
    build_advection_diffusion,
    build_burgers,
    simulate,
    simulate_adjoint,
)
from .reduction import (
    AdjointPODReducer,
    BalancedTruncationReducer,
    PODReducer,
    ReducedBasis,
    ReducedSystem,
    RiccatiReducer,
    bt_basis,
    make_reducer,
    pod_basis,
    project,
    riccati_basis,
    snapshot_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "SvdResult",
    "svd",
    "sym_eig",
    "lu_solve",
    "solve_lyapunov",
    "solve_are",
    "ControlSystem",
    "Trajectory",
    "build_advection_diffusion",
    "build_burgers",
    "simulate",
    "simulate_adjoint",
    "ReducedBasis",
    "ReducedSystem",
    "pod_basis",
    "bt_basis",
    "riccati_basis",
    "project",
    "snapshot_matrix",
    "PODReducer",
    "AdjointPODReducer",
    "BalancedTruncationReducer",
    "RiccatiReducer",
    "make_reducer",
    "ValueGrid",
    "ValueIterationSolver",
    "interpolate",
    "closed_loop",
    "ScenarioConfig",
    "heat_config",
    "burgers_config",
    "load_config",
    "LqrSolution",
    "run_lqr_reference",
    "closed_loop_lqr",
    "quadrature_cost",
    "ComparisonReport",
    "run_table1",
    "run_table2",
    "emit_report",
]
