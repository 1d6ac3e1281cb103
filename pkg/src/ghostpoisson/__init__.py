"""Fourth-order ghost-point finite differences for the Poisson equation on
level-set domains embedded in a uniform Cartesian grid of [-1, 1]^2."""

from ghostpoisson.geometry import (
    Classification,
    GridField,
    GridSpec,
    NodeClass,
    classify_points,
    close_ghost_set,
    linear_index,
    neighbor_set,
)
from ghostpoisson.interp import (
    QuarticWeights,
    biquartic_eval,
    biquartic_grad,
    quartic_derivative_weights,
    quartic_value_weights,
)
from ghostpoisson.domains import DomainSpec, boundary_margin_check, sample_levelset
from ghostpoisson.boundary import GhostRecord, build_ghost_records, project_to_boundary
from ghostpoisson.assembly import ProblemData, SparseSystem, assemble, extend_source
from ghostpoisson.solver import SolveReport, condition_estimate, solve
from ghostpoisson.analysis import (
    ConvergenceReport,
    fit_order,
    gradient_field,
    relative_error,
    run_convergence_study,
)

__all__ = [
    "Classification",
    "ConvergenceReport",
    "DomainSpec",
    "GhostRecord",
    "GridField",
    "GridSpec",
    "NodeClass",
    "ProblemData",
    "QuarticWeights",
    "SolveReport",
    "SparseSystem",
    "assemble",
    "biquartic_eval",
    "biquartic_grad",
    "boundary_margin_check",
    "build_ghost_records",
    "classify_points",
    "close_ghost_set",
    "condition_estimate",
    "extend_source",
    "fit_order",
    "gradient_field",
    "linear_index",
    "neighbor_set",
    "project_to_boundary",
    "quartic_derivative_weights",
    "quartic_value_weights",
    "relative_error",
    "run_convergence_study",
    "sample_levelset",
    "solve",
]
