"""Unfitted finite element solver for the 2D quad-curl interface problem.

A stabilized Nitsche scheme on structured triangulations of [-1,1]^2: the
lowest-order curl-curl conforming element with doubled unknowns on cut
elements, ghost penalties across cut-element edges, a scaled divergence
penalty, and interface penalties with area/coefficient weighted averages.
"""

from .assembly import InterfaceWeights, LinearSystem, ProblemParams, assemble, average_weights
from .element import ElementBasis, build_reference_basis, map_covariant, poincare_bubble
from .geometry import (
    AssumptionReport,
    Classification,
    ElementTag,
    InterfaceGeometry,
    Mesh,
    build_structured_mesh,
    classify_elements,
    levelset_circle,
    levelset_peanut,
    validate_assumptions,
)
from .manufactured import (
    ExactSolution,
    ProblemData,
    example1_problem,
    example2_problem,
    example3_problem,
    example4_problem,
)
from .norms import ErrorReport, compute_errors, interpolate_global, self_convergence
from .quadrature import (
    CutDecomposition,
    QuadRule,
    decompose_cut_element,
    edge_rule,
    reference_rule,
)
from .solver import ConditionReport, SolveReport, estimate_condition, solve
from .space import DofSpace, build_space
from .study import StudyConfig, StudyResult, run_study

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
