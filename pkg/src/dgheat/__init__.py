"""P1 finite elements with dG(0) time stepping for semilinear heat equations."""

from .mesh import TriMesh, build_unit_square_mesh, interior_dofs, refine_uniform
from .timegrid import (
    GridValidityReport,
    TimeGrid,
    build_uniform_grid,
    grid_from_nodes,
    nodal_value,
    temporal_mean,
    validate_grid,
)
from .quadrature import TriangleQuadrature, triangle_quadrature
from .fem import (
    NonFiniteEvaluationError,
    SpdSolveError,
    assemble_load,
    assemble_mass,
    assemble_semilinear,
    assemble_stiffness,
    assemble_weighted_mass,
    discrete_laplacian,
    fe_l1_norm,
    fe_norms,
    l2_project,
    ritz_project,
    solve_spd,
)
from .nonlinearity import Nonlinearity, builtin, slab_mean, truncate, verify_assumptions
from .solver import (
    GridValidityError,
    MarchError,
    NewtonError,
    NewtonReport,
    SolverOptions,
    SpaceTimeDG0,
    b_form_dual,
    b_form_primal,
    galerkin_residuals,
    jumps,
    march,
    solve_dual,
    solve_linear_aux,
    step_solve,
)
from .analysis import (
    ConvergenceReport,
    ErrorTriple,
    RegularityRatios,
    StudyRow,
    boundedness_check,
    eoc,
    error_norms,
    random_smooth_fe_functions,
    regularity_probe,
)
from .problems import MmsProblem, StudyProblem, get_problem, mms_source, verify_mms
from .harness import (
    ConfigError,
    StudyConfig,
    load_config,
    run_convergence_study,
    run_probe,
)

__version__ = "0.1.0"
