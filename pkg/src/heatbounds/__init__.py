"""Numerical laboratory for localized gradient bounds of coupled heat-type
systems on weighted surfaces, with an optional localized Ricci-type flow.

The pieces compose in layers: ``manifold`` builds discrete geometry snapshots
(torus / flat patch / sphere, conformal factors, weights, cutoffs),
``calculus`` provides the discrete weighted operators and identity checks,
``constants`` evaluates the theorem constants and hypothesis gates,
``dynamics`` integrates the coupled systems (optionally with the flow), and
``verify`` turns trajectories plus constants into verdicts. ``cli`` wires it
all to TOML scenario files.
"""

from .backend import HAS_NUMBA, default_backend, resolve_backend
from .calculus import (
    InequalityReport,
    ScalarField,
    bochner_residual,
    delta_f_square_residual,
    gradient,
    grad_norm_sq,
    hessian,
    proof_inequalities_check,
    random_band_limited,
    scalar_field,
    weighted_laplacian,
)
from .constants import (
    HypothesisGate,
    TheoremConstants,
    gamma_constants,
    lambda_constants,
    phi_constants,
    psi_constants,
)
from .dynamics import (
    NonFiniteError,
    SystemSpec,
    SystemState,
    Trajectory,
    evolution_residual_fields,
    lemma_evolution_residual,
    solve_trajectory,
    step_system,
)
from .manifold import (
    CurvatureData,
    CutoffProfile,
    DiscreteManifold,
    GeometryError,
    GraphManifold,
    MetricDegenerationError,
    Weight,
    build_cutoff,
    build_graph_manifold,
    build_manifold,
    curvature_data,
    evolve_metric,
    gauss_curvature,
)
from .verify import (
    AuxFunctionReport,
    ConvergenceStudy,
    TheoremReport,
    check_aux_function,
    check_bernstein,
    constants_for_setup,
    constants_for_trajectory,
    run_convergence_study,
    scaled_bounds,
    theorem_for,
)

__version__ = "0.1.0"

__all__ = [
    "HAS_NUMBA",
    "default_backend",
    "resolve_backend",
    "InequalityReport",
    "ScalarField",
    "bochner_residual",
    "delta_f_square_residual",
    "gradient",
    "grad_norm_sq",
    "hessian",
    "proof_inequalities_check",
    "random_band_limited",
    "scalar_field",
    "weighted_laplacian",
    "HypothesisGate",
    "TheoremConstants",
    "gamma_constants",
    "lambda_constants",
    "phi_constants",
    "psi_constants",
    "NonFiniteError",
    "SystemSpec",
    "SystemState",
    "Trajectory",
    "evolution_residual_fields",
    "lemma_evolution_residual",
    "solve_trajectory",
    "step_system",
    "CurvatureData",
    "CutoffProfile",
    "DiscreteManifold",
    "GeometryError",
    "GraphManifold",
    "MetricDegenerationError",
    "Weight",
    "build_cutoff",
    "build_graph_manifold",
    "build_manifold",
    "curvature_data",
    "evolve_metric",
    "gauss_curvature",
    "AuxFunctionReport",
    "ConvergenceStudy",
    "TheoremReport",
    "check_aux_function",
    "check_bernstein",
    "constants_for_setup",
    "constants_for_trajectory",
    "run_convergence_study",
    "scaled_bounds",
    "theorem_for",
    "__version__",
]
