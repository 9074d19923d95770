"""Mollified-coefficient solver for 1-D linear hyperbolic mixed problems.

The package regularizes discontinuous coefficients into smooth
epsilon-indexed families by mollification, solves the resulting mixed
initial-boundary problems along characteristics, and provides the
diagnostics that make the regularization trustworthy: empirical growth
classification in epsilon, an a-priori sup bound, an integral-equation
cross-check solver, and weak-convergence (association) tests against exact
broken-ray solutions of the two-speed transmission problem.
"""

from .characteristics import (
    BoundaryHit,
    CharacteristicTrace,
    Foot,
    Region,
    TraceError,
    TwoSpeedMedium,
    bracket_bounds,
    broken_foot,
    classify_region,
    gamma_curve,
    trace_backward,
)
from .embedding import (
    DEFAULT_SCHEDULE,
    EmbeddingError,
    EpsilonFamily,
    GrowthClass,
    GrowthReport,
    WidthLaw,
    check_negligible,
    classify_growth,
    embed_linf,
    linear_law,
    log_inverse_law,
    smooth_cutoff,
)
from .kernels import (
    Kernel,
    KernelError,
    ScaledKernel,
    build_kernel,
    convolve,
    scale_kernel,
)
from .solver import (
    CflError,
    DeterminationDomain,
    GronwallCheck,
    GronwallInputs,
    NonConvergenceError,
    SolutionField,
    SolverError,
    SpecError,
    SystemSpec,
    check_bound,
    determination_domain,
    gronwall_bound,
    measure_gronwall_inputs,
    picard_solve,
    solve_mixed,
    validate_spec,
)
from .transmission import (
    AssociationReport,
    ConvergenceReport,
    TestFunction,
    TransmissionProblem,
    association_test,
    characteristic_convergence,
    classical_eval,
    classical_field,
    mollified_speed,
    regularized_family,
    tabulated_speed,
)

__version__ = "0.1.0"
