"""Finite-difference solver and estimate-checking harness for the singular
elliptic problem -Lap u = f h(u) + mu with zero Dirichlet data on the unit
box, where h blows up at zero and mu is a nonnegative Radon measure."""

from .fields import (
    ScalarField,
    constant,
    gaussian_bump,
    manufactured_singular,
    sin_pi,
    zero,
)
from .measures import (
    DiscretizedMeasure,
    RadonMeasure,
    mollify,
    pair,
    scale_measure,
    total_variation,
    weak_convergence_check,
)
from .mesh import (
    DiscreteOperator,
    Grid,
    GridFunction,
    LinearSolveError,
    build_grid,
    build_laplacian,
    l1_norm,
    max_norm,
    min_on_compact,
    sample_field,
    solve_spd,
)
from .singularity import (
    SingularNonlinearity,
    eval_h,
    eval_h_n,
    trunc_G,
    trunc_T,
    trunc_power,
)
from .solver import (
    ClampedSolveResult,
    ComparisonReport,
    ConvergenceFailure,
    DEFAULT_SCHEDULE,
    MonotoneReport,
    ProblemSpec,
    SandwichSpec,
    SequenceResult,
    SolveResult,
    SolverConfig,
    build_sub_super,
    comparison_check,
    distance_lower_bound_check,
    monotone_check,
    picard_step,
    solve_auxiliary_v,
    solve_clamped,
    solve_regularized,
    solve_sequence,
)
from .diagnostics import (
    DistributionSample,
    ExponentFit,
    G1T1Report,
    KatoReport,
    default_thresholds,
    discrete_gradient_magnitude,
    distribution_function,
    g1_t1_split_energies,
    kato_residual,
    lambda1_estimate,
    marcinkiewicz_fit,
    sobolev_norm,
    torsion_function,
    truncation_energy,
)

__version__ = "0.1.0"
