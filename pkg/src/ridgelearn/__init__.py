"""Query learning of sums of ridge functions via Fourier-space search."""

from .model import (
    Activation,
    Feature,
    NoiseSpec,
    QueryOracle,
    SumOfFeaturesModel,
    evaluate_model,
    gaussian_reweight_eval,
    validate_assumptions,
)
from .reference import (
    GaussianWeight,
    QuadratureValueOracle,
    TabulatedMassOracle,
    quadrature_mass_oracle,
    ridge_fourier_transform,
    sigma_hat,
    sigma_hat_quadrature,
)
from .estimators import (
    BudgetExceededError,
    Estimate,
    SmoothingScale,
    est_val,
    est_weight,
    fourier_mass_oracle,
    fourier_value_oracle,
)
from .search import (
    CandidateDirection,
    SearchConfig,
    SearchState,
    find_directions,
    greedy_angle_prune,
    is_separating,
    sample_orthonormal_basis,
    search_recurse,
    select_separated_subset,
)
from .recovery import (
    AssembledModel,
    RecoveredRidge,
    RecoveryConfig,
    assemble_model,
    eval_recovered,
    recover_ridge,
    refine_direction,
    truncated_inversion_reference,
)
from .reduction import (
    ReductionConfig,
    directional_derivative_oracle,
    integrate_ridge,
    recover_unbounded,
    smoothed_query,
)
from .harness import (
    ExperimentConfig,
    InstanceSpec,
    RunReport,
    direction_error,
    generate_instance,
    run_experiment,
    sup_error_estimate,
)

__version__ = "0.1.0"
