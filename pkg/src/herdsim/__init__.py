"""Sequential social-learning ("herding") dynamics with unbounded signals.

The package computes the public-belief recurrence exactly, predicts its
long-run growth via the associated differential equation, and estimates
first-mistake / time-to-learn / upset statistics by exact computation
where possible and reproducible Monte Carlo otherwise.
"""

from .signal_models import (
    GaussianSignalModel,
    ModelValidationError,
    NumericalFailure,
    PolyTailSignalModel,
    RateTargetSignalModel,
    SignalModel,
    StateOfWorld,
    build_rate_target,
    check_llr_identity,
    model_from_dict,
    model_from_json,
    model_to_json,
)
from .belief import (
    ActionLabel,
    BeliefState,
    EllStarPath,
    FirstMistakeDistribution,
    action_probability,
    d_minus,
    d_plus,
    decide,
    ell_star_path,
    first_mistake_distribution,
    log_d_minus,
    log_d_plus,
    martingale_residual,
    public_belief,
    rb_mistake_weight,
    u_plus_monotone_threshold,
    update,
)
from .asymptotics import (
    GaussianEnvelope,
    OdeSolution,
    closed_form_exponential_tail,
    closed_form_polynomial_tail,
    gaussian_envelope_solutions,
    gaussian_rate_prediction,
    iterate_recurrence,
    ratio_curve,
    solve_belief_ode,
    solve_growth_ode,
)
from .montecarlo import (
    AggregateStats,
    Trajectory,
    TrajectoryStats,
    default_checkpoints,
    estimate_mistake_curve,
    estimate_time_to_learn,
    estimate_upset_tail,
    extract_runs_and_upsets,
    merge_aggregates,
    run_trials,
    simulate_baseline_llr,
    simulate_trajectory,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    RunManifest,
    parse_config,
    run_experiment,
)

__version__ = "0.1.0"
