"""Dual control with online Bayesian identification of bounded disturbances.

The package simulates scalar discrete-time plants whose dynamics are scaled
and shifted by piecewise-constant disturbances, identifies the active
disturbance combination over a discretized candidate set in real time, and
closes the loop with a posterior-blended dual controller.
"""

from .config import (
    ChannelSpec,
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    parse_config,
    save_config,
)
from .controller import (
    ControlDecision,
    ControllerConfig,
    blended_control,
    candidate_control,
    candidate_control_terms,
    optimal_control,
)
from .errors import (
    BatchError,
    ConfigError,
    DualctlError,
    FitError,
    PosteriorUnderflowError,
    RunError,
    SimulationError,
    SingularControlError,
    StateError,
)
from .grid import (
    BoundedInterval,
    CandidateGrid,
    MidpointSet,
    build_candidate_set,
    grid_from_intervals,
    partition_interval,
)
from .harness import (
    BatchMetrics,
    BatchResult,
    RunMetrics,
    RunTrace,
    batch_metrics,
    excursion_count,
    recovery_streak,
    monte_carlo,
    read_trace,
    run_experiment,
    run_metrics,
    trace_change_points,
    write_trace,
)
from .learner import (
    COVARIANCE_CAP,
    POSTERIOR_FLOOR,
    LearnerState,
    ResetPolicy,
    bayes_step,
    detect_change,
    likelihood,
    log_likelihood,
    make_state,
    prediction_variance,
    reset,
    update_covariance,
    update_posteriors,
    update_posteriors_log,
)
from .plants import (
    DisturbanceSchedule,
    PlantModel,
    ReferenceSpec,
    affine_f,
    affine_g,
    reference_at,
    sample_noise,
    step_affine_case1,
    step_train,
    train_f,
    train_g,
    validate_segments,
)
from .rbf import (
    BranchGeometry,
    RbfBranch,
    RbfNetwork,
    TrainingDataset,
    branch,
    eval_basis,
    eval_network,
    geometry,
    load_network,
    predict_output,
    save_network,
    train_offline,
)

__version__ = "0.1.0"
