"""Tracking solvers for time-varying linearly constrained strongly convex programs."""

from .bench import RunSpec, SweepSpec, compare_budgeted, fit_slope, run_single, run_sweep
from .bounds import (
    BoundReport,
    asymptotic_errors,
    baseline_error_bounds,
    bound_report,
    convergence_conditions,
    deltas,
    drift_bounds,
    qp_perturbation_bounds,
)
from .distributed import (
    CommGraph,
    CommBudgetLog,
    LiftedProblem,
    LocalObjective,
    build_lifted,
    random_connected_graph,
    simulate_distributed_adupc,
)
from .dual import (
    DualAscentConfig,
    balanced_stepsize,
    contraction_factor,
    dual_ascent,
    running_dual_ascent,
    solve_oracle,
)
from .errors import (
    ConfigError,
    DegenerateFit,
    DisconnectedGraph,
    DupcError,
    InfeasibleRHS,
    NoConvergence,
    NotContractive,
    SingularHessian,
    SingularKKT,
    ZeroMatrix,
    ZeroSamplingPeriod,
)
from .prediction import approx_prediction, backward_diff_mixed_grad, exact_prediction_kkt
from .problem import (
    ConstraintSet,
    PrimalDualState,
    SmoothnessBounds,
    TimeVaryingProblem,
    analyze_constraints,
    project_onto_image,
)
from .scenarios import Scenario, generate_scenario
from .tracker import RuntimeBudget, TrackerConfig, compute_budget, run_adupc, run_baseline
from .trajectory import TrajectoryLog

__version__ = "0.1.0"
