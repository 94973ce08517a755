"""Exact solvers for Pandora's box with optional inspection."""

from .committing import Backup, CommittingChoice, WEITZMAN, best_committing, eval_committing
from .exact import NEG, ValueTable, optimal_action, solve, threshold_of_set, verify_certificate
from .model import (
    STOP,
    Action,
    BoxSpec,
    BudgetExceeded,
    Close,
    DiscreteDistribution,
    Instance,
    InstanceError,
    Open,
    State,
    expected_value,
    parse_instance,
    random_instance,
    serialize_instance,
)
from .ptas import (
    DiscretizationScheme,
    build_ST,
    build_scheme,
    enumerate_supports,
    eval_DTP,
    eval_TP,
    ptas_pipeline,
    round_kappa,
    round_value,
    run_ptas,
    solve_ST_exhaustive,
)
from .sim import SimStats, simulate
from .twophase import (
    IndexThresholdSequence,
    TwoPhasePolicy,
    best_two_phase,
    compute_thresholds,
    eval_two_phase,
    stage_non_exposed_utility,
    two_phase_action,
)
from .weitzman import (
    kappa_distribution,
    obligatory_opt,
    reservation_value,
    weitz_value,
    weitzman_action,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Backup",
    "BoxSpec",
    "BudgetExceeded",
    "Close",
    "CommittingChoice",
    "DiscreteDistribution",
    "DiscretizationScheme",
    "IndexThresholdSequence",
    "Instance",
    "InstanceError",
    "NEG",
    "Open",
    "STOP",
    "SimStats",
    "State",
    "TwoPhasePolicy",
    "ValueTable",
    "WEITZMAN",
    "best_committing",
    "best_two_phase",
    "build_ST",
    "build_scheme",
    "compute_thresholds",
    "enumerate_supports",
    "eval_DTP",
    "eval_TP",
    "eval_committing",
    "eval_two_phase",
    "expected_value",
    "kappa_distribution",
    "obligatory_opt",
    "optimal_action",
    "parse_instance",
    "ptas_pipeline",
    "random_instance",
    "reservation_value",
    "round_kappa",
    "round_value",
    "run_ptas",
    "serialize_instance",
    "simulate",
    "solve",
    "solve_ST_exhaustive",
    "stage_non_exposed_utility",
    "threshold_of_set",
    "two_phase_action",
    "verify_certificate",
    "weitz_value",
    "weitzman_action",
    "__version__",
]
