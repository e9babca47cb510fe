"""Weight-space interpolation of optimal value functions for scalarized
multi-objective tabular MDPs, backed by exact Gaussian-process regression."""

from .envs import (
    GridworldSpec,
    ObjectworldSpec,
    PendulumSpec,
    build_gridworld,
    build_objectworld,
    build_pendulum,
    rollout,
)
from .gp import (
    GPModel,
    MaternKernel,
    gp_fit,
    gp_predict,
    kernel_eval,
    log_marginal_likelihood,
    model_from_json,
    model_to_json,
    tune_length_scale,
)
from .harness import (
    Dataset,
    EpisodeDiffReport,
    EvalReport,
    GPSettings,
    SweepConfig,
    build_dataset,
    default_gridworld_config,
    default_objectworld_config,
    default_pendulum_config,
    evaluate_weight,
    fit_gp,
    run_gridworld_suite,
    run_objectworld_suite,
    run_pendulum_suite,
    run_sweep,
    verify_bounds,
)
from .mdp import (
    ConvergenceError,
    MDPError,
    ScalarizedMDP,
    ShapingSpec,
    TabularMDP,
    greedy_policy,
    policy_evaluation,
    q_diff_bound,
    q_from_value,
    scalarize,
    shape_reward,
    solve,
    value_diff_bound,
    value_iteration,
)

__version__ = "0.1.0"
