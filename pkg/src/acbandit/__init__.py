"""Stochasticity-constrained actor-critic contextual bandit."""

from .actor import (ConstraintConfig, EffectProblem, GramEstimate, OptimizerSettings,
                    constraint_budget, constraint_value, empirical_gram, lambda_search,
                    maximize_objective, objective)
from .config import Experiment, RunConfig, load_experiment, parse_experiment
from .critic import (CriticState, DecisionRecord, critic_init, critic_update, reward_estimate_clipped,
                     reward_estimate_raw, reward_features, residuals)
from .envs import EnvSpec, EnvState, env_next_context, env_outcome, env_true_mean
from .harness import (StudyReport, Trajectory, myopic_equilibrium, oracle_policy,
                      regret_curve, regularized_cost_eval, replicate_study, run_trajectory)
from .inference import (CovarianceReport, IntervalSet, actor_covariance, bootstrap_replicate,
                        critic_covariance, expected_ff, j_derivatives, j_score, percentile_t_ci,
                        wald_ci)
from .policy import PolicyParams, action_prob, linear_score, prob_grad, sample_action

__version__ = "0.1.0"

__all__ = [
    "ConstraintConfig", "EffectProblem", "GramEstimate", "OptimizerSettings", "constraint_budget",
    "constraint_value", "empirical_gram", "lambda_search", "maximize_objective", "objective",
    "Experiment", "RunConfig", "load_experiment", "parse_experiment", "CriticState",
    "DecisionRecord", "critic_init", "critic_update", "reward_estimate_clipped",
    "reward_estimate_raw", "reward_features", "residuals", "EnvSpec", "EnvState",
    "env_next_context", "env_outcome", "env_true_mean", "StudyReport", "Trajectory",
    "myopic_equilibrium", "oracle_policy", "regret_curve", "regularized_cost_eval",
    "replicate_study", "run_trajectory", "CovarianceReport", "IntervalSet", "actor_covariance",
    "bootstrap_replicate", "critic_covariance", "expected_ff", "j_derivatives", "j_score",
    "percentile_t_ci", "wald_ci", "PolicyParams", "action_prob", "linear_score", "prob_grad",
    "sample_action",
]
