"""Rollouts, return estimation, PPO updates and the training loop."""

from .config import TrainConfig
from .returns import compute_gae, compute_value_targets, lambda_return, lambda_returns, n_step_return
from .ppo import clipped_surrogate, ppo_update
from .rollout import Episode, RolloutBatch, collect_rollouts
from .train import evaluate, normalized_return, train

__all__ = [
    "TrainConfig", "compute_gae", "compute_value_targets", "lambda_return", "lambda_returns",
    "n_step_return", "clipped_surrogate", "ppo_update", "Episode", "RolloutBatch",
    "collect_rollouts", "evaluate", "normalized_return", "train",
]
