"""Deep Q-learning with experience replay at configurable learning-step ratios."""

from .ratio import LearnRatio, lr_grid, updates_for_step
from .trainer import RunResult, SweepResult, TrainConfig, sweep, train_run

__all__ = [
    "LearnRatio",
    "RunResult",
    "SweepResult",
    "TrainConfig",
    "lr_grid",
    "sweep",
    "train_run",
    "updates_for_step",
]
__version__ = "0.1.0"
