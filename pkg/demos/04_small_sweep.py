"""
A small ratio x learning-rate sweep on HealthGrid
=================================================

Same harness as the full experiment, shrunk so it finishes in a few
minutes: two ratios, three learning rates, one seed, 10,000 env steps.
Outputs land in ./sweep_demo (results.csv, heatmap.csv, summary.csv,
curves/).
"""

from replayratio.harness import ExperimentConfig, read_csv, run_experiment
from replayratio.trainer import TrainConfig

# %%
train = TrainConfig(hidden_layers=(64, 64), total_env_steps=10_000, eval_period=2_000,
                    eval_episodes=10, seeds=(0,))
cfg = ExperimentConfig(train=train, ratios=["1:1", "1:8"], k_values=[-1, 0, 1],
                       output_dir="sweep_demo")
result = run_experiment(cfg)

# %%
print("ratio " + " ".join(f"k={k:+d}".rjust(8) for k in cfg.k_values))
for ratio, row in zip(result.ratios, result.scores):
    print(f"{ratio:>5} " + " ".join(f"{v:8.2f}" for v in row))

# %%
for row in read_csv("sweep_demo/summary.csv"):
    print(row)
