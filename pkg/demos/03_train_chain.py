"""
DQN on a five-state chain
=========================

The chain has a known optimal Q-table (value iteration), so it is the
cheapest way to see the whole loop working: epsilon-greedy acting,
replay, target network, RMSProp.
"""

import numpy as np

from replayratio.envs import ChainMDP, value_iteration
from replayratio.nncore import forward
from replayratio.trainer import TrainConfig, build_agent, train_run

# %%
cfg = TrainConfig(env="chain", hidden_layers=(), buffer_capacity=1_000, target_sync=100,
                  total_env_steps=20_000, learning_rate=3e-4, eval_period=5_000, eval_episodes=1)
agent = build_agent(cfg, seed=3)
result = train_run(cfg, seed=3, agent=agent)
print("updates:", result.n_updates, "eval returns:", [p.mean_score for p in result.eval_curve])

# %%
# With discount 1 and no step cost, every non-terminal Q* entry is 1.
q = forward(agent.online, np.eye(5))[:4]
q_star = value_iteration(ChainMDP(), 1.0)[:4]
print(np.round(q, 3))
print("max |Q - Q*|:", np.abs(q - q_star).max())

# %%
# Both actions are worth exactly 1 everywhere, so the greedy choice rests on
# tiny estimation differences (ties go to the lower index, "left"). An eval
# return of 0 means the greedy policy was looping at that checkpoint.
