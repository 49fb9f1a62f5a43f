"""Deep Q-learning agent: epsilon-greedy control, TD targets, target network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nncore import (
    Network,
    NetworkSpec,
    NumericError,
    RMSPropState,
    backward,
    forward,
    forward_cache,
    init_network,
    rmsprop_step,
)
from .replay import ReplayBuffer, Transition

LOSSES = ("mse", "huber")


@dataclass(frozen=True)
class EpsilonSchedule:
    initial: float = 1.0
    final: float = 0.1
    anneal_steps: int = 5_000

    def __post_init__(self):
        if not self.initial >= self.final >= 0.0:
            raise ValueError("need initial >= final >= 0")
        if self.anneal_steps < 1:
            raise ValueError("anneal_steps must be positive")


def epsilon_at(schedule: EpsilonSchedule, env_step: int) -> float:
    if env_step >= schedule.anneal_steps:
        return schedule.final
    frac = max(env_step, 0) / schedule.anneal_steps
    return schedule.initial + (schedule.final - schedule.initial) * frac


@dataclass
class Agent:
    online: Network
    target: Network
    optimizer: RMSPropState
    learn_steps_done: int = 0
    target_sync_period: int = 1_000
    discount: float = 1.0
    loss: str = "mse"

    @property
    def n_actions(self) -> int:
        return self.online.spec.output_dim


def make_agent(spec: NetworkSpec, seed: int, *, target_sync_period: int = 1_000,
               discount: float = 1.0, smoothing: float = 0.95,
               divisor_epsilon: float = 1e-6, loss: str = "mse") -> Agent:
    if not 0.0 <= discount <= 1.0:
        raise ValueError("discount must lie in [0, 1]")
    if target_sync_period < 1:
        raise ValueError("target_sync_period must be positive")
    if loss not in LOSSES:
        raise ValueError(f"loss must be one of {LOSSES}")
    online = init_network(spec, seed)
    return Agent(
        online=online,
        target=online.copy(),
        optimizer=RMSPropState.zeros_like(online, smoothing, divisor_epsilon),
        target_sync_period=target_sync_period,
        discount=discount,
        loss=loss,
    )


def greedy_action(net: Network, obs: np.ndarray) -> int:
    # np.argmax returns the first maximum, i.e. the lowest action index on ties
    return int(np.argmax(forward(net, obs)[0]))


def select_action(agent: Agent, obs: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(agent.n_actions))
    return greedy_action(agent.online, obs)


def _td_targets(rewards, next_obs, terminals, target_net: Network, discount: float) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=np.float64)
    if discount == 0.0:
        y = rewards.copy()
    else:
        next_q = forward(target_net, next_obs).max(axis=1)
        y = rewards + discount * next_q * (1.0 - np.asarray(terminals, dtype=np.float64))
        # terminal targets are the reward, exactly, whatever the bootstrap value
        y = np.where(terminals, rewards, y)
    if not np.all(np.isfinite(y)):
        raise NumericError("non-finite TD target")
    return y


def compute_td_targets(batch: list[Transition], target_net: Network, discount: float) -> np.ndarray:
    """``r + discount * max_a' Q_target(s', a')``, or just ``r`` on terminal transitions."""
    if not batch:
        raise ValueError("empty batch")
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    next_obs = np.stack([np.asarray(t.next_obs, dtype=np.float64) for t in batch])
    terminals = np.array([t.terminal for t in batch], dtype=bool)
    return _td_targets(rewards, next_obs, terminals, target_net, discount)


def sync_target(agent: Agent) -> None:
    agent.target.load_params_from(agent.online)


def learn_on_batch(agent: Agent, obs, actions, rewards, next_obs, terminals, lr: float) -> float:
    """One optimizer step on an explicit minibatch. Returns the pre-update loss."""
    y = _td_targets(rewards, next_obs, terminals, agent.target, agent.discount)
    q, cache = forward_cache(agent.online, obs)
    n = q.shape[0]
    rows = np.arange(n)
    err = q[rows, actions] - y
    if agent.loss == "huber":
        abs_err = np.abs(err)
        loss = float(np.mean(np.where(abs_err <= 1.0, 0.5 * err * err, abs_err - 0.5)))
        dq = np.clip(err, -1.0, 1.0) / n
    else:
        loss = float(np.mean(err * err))
        dq = 2.0 * err / n
    if not np.isfinite(loss):
        raise NumericError("non-finite loss")
    # only the taken actions carry gradient
    upstream = np.zeros_like(q)
    upstream[rows, actions] = dq
    grads = backward(agent.online, obs, upstream, cache)
    rmsprop_step(agent.online, grads, agent.optimizer, lr)
    agent.learn_steps_done += 1
    if agent.learn_steps_done % agent.target_sync_period == 0:
        sync_target(agent)
    return loss


def learn_step(agent: Agent, buffer: ReplayBuffer, batch_size: int, lr: float,
               rng: np.random.Generator) -> float:
    """Sample a minibatch and apply one learning update; returns the loss."""
    obs, actions, rewards, next_obs, terminals = buffer.sample_arrays(batch_size, rng)
    return learn_on_batch(agent, obs, actions, rewards, next_obs, terminals, lr)
