"""Greedy policy evaluation and the score reductions applied to evaluation curves."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dqn import Agent, greedy_action


@dataclass(frozen=True)
class EvalPoint:
    env_step: int
    mean_score: float
    mean_reward: float


EvalCurve = list  # list[EvalPoint], ordered by env_step


@dataclass
class FinalScore:
    score: float
    reward: float
    per_seed: list[tuple[int, float, float]] = field(default_factory=list)


def run_episode(agent: Agent, env, seed: int) -> tuple[float, float]:
    """One greedy episode; returns (episode score, cumulative shaped reward)."""
    obs = env.reset(seed)
    total = 0.0
    while True:
        res = env.step(greedy_action(agent.online, obs))
        total += res.reward
        obs = res.obs
        if res.terminal:
            break
    return env.episode_score(), total


def run_eval(agent: Agent, env_factory: Callable[[], object], n_episodes: int,
             base_seed: int, env_step: int = 0) -> EvalPoint:
    """Average score and reward of ``n_episodes`` greedy episodes.

    Episode ``i`` is reset with seed ``base_seed + i``. The agent is only read.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    env = env_factory()
    scores, rewards = [], []
    for i in range(n_episodes):
        s, r = run_episode(agent, env, base_seed + i)
        scores.append(s)
        rewards.append(r)
    return EvalPoint(env_step, float(np.mean(scores)), float(np.mean(rewards)))


def ema_smooth(values: Sequence[float], epsilon: float = 0.8) -> list[float]:
    """``s[0] = x[0]``, ``s[t] = epsilon * s[t-1] + (1 - epsilon) * x[t]``."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    out: list[float] = []
    for x in map(float, values):
        # x + eps*(s - x) == eps*s + (1 - eps)*x, without rounding 1 - eps first
        out.append(x if not out else x + epsilon * (out[-1] - x))
    return out


def final_score(smoothed: Sequence[float], top_fraction: float = 0.1) -> float:
    """Mean of the top ``ceil(top_fraction * n)`` values; 0.0 for an empty curve."""
    n = len(smoothed)
    if n == 0:
        return 0.0
    k = max(1, math.ceil(top_fraction * n - 1e-9))
    top = sorted(smoothed, reverse=True)[:k]
    return float(sum(top) / k)


def aggregate_seeds(results) -> FinalScore:
    """Mean final score and reward across runs (any objects with
    ``seed``, ``final_score`` and ``final_reward``)."""
    results = list(results)
    if not results:
        raise ValueError("no results to aggregate")
    per_seed = [(r.seed, r.final_score, r.final_reward) for r in results]
    # fsum is exact, so the mean does not depend on seed order
    score = math.fsum(p[1] for p in per_seed) / len(per_seed)
    reward = math.fsum(p[2] for p in per_seed) / len(per_seed)
    return FinalScore(score, reward, per_seed)
