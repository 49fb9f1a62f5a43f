"""Training loop at a fixed learning-step ratio, and the ratio x learning-rate sweep."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dqn import EpsilonSchedule, epsilon_at, learn_step, make_agent, select_action
from .envs import ENV_NAMES, make_env
from .evaluation import (
    EvalPoint,
    aggregate_seeds,
    ema_smooth,
    final_score,
    run_eval,
)
from .nncore import NetworkSpec, NumericError
from .ratio import K_VALUES, LearnRatio, as_ratio, lr_for, updates_for_step
from .replay import ReplayBuffer, Transition

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    env: str = "healthgrid"
    env_config: dict = field(default_factory=dict)
    hidden_layers: tuple = (128, 128)
    total_env_steps: int = 50_000
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_sync: int = 1_000
    discount: float = 1.0
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.1
    epsilon_anneal_fraction: float = 0.1
    frame_skip: int = 1
    learn_ratio: LearnRatio = LearnRatio(1, 1)
    learning_rate: float = 5e-5
    warmup_transitions: int = 1_000
    eval_period: int = 5_000
    eval_episodes: int = 25
    seeds: tuple = (0, 1, 2, 3, 4)
    rmsprop_smoothing: float = 0.95
    rmsprop_eps: float = 1e-6
    loss: str = "mse"
    ema_epsilon: float = 0.8

    def __post_init__(self):
        self.learn_ratio = as_ratio(self.learn_ratio)
        self.hidden_layers = tuple(int(w) for w in self.hidden_layers)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.env_config = dict(self.env_config)
        if self.env not in ENV_NAMES:
            raise ValueError(f"env must be one of {ENV_NAMES}, got {self.env!r}")
        positive = ("batch_size", "buffer_capacity", "target_sync", "frame_skip",
                    "eval_period", "eval_episodes")
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.total_env_steps < 0 or self.warmup_transitions < 0:
            raise ValueError("total_env_steps and warmup_transitions must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.epsilon_anneal_fraction <= 1:
            raise ValueError("epsilon_anneal_fraction must lie in (0, 1]")

    @property
    def anneal_steps(self) -> int:
        return max(1, round(self.epsilon_anneal_fraction * self.total_env_steps))

    def epsilon_schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.epsilon_initial, self.epsilon_final, self.anneal_steps)

    def env_factory(self):
        return make_env(self.env, self.env_config, self.frame_skip)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["learn_ratio"] = str(self.learn_ratio)
        d["hidden_layers"] = list(self.hidden_layers)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class RunResult:
    seed: int
    eval_curve: list[EvalPoint]
    final_score: float
    final_reward: float
    ema_scores: list[float]
    n_updates: int
    env_steps: int = 0
    diverged: bool = False
    error: str | None = None
    config: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        """True when there was no evaluation point to score."""
        return not self.eval_curve


def network_spec_for(config: TrainConfig, env) -> NetworkSpec:
    return NetworkSpec(
        input_dim=env.obs_dim,
        hidden_layers=tuple((w, "relu") for w in config.hidden_layers),
        output_dim=env.n_actions,
    )


def build_agent(config: TrainConfig, seed: int, env=None):
    env = env or config.env_factory()
    return make_agent(
        network_spec_for(config, env),
        seed,
        target_sync_period=config.target_sync,
        discount=config.discount,
        smoothing=config.rmsprop_smoothing,
        divisor_epsilon=config.rmsprop_eps,
        loss=config.loss,
    )


def _summarise(config: TrainConfig, seed: int, curve: list[EvalPoint], n_updates: int,
               env_steps: int, diverged: bool, error: str | None) -> RunResult:
    ema = ema_smooth([p.mean_score for p in curve], config.ema_epsilon)
    ema_r = ema_smooth([p.mean_reward for p in curve], config.ema_epsilon)
    score = 0.0 if diverged else final_score(ema)
    reward = 0.0 if diverged else final_score(ema_r)
    return RunResult(seed, curve, score, reward, ema, n_updates, env_steps, diverged, error,
                     config.to_dict())


def train_run(config: TrainConfig, seed: int, agent=None, on_eval=None) -> RunResult:
    """Train one agent for ``config.total_env_steps`` environment steps.

    Each step: act epsilon-greedily, step the environment, store the
    transition, then run however many learning updates the ratio schedule
    grants for this step. The first ``warmup_transitions`` steps only collect
    experience (the schedule still advances). Evaluation runs every
    ``eval_period`` steps on a separate environment and does not count
    against the step budget.

    A non-finite loss, target or gradient marks the run as diverged: training
    stops, the remaining evaluation points are recorded as 0 and the final
    score is 0.
    """
    ss = np.random.SeedSequence(seed)
    env_rng, act_rng, replay_rng, eval_rng = (np.random.default_rng(s) for s in ss.spawn(4))
    env = config.env_factory()
    if agent is None:
        agent = build_agent(config, seed, env)
    buffer = ReplayBuffer(config.buffer_capacity)
    schedule = config.epsilon_schedule()
    ratio = config.learn_ratio
    lr = config.learning_rate
    batch_size = config.batch_size
    warmup = config.warmup_transitions
    period = config.eval_period

    curve: list[EvalPoint] = []
    n_updates = 0
    acc = Fraction(0)
    env_steps = 0
    diverged, error = False, None
    obs = env.reset(int(env_rng.integers(2**31)))
    for t in range(1, config.total_env_steps + 1):
        action = select_action(agent, obs, epsilon_at(schedule, t - 1), act_rng)
        res = env.step(action)
        env_steps = t
        buffer.push(Transition(obs, action, res.reward, res.obs, res.terminal))
        obs = env.reset(int(env_rng.integers(2**31))) if res.terminal else res.obs

        count, acc = updates_for_step(ratio, acc)
        if t > warmup:
            try:
                for _ in range(count):
                    learn_step(agent, buffer, batch_size, lr, replay_rng)
                    n_updates += 1
            except NumericError as exc:
                diverged, error = True, f"step {t}: {exc}"
                log.warning("seed %s ratio %s lr %.3g diverged at %s", seed, ratio, lr, error)
                break

        if t % period == 0:
            point = run_eval(agent, config.env_factory, config.eval_episodes,
                             int(eval_rng.integers(2**31)), env_step=t)
            curve.append(point)
            if on_eval is not None:
                on_eval(point, agent)

    if diverged:
        done = len(curve)
        for i in range(done + 1, config.total_env_steps // period + 1):
            curve.append(EvalPoint(i * period, 0.0, 0.0))
    return _summarise(config, seed, curve, n_updates, env_steps, diverged, error)


def guarded_run(runner, config: TrainConfig, seed: int) -> RunResult:
    """Call ``runner`` and turn any exception into a flagged zero-score result."""
    try:
        return runner(config, seed)
    except Exception as exc:  # a failed run must not take the sweep down
        log.exception("run seed=%s failed", seed)
        return _summarise(config, seed, [], 0, 0, True, f"{type(exc).__name__}: {exc}")


@dataclass
class SweepResult:
    ratios: list[str]
    k_values: list[int]
    runs: dict  # (ratio str, k) -> list[RunResult]
    scores: np.ndarray  # (n_ratios, n_k) seed-averaged final score
    rewards: np.ndarray

    def lr(self, ratio: str, k: int) -> float:
        return lr_for(ratio, k)

    @property
    def best_k_index(self) -> list[int]:
        # first maximum = smallest k = smallest learning rate on ties
        return [int(np.argmax(row)) for row in self.scores]

    def best(self) -> list[dict]:
        rows = []
        for i, ratio in enumerate(self.ratios):
            j = self.best_k_index[i]
            rows.append({
                "ratio": ratio,
                "k": self.k_values[j],
                "learning_rate": lr_for(ratio, self.k_values[j]),
                "score": float(self.scores[i, j]),
                "reward": float(self.rewards[i, j]),
            })
        return rows


def sweep(base_config: TrainConfig, ratios: Sequence, seeds: Sequence[int],
          k_values: Sequence[int] = K_VALUES,
          seed_fn: Callable[[str, int, int], int] | None = None,
          parallelism: int = 1,
          runner: Callable[[TrainConfig, int], RunResult] = train_run) -> SweepResult:
    """Run every (ratio, k, seed) cell and aggregate over seeds.

    ``seed_fn(ratio, k, seed)`` maps a seed label to the actual run seed
    (identity by default). Results are collected in a fixed order whatever
    the degree of parallelism.
    """
    ratios = [str(as_ratio(r)) for r in ratios]
    k_values = [int(k) for k in k_values]
    seeds = [int(s) for s in seeds]
    if not ratios or not k_values or not seeds:
        raise ValueError("ratios, k_values and seeds must be non-empty")
    seed_fn = seed_fn or (lambda ratio, k, s: s)

    jobs = []
    for ratio in ratios:
        for k in k_values:
            cfg = replace(base_config, learn_ratio=LearnRatio.parse(ratio),
                          learning_rate=lr_for(ratio, k))
            for s in seeds:
                jobs.append(((ratio, k), cfg, seed_fn(ratio, k, s)))

    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(guarded_run, runner, cfg, seed) for _, cfg, seed in jobs]
            results = [f.result() for f in futures]
    else:
        results = [guarded_run(runner, cfg, seed) for _, cfg, seed in jobs]

    runs: dict = {}
    for (key, _, _), res in zip(jobs, results):
        runs.setdefault(key, []).append(res)
    scores = np.zeros((len(ratios), len(k_values)))
    rewards = np.zeros_like(scores)
    for i, ratio in enumerate(ratios):
        for j, k in enumerate(k_values):
            agg = aggregate_seeds(runs[(ratio, k)])
            scores[i, j] = agg.score
            rewards[i, j] = agg.reward
    return SweepResult(ratios, k_values, runs, scores, rewards)


