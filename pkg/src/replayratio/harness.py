"""Experiment configuration, sweep orchestration, CSV outputs and agent checkpoints.

Output directory layout written by :func:`run_experiment`::

    results.csv        ratio,k,lr,seed,final_score,final_reward,diverged
    heatmap.csv        ratio,<k>,<k>,...   seed-averaged final score per cell
    summary.csv        ratio,k,learning_rate,score,reward   best k per ratio
    curves/<u>-<s>_<k>_<seed>.csv   env_step,mean_score,mean_reward,ema_score
    config_used.json   the fully resolved configuration
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .dqn import Agent
from .evaluation import EvalPoint, run_eval
from .nncore import (
    CheckpointError,
    Network,
    NetworkSpec,
    RMSPropState,
    read_arrays,
    write_arrays,
)
from .ratio import K_VALUES, LearnRatio, lr_for
from .trainer import RunResult, SweepResult, TrainConfig, build_agent, sweep, train_run

log = logging.getLogger(__name__)

DEFAULT_RATIOS = ("4:1", "2:1", "1:1", "1:2", "1:4", "1:8", "1:16", "1:32")
RESULTS_HEADER = ["ratio", "k", "lr", "seed", "final_score", "final_reward", "diverged"]
CURVE_HEADER = ["env_step", "mean_score", "mean_reward", "ema_score"]
SUMMARY_HEADER = ["ratio", "k", "learning_rate", "score", "reward"]


class ConfigError(ValueError):
    """Unknown key or malformed value in an experiment configuration."""


class OutputError(OSError):
    """The output directory cannot be written."""


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    ratios: list = field(default_factory=lambda: list(DEFAULT_RATIOS))
    k_values: list = field(default_factory=lambda: list(K_VALUES))
    base_seed: int = 0
    output_dir: str = "results"
    parallelism: int = 1

    def to_dict(self) -> dict:
        d = self.train.to_dict()
        d.update(ratios=list(self.ratios), k_values=list(self.k_values),
                 base_seed=self.base_seed, output_dir=str(self.output_dir),
                 parallelism=self.parallelism)
        return d


# -- parsing -----------------------------------------------------------------

_INT, _FLOAT, _STR, _INT_LIST, _RATIO, _RATIO_LIST, _DICT = (
    "integer", "number", "string", "list of integers", "ratio 'u:s'",
    "list of ratios 'u:s'", "JSON object")

KINDS = {
    "env": _STR, "env_config": _DICT, "hidden_layers": _INT_LIST,
    "total_env_steps": _INT, "batch_size": _INT, "buffer_capacity": _INT,
    "target_sync": _INT, "discount": _FLOAT, "epsilon_initial": _FLOAT,
    "epsilon_final": _FLOAT, "epsilon_anneal_fraction": _FLOAT, "frame_skip": _INT,
    "learn_ratio": _RATIO, "learning_rate": _FLOAT, "warmup_transitions": _INT,
    "eval_period": _INT, "eval_episodes": _INT, "seeds": _INT_LIST,
    "rmsprop_smoothing": _FLOAT, "rmsprop_eps": _FLOAT, "loss": _STR,
    "ema_epsilon": _FLOAT,
    "ratios": _RATIO_LIST, "k_values": _INT_LIST, "base_seed": _INT,
    "output_dir": _STR, "parallelism": _INT,
}
EXPERIMENT_KEYS = ("ratios", "k_values", "base_seed", "output_dir", "parallelism")
assert set(KINDS) == set(TrainConfig.field_names()) | set(EXPERIMENT_KEYS)


def _as_int(v) -> int:
    if isinstance(v, bool):
        raise ValueError
    if isinstance(v, float):
        if not v.is_integer():
            raise ValueError
        return int(v)
    return int(v)


def _as_list(v) -> list:
    if isinstance(v, str):
        text = v.strip()
        if text.startswith("["):
            return list(json.loads(text))
        return [p for p in text.split(",") if p.strip()]
    if isinstance(v, (list, tuple)):
        return list(v)
    raise ValueError


def _coerce(key: str, value: Any):
    kind = KINDS[key]
    try:
        if kind == _INT:
            return _as_int(value)
        if kind == _FLOAT:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind == _STR:
            if not isinstance(value, str):
                raise ValueError
            return value
        if kind == _INT_LIST:
            return [_as_int(x) for x in _as_list(value)]
        if kind == _RATIO:
            return LearnRatio.parse(value)
        if kind == _RATIO_LIST:
            return [str(LearnRatio.parse(x)) for x in _as_list(value)]
        if kind == _DICT:
            out = json.loads(value) if isinstance(value, str) else value
            if not isinstance(out, dict):
                raise ValueError
            return dict(out)
    except (ValueError, TypeError, json.JSONDecodeError):
        raise ConfigError(f"{key}: expected {kind}, got {value!r}") from None
    raise AssertionError(kind)


def build_config(values: Mapping[str, Any]) -> ExperimentConfig:
    unknown = sorted(set(values) - set(KINDS))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    clean = {k: _coerce(k, v) for k, v in values.items()}
    train_kw = {k: v for k, v in clean.items() if k not in EXPERIMENT_KEYS}
    exp_kw = {k: v for k, v in clean.items() if k in EXPERIMENT_KEYS}
    try:
        train = TrainConfig(**train_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig(train=train, **exp_kw)
    if not cfg.ratios:
        raise ConfigError("ratios: expected a non-empty list of ratios 'u:s'")
    if not cfg.k_values:
        raise ConfigError("k_values: expected a non-empty list of integers")
    if not cfg.train.seeds:
        raise ConfigError("seeds: expected a non-empty list of integers")
    if cfg.parallelism < 1:
        raise ConfigError("parallelism: expected a positive integer")
    return cfg


def parse_config(path: str | os.PathLike | None = None,
                 overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Defaults, then the JSON config file at ``path``, then ``overrides``."""
    values: dict = {}
    if path is not None:
        text = Path(path).read_text()
        if text.strip():
            try:
                loaded = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from None
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: top level must be a JSON object")
            values.update(loaded)
    values.update(overrides or {})
    return build_config(values)


# -- sweep + outputs -----------------------------------------------------------

def derive_seed(base_seed: int, ratio: str, k: int, seed_index: int) -> int:
    """Run seed that depends only on its own (ratio, k, seed) cell."""
    return int(base_seed) + zlib.crc32(f"{ratio}|{k}|{seed_index}".encode())


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def curve_filename(ratio: str, k: int, seed: int) -> str:
    return f"{ratio.replace(':', '-')}_{k}_{seed}.csv"


def check_writable(output_dir: str | os.PathLike) -> Path:
    out = Path(output_dir)
    try:
        (out / "curves").mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"cannot write to output directory {out}: {exc}") from exc
    return out


def write_outputs(out: Path, config: ExperimentConfig, result: SweepResult) -> None:
    rows = []
    for ratio in result.ratios:
        for k in result.k_values:
            for run in result.runs[(ratio, k)]:
                rows.append([ratio, k, lr_for(ratio, k), run.seed, run.final_score,
                             run.final_reward, run.diverged])
                _write_csv(out / "curves" / curve_filename(ratio, k, run.seed), CURVE_HEADER,
                           [[p.env_step, p.mean_score, p.mean_reward, e]
                            for p, e in zip(run.eval_curve, run.ema_scores)])
    _write_csv(out / "results.csv", RESULTS_HEADER, rows)
    _write_csv(out / "heatmap.csv", ["ratio"] + [str(k) for k in result.k_values],
               [[ratio] + [float(v) for v in result.scores[i]]
                for i, ratio in enumerate(result.ratios)])
    _write_csv(out / "summary.csv", SUMMARY_HEADER,
               [[b["ratio"], b["k"], b["learning_rate"], b["score"], b["reward"]]
                for b in result.best()])
    _atomic_write(out / "config_used.json",
                  json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def run_experiment(config: ExperimentConfig) -> SweepResult:
    """Run the full ratio x k x seed sweep and write every output file."""
    out = check_writable(config.output_dir)
    result = sweep(
        config.train,
        config.ratios,
        config.train.seeds,
        k_values=config.k_values,
        seed_fn=lambda ratio, k, s: derive_seed(config.base_seed, ratio, k, s),
        parallelism=config.parallelism,
    )
    write_outputs(out, config, result)
    return result


def read_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# -- checkpoints ---------------------------------------------------------------

def checkpoint(agent: Agent, path: str | os.PathLike) -> None:
    meta = {
        "kind": "agent",
        "spec": agent.online.spec.to_dict(),
        "learn_steps_done": agent.learn_steps_done,
        "target_sync_period": agent.target_sync_period,
        "discount": agent.discount,
        "loss": agent.loss,
        "smoothing": agent.optimizer.smoothing,
        "divisor_epsilon": agent.optimizer.divisor_epsilon,
    }
    write_arrays(path, meta, [agent.online.flat, agent.target.flat, agent.optimizer.square_avg])


def restore(path: str | os.PathLike) -> Agent:
    header, arrays = read_arrays(path)
    if header.get("kind") != "agent":
        raise CheckpointError(f"{path}: not an agent checkpoint")
    try:
        spec = NetworkSpec.from_dict(header["spec"])
        online, target, square_avg = arrays
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"{path}: malformed agent checkpoint") from exc
    if not (online.shape == target.shape == square_avg.shape == (spec.n_params,)):
        raise CheckpointError(f"{path}: parameter count does not match spec")
    return Agent(
        online=Network(spec, online.copy()),
        target=Network(spec, target.copy()),
        optimizer=RMSPropState(square_avg.copy(), header["smoothing"], header["divisor_epsilon"]),
        learn_steps_done=int(header["learn_steps_done"]),
        target_sync_period=int(header["target_sync_period"]),
        discount=float(header["discount"]),
        loss=header["loss"],
    )


def evaluate_checkpoint(path, train: TrainConfig, episodes: int, seed: int) -> EvalPoint:
    agent = restore(path)
    return run_eval(agent, train.env_factory, episodes, seed)


def run_single(config: ExperimentConfig, ratio: str, k: int, seed_index: int,
               checkpoint_path: str | os.PathLike | None = None) -> RunResult:
    """One (ratio, k, seed) cell, optionally saving the trained agent."""
    ratio = str(LearnRatio.parse(ratio))
    cfg = replace(config.train, learn_ratio=LearnRatio.parse(ratio),
                  learning_rate=lr_for(ratio, k))
    seed = derive_seed(config.base_seed, ratio, k, seed_index)
    agent = build_agent(cfg, seed)
    result = train_run(cfg, seed, agent=agent)
    if checkpoint_path is not None:
        checkpoint(agent, checkpoint_path)
    return result


def heatmap_from_results(rows: list[dict], ratios, k_values) -> np.ndarray:
    """Seed-averaged score matrix recomputed from results.csv rows."""
    out = np.zeros((len(ratios), len(k_values)))
    for i, ratio in enumerate(ratios):
        for j, k in enumerate(k_values):
            vals = [float(r["final_score"]) for r in rows
                    if r["ratio"] == ratio and int(r["k"]) == k]
            out[i, j] = math.fsum(vals) / len(vals)
    return out
