from dataclasses import replace

import numpy as np
import pytest

from replayratio import trainer
from replayratio.evaluation import EvalPoint
from replayratio.nncore import NumericError
from replayratio.ratio import LearnRatio, lr_for
from replayratio.trainer import RunResult, SweepResult, TrainConfig, sweep, train_run

# linear Q-function on the chain: cheap enough to run thousands of updates in a unit test
FAST = TrainConfig(env="chain", hidden_layers=(), total_env_steps=2_000, warmup_transitions=100,
                   buffer_capacity=500, target_sync=50, eval_period=500, eval_episodes=2,
                   learning_rate=1e-3)


def test_defaults_follow_hyperparameter_table():
    cfg = TrainConfig()
    assert (cfg.batch_size, cfg.buffer_capacity, cfg.target_sync, cfg.discount) == (32, 10_000, 1_000, 1.0)
    assert (cfg.epsilon_initial, cfg.epsilon_final) == (1.0, 0.1)
    assert (cfg.eval_period, cfg.eval_episodes, len(cfg.seeds)) == (5_000, 25, 5)


def test_zero_steps():
    res = train_run(replace(FAST, total_env_steps=0), 0)
    assert res.eval_curve == [] and res.final_score == 0.0 and res.degenerate
    assert res.n_updates == 0


def test_update_count_with_warmup():
    cfg = replace(FAST, total_env_steps=50_000, warmup_transitions=1_000,
                  eval_period=50_000, eval_episodes=1)
    res = train_run(cfg, 3)
    assert res.n_updates == 49_000
    assert res.env_steps == 50_000


@pytest.mark.parametrize("ratio, expected", [
    ("4:1", 4 * 1_900), ("2:1", 2 * 1_900), ("1:4", 1_900 // 4), ("1:32", 1_900 // 32),
    ("3:2", 1_900 * 3 // 2), ("1:3", 633),
])
def test_update_count_per_ratio(ratio, expected):
    # warm-up of 100 steps; schedule counts from step 1, so for u:s exactly
    # floor(t*u/s) updates have been granted by step t
    res = train_run(replace(FAST, learn_ratio=LearnRatio.parse(ratio)), 0)
    r = LearnRatio.parse(ratio)
    brute = sum(
        (t * r.updates) // r.per_steps - ((t - 1) * r.updates) // r.per_steps
        for t in range(101, 2_001)
    )
    assert res.n_updates == brute
    assert abs(brute - expected) <= r.updates


def test_env_budget_independent_of_ratio():
    steps = {train_run(replace(FAST, learn_ratio=LearnRatio.parse(r)), 0).env_steps
             for r in ("4:1", "1:1", "1:16")}
    assert steps == {2_000}


def test_curve_length_and_steps():
    res = train_run(replace(FAST, total_env_steps=2_300), 1)
    assert [p.env_step for p in res.eval_curve] == [500, 1000, 1500, 2000]
    assert len(res.ema_scores) == 4


def test_deterministic():
    a, b = train_run(FAST, 7), train_run(FAST, 7)
    assert a.eval_curve == b.eval_curve
    assert (a.final_score, a.final_reward, a.n_updates) == (b.final_score, b.final_reward, b.n_updates)


def test_seeds_differ_on_healthgrid():
    cfg = TrainConfig(hidden_layers=(8,), total_env_steps=600, warmup_transitions=100,
                      eval_period=300, eval_episodes=2, learning_rate=1e-3)
    assert train_run(cfg, 0).eval_curve != train_run(cfg, 1).eval_curve


def test_divergence_is_flagged_not_raised(monkeypatch):
    calls = {"n": 0}
    real = trainer.learn_step

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 300:
            raise NumericError("non-finite loss")
        return real(*args, **kw)

    monkeypatch.setattr(trainer, "learn_step", flaky)
    res = train_run(FAST, 0)
    assert res.diverged and "non-finite" in res.error
    assert res.final_score == 0.0 and res.final_reward == 0.0
    assert len(res.eval_curve) == 4
    assert res.eval_curve[-1] == EvalPoint(2000, 0.0, 0.0)


def _fake_runner(config, seed):
    # score depends on (ratio, lr, seed) so aggregation can be checked exactly
    score = config.learn_ratio.value * 10 + np.log2(config.learning_rate / 5e-5) + seed / 100
    return RunResult(seed, [EvalPoint(1, score, -score)], score, -score, [score], 0)


def test_sweep_full_grid_shape():
    ratios = ["4:1", "2:1", "1:1", "1:2", "1:4", "1:8", "1:16", "1:32"]
    res = sweep(TrainConfig(), ratios, [0, 1, 2, 3, 4], runner=_fake_runner)
    assert res.scores.shape == (8, 5)
    assert sum(len(v) for v in res.runs.values()) == 200
    i = ratios.index("1:4")
    expected = np.mean([0.25 * 10 + np.log2(lr_for("1:4", 1) / 5e-5) + s / 100 for s in range(5)])
    assert res.scores[i, 3] == pytest.approx(expected, rel=1e-12)


def test_sweep_singleton():
    res = sweep(FAST, ["1:1"], [4], k_values=[0])
    direct = train_run(replace(FAST, learning_rate=lr_for("1:1", 0)), 4)
    assert res.scores.shape == (1, 1)
    assert res.scores[0, 0] == direct.final_score


def test_best_lr_selection():
    res = SweepResult(["1:1"], [-2, -1, 0, 1, 2], {}, np.array([[10.0, 42, 41, 30, 5]]),
                      np.zeros((1, 5)))
    assert res.best_k_index == [1]
    assert res.best()[0]["k"] == -1
    tie = SweepResult(["1:1"], [-2, -1, 0, 1, 2], {}, np.array([[1.0, 3, 3, 2, 0]]),
                      np.zeros((1, 5)))
    assert tie.best()[0]["learning_rate"] == lr_for("1:1", -1)


def test_sweep_survives_failing_runs():
    def runner(config, seed):
        if config.learn_ratio == LearnRatio(1, 2):
            raise RuntimeError("boom")
        return _fake_runner(config, seed)

    res = sweep(TrainConfig(), ["1:1", "1:2"], [0, 1], k_values=[0], runner=runner)
    failed = res.runs[("1:2", 0)]
    assert all(r.diverged and "boom" in r.error for r in failed)
    assert res.scores[1, 0] == 0.0 and res.scores[0, 0] > 0


def test_sweep_parallel_matches_serial():
    a = sweep(FAST, ["1:1", "1:2"], [0], k_values=[0], parallelism=1)
    b = sweep(FAST, ["1:1", "1:2"], [0], k_values=[0], parallelism=2)
    assert a.scores.tobytes() == b.scores.tobytes()


def test_invalid_config():
    with pytest.raises(ValueError):
        TrainConfig(env="doom")
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
