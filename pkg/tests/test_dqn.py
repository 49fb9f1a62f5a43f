import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from replayratio.dqn import (
    Agent,
    EpsilonSchedule,
    compute_td_targets,
    epsilon_at,
    learn_on_batch,
    learn_step,
    make_agent,
    select_action,
    sync_target,
)
from replayratio.nncore import NetworkSpec, NumericError, forward
from replayratio.replay import ReplayBuffer, Transition


def bias_agent(q_values, **kw) -> Agent:
    """Agent whose Q-values are the output biases (input weights zero)."""
    agent = make_agent(NetworkSpec(1, (), len(q_values)), 0, **kw)
    for net in (agent.online, agent.target):
        net.weights[0][...] = 0.0
        net.biases[0][...] = q_values
    return agent


class TestEpsilon:
    def test_start(self):
        assert epsilon_at(EpsilonSchedule(1.0, 0.1, 1000), 0) == 1.0

    def test_end(self):
        s = EpsilonSchedule(1.0, 0.1, 1000)
        assert epsilon_at(s, 1000) == 0.1 and epsilon_at(s, 10**6) == 0.1

    def test_midpoint(self):
        assert epsilon_at(EpsilonSchedule(1.0, 0.1, 1000), 500) == pytest.approx(0.55, abs=1e-15)

    @given(st.integers(1, 5000), st.integers(0, 10_000), st.integers(0, 10_000))
    def test_monotone(self, anneal, a, b):
        s = EpsilonSchedule(1.0, 0.1, anneal)
        lo, hi = sorted((a, b))
        assert epsilon_at(s, lo) >= epsilon_at(s, hi)

    def test_invalid(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(0.1, 0.5, 10)


class TestSelectAction:
    def test_pure_exploration_uniform(self):
        agent = bias_agent([0.0, 5.0, 0.0, 0.0])
        rng = np.random.default_rng(0)
        acts = [select_action(agent, np.zeros(1), 1.0, rng) for _ in range(8000)]
        assert stats.chisquare(np.bincount(acts, minlength=4)).pvalue > 0.01

    def test_greedy(self):
        agent = bias_agent([1.0, 3.0, 2.0])
        assert select_action(agent, np.zeros(1), 0.0, np.random.default_rng(0)) == 1

    def test_tie_lowest_index(self):
        agent = bias_agent([2.0, 2.0])
        assert select_action(agent, np.zeros(1), 0.0, np.random.default_rng(0)) == 0


class TestTargets:
    def test_terminal_cut(self):
        agent = bias_agent([50.0, 70.0])
        t = Transition(np.zeros(1), 0, -130.0, np.ones(1), True)
        assert compute_td_targets([t], agent.target, 1.0)[0] == -130.0

    def test_myopic(self):
        agent = bias_agent([50.0, 70.0])
        batch = [Transition(np.zeros(1), 0, r, np.ones(1), False) for r in (1.0, -2.0, 3.5)]
        np.testing.assert_array_equal(compute_td_targets(batch, agent.target, 0.0), [1.0, -2.0, 3.5])

    def test_bootstrap(self):
        agent = bias_agent([10.0, 3.0])
        t = Transition(np.zeros(1), 1, 125.0, np.ones(1), False)
        assert compute_td_targets([t], agent.target, 1.0)[0] == 135.0

    def test_non_finite(self):
        agent = bias_agent([np.inf, 0.0])
        t = Transition(np.zeros(1), 0, 1.0, np.ones(1), False)
        with pytest.raises(NumericError):
            compute_td_targets([t], agent.target, 1.0)


class TestLearnStep:
    def test_zero_error_fixed_point(self):
        agent = bias_agent([4.0, -1.0])
        buf = ReplayBuffer(10)
        buf.push(Transition(np.zeros(1), 0, 4.0, np.zeros(1), True))
        before = agent.online.flat.copy()
        loss = learn_step(agent, buf, 1, 1e-2, np.random.default_rng(0))
        assert loss == 0.0
        np.testing.assert_array_equal(agent.online.flat, before)
        assert agent.learn_steps_done == 1

    def test_sync_on_thousandth_step(self):
        agent = bias_agent([0.0, 0.0], target_sync_period=1000)
        agent.learn_steps_done = 998
        buf = ReplayBuffer(10)
        buf.push(Transition(np.zeros(1), 0, 1.0, np.zeros(1), True))
        rng = np.random.default_rng(0)
        target_before = agent.target.flat.copy()
        learn_step(agent, buf, 1, 1e-2, rng)  # 999: no sync
        np.testing.assert_array_equal(agent.target.flat, target_before)
        learn_step(agent, buf, 1, 1e-2, rng)  # 1000: sync after the update
        assert agent.learn_steps_done == 1000
        np.testing.assert_array_equal(agent.target.flat, agent.online.flat)
        assert not np.array_equal(agent.target.flat, target_before)
        learn_step(agent, buf, 1, 1e-2, rng)  # 1001: target frozen again
        assert not np.array_equal(agent.target.flat, agent.online.flat)

    def test_two_state_hand_computed_loss(self):
        # Q(s) = W^T onehot(s) + b with hand-set values; target net differs from online
        agent = make_agent(NetworkSpec(2, (), 2), 0, discount=1.0)
        agent.online.weights[0][...] = [[1.0, 2.0], [3.0, -1.0]]
        agent.online.biases[0][...] = [0.5, 0.0]
        agent.target.weights[0][...] = [[0.0, 1.0], [2.0, 0.0]]
        agent.target.biases[0][...] = [0.0, 0.5]
        s0, s1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        buf = ReplayBuffer(10)
        buf.push(Transition(s0, 1, 2.0, s1, False))   # y = 2 + max(2, 0.5) = 4; q = 2 -> err -2
        buf.push(Transition(s1, 0, -1.0, s0, True))   # y = -1; q = 3.5 -> err 4.5
        errs = {0: -2.0, 1: 4.5}
        idx = np.random.default_rng(5).integers(0, 2, size=2)
        expected = np.mean([errs[int(i)] ** 2 for i in idx])
        loss = learn_step(agent, buf, 2, 1e-3, np.random.default_rng(5))
        assert loss == pytest.approx(expected, rel=1e-14)

    def test_non_taken_actions_get_no_gradient(self):
        agent = make_agent(NetworkSpec(3, (), 4), 1)
        rng = np.random.default_rng(0)
        obs = rng.normal(size=(16, 3))
        actions = np.full(16, 2)
        before = agent.online.flat.copy()
        learn_on_batch(agent, obs, actions, rng.normal(size=16), rng.normal(size=(16, 3)),
                       np.zeros(16, bool), 1e-2)
        changed = agent.online.weights[0] != before[:12].reshape(3, 4)
        assert changed[:, 2].all()
        assert not changed[:, [0, 1, 3]].any()

    def test_insufficient_data_propagates(self):
        from replayratio.replay import InsufficientDataError

        agent = bias_agent([0.0, 0.0])
        buf = ReplayBuffer(10)
        buf.push(Transition(np.zeros(1), 0, 1.0, np.zeros(1), True))
        with pytest.raises(InsufficientDataError):
            learn_step(agent, buf, 32, 1e-3, np.random.default_rng(0))

    def test_huber_option(self):
        agent = bias_agent([0.0, 0.0], loss="huber")
        loss = learn_on_batch(agent, np.zeros((1, 1)), np.array([0]), np.array([3.0]),
                              np.zeros((1, 1)), np.array([True]), 1e-3)
        assert loss == 2.5


class TestSync:
    def test_copy_semantics(self):
        agent = make_agent(NetworkSpec(4, ((8, "relu"),), 3), 2)
        agent.online.flat[...] += 0.1
        sync_target(agent)
        probe = np.random.default_rng(0).normal(size=(20, 4))
        assert forward(agent.online, probe).tobytes() == forward(agent.target, probe).tobytes()

    def test_snapshot(self):
        agent = make_agent(NetworkSpec(2, (), 2), 2)
        sync_target(agent)
        snap = agent.target.flat.copy()
        learn_on_batch(agent, np.ones((1, 2)), np.array([0]), np.array([5.0]),
                       np.ones((1, 2)), np.array([True]), 1e-2)
        np.testing.assert_array_equal(agent.target.flat, snap)

    def test_idempotent(self):
        agent = make_agent(NetworkSpec(2, (), 2), 2)
        sync_target(agent)
        first = agent.target.flat.copy()
        sync_target(agent)
        np.testing.assert_array_equal(agent.target.flat, first)
