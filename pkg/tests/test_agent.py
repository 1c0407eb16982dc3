import math

import numpy as np
import pytest
from scipy import stats

from qvcrl import agent
from qvcrl.agent import (
    EpsilonSchedule,
    ReplayBuffer,
    Trainer,
    TrainerConfig,
    Transition,
    compute_target,
    compute_targets,
    select_action,
    train,
)
from qvcrl.encoding import BLACKJACK_RANGES
from qvcrl.envs import Blackjack, CartPole, make_rng
from qvcrl.errors import ConfigError, UsageError
from qvcrl.models import ObsEncoder, QModel, TargetPair

BJ = ObsEncoder("scaled", BLACKJACK_RANGES)


class FixedQ:
    """Stand-in model returning a fixed Q vector for every observation."""

    def __init__(self, q):
        self.q = np.asarray(q, dtype=float)
        self.n_actions = len(self.q)

    def q_values(self, obs):
        return self.q.copy()

    def q_values_batch(self, obs):
        return np.tile(self.q, (len(obs), 1))


def tr(reward=1.0, done=False, action=0):
    z = np.zeros(3)
    return Transition(z, z, action, reward, z, z, done)


def test_greedy_and_tie_break():
    rng = np.random.default_rng(0)
    assert select_action(FixedQ([0.2, 0.9]), None, 0.0, rng) == 1
    assert select_action(FixedQ([0.5, 0.5]), None, 0.0, rng) == 0


def test_full_exploration_is_uniform():
    rng = np.random.default_rng(1)
    counts = np.bincount([select_action(FixedQ([0.0, 9.0]), None, 1.0, rng) for _ in range(10_000)], minlength=2)
    sigma = math.sqrt(10_000 * 0.25)
    assert abs(counts[0] - 5000) <= 3 * sigma


def test_bad_epsilon_rejected():
    with pytest.raises(ConfigError):
        select_action(FixedQ([0.0, 1.0]), None, 1.5, np.random.default_rng(0))


@pytest.mark.parametrize("algo", agent.ALGOS)
def test_terminal_masking(algo):
    pair = TargetPair(FixedQ([2.0, 3.0]), FixedQ([5.0, 7.0]))
    assert compute_target(tr(-1.0, done=True), pair, 0.95, algo) == -1.0


def test_terminal_masking_can_be_disabled():
    pair = TargetPair(FixedQ([2.0, 3.0]), FixedQ([2.0, 3.0]))
    assert compute_target(tr(-1.0, done=True), pair, 0.95, "qddqn", terminal_masking=False) == -1.0 + 0.95 * 3.0


def test_qddqn_target_uses_target_network_max():
    pair = TargetPair(FixedQ([9.0, -9.0]), FixedQ([2.0, 3.0]))
    y = compute_target(tr(1.0), pair, 0.95, "qddqn")
    assert y == 1.0 + 0.95 * 3.0
    assert y == pytest.approx(3.85, abs=1e-12)


def test_dqn_target_uses_online_network():
    pair = TargetPair(FixedQ([2.0, 3.0]), FixedQ([100.0, 100.0]))
    assert compute_target(tr(1.0), pair, 0.95, "dqn") == 1.0 + 0.95 * 3.0


def test_canonical_ddqn_decouples_argmax():
    pair = TargetPair(FixedQ([4.0, 1.0]), FixedQ([2.0, 3.0]))
    y = compute_target(tr(1.0), pair, 0.95, "canonical_ddqn")
    assert y == 1.0 + 0.95 * 2.0
    assert y == pytest.approx(2.9, abs=1e-12)


def test_dqn_and_qddqn_agree_after_hard_copy(rng):
    online = QModel.hybrid(3, 2, BJ, rng)
    pair = TargetPair(online, QModel.hybrid(3, 2, BJ, rng))
    agent.hard_copy(pair)
    batch = [Transition(None, None, 0, float(r), None, np.array([s, d, 0.0]), False)
             for r, s, d in zip(rng.normal(size=8), rng.integers(4, 22, 8), rng.integers(1, 11, 8))]
    assert np.array_equal(compute_targets(batch, pair, 0.95, "dqn"), compute_targets(batch, pair, 0.95, "qddqn"))


def test_epsilon_schedule_values():
    s = EpsilonSchedule()
    seen = [s.value]
    for _ in range(100):
        seen.append(s.step())
    assert seen[0] == 1.0 and seen[1] == 0.9
    assert seen[2] == 0.9 * 0.9
    for k in range(1, 44):
        assert seen[k] == max(0.01, seen[k - 1] * 0.9)
    assert all(v == 0.01 for v in seen[44:])
    assert seen[43] > 0.01
    assert seen[100] == 0.01


def test_ring_eviction():
    buf = ReplayBuffer(3)
    items = [tr(float(i)) for i in range(4)]
    for t in items:
        buf.push(t)
    assert len(buf) == 3
    assert items[0] not in list(buf)
    assert [t.reward for t in buf] == [1.0, 2.0, 3.0]


def test_single_item_batch_and_empty_buffer():
    buf = ReplayBuffer(10)
    with pytest.raises(UsageError):
        buf.sample(4, np.random.default_rng(0))
    buf.push(tr(5.0))
    batch = buf.sample(4, np.random.default_rng(0))
    assert len(batch) == 4 and all(t.reward == 5.0 for t in batch)


def test_sampling_without_replacement_once_full():
    buf = ReplayBuffer(100)
    for i in range(40):
        buf.push(tr(float(i)))
    idx = buf.sample_indices(32, np.random.default_rng(3))
    assert len(set(idx.tolist())) == 32


def test_sampling_is_uniform_chi_squared():
    buf = ReplayBuffer(10)
    for i in range(10):
        buf.push(tr(float(i)))
    rng = np.random.default_rng(4)
    idx = np.concatenate([buf.sample_indices(5, rng) for _ in range(20_000)])
    assert idx.size == 100_000
    counts = np.bincount(idx, minlength=10)
    assert stats.chisquare(counts).pvalue > 0.001


def test_config_validation():
    for bad in (dict(gamma=1.0), dict(target_period=0), dict(tau=1.2), dict(algo="sarsa"),
                dict(update_timing="never"), dict(batch_size=0)):
        with pytest.raises(ConfigError):
            TrainerConfig(**bad)


def test_hard_copy_every_c_soft_otherwise(rng):
    online = QModel.pure(3, 2, BJ, rng)
    target = online.clone()
    pair = TargetPair(online, target)
    trainer = Trainer(pair, TrainerConfig(target_period=3, tau=0.5))
    pair.target.circuit_params = np.zeros(33)
    pair.online.circuit_params = np.full(33, 4.0)
    trainer.end_episode(1)
    assert np.all(pair.target.circuit_params == 2.0)
    trainer.end_episode(2)
    assert np.all(pair.target.circuit_params == 3.0)
    pair.online.circuit_params = np.full(33, 8.0)
    trainer.end_episode(3)
    assert np.array_equal(pair.target.circuit_params, pair.online.circuit_params)


def test_dqn_mode_has_no_target_updates(rng):
    pair = TargetPair.from_online(QModel.pure(3, 2, BJ, rng))
    before = pair.target.circuit_params.copy()
    pair.online.circuit_params += 1.0
    trainer = Trainer(pair, TrainerConfig(algo="dqn", target_period=1))
    trainer.end_episode(1)
    assert np.array_equal(pair.target.circuit_params, before)


def test_target_equals_online_after_episode_c(rng):
    pair = TargetPair.from_online(QModel.pure(3, 2, BJ, rng))
    cfg = TrainerConfig(target_period=5, update_timing="per_step", batch_size=4)
    snapshots = []
    train(Blackjack(make_rng(0)), pair, cfg, EpsilonSchedule(), 5, make_rng(1),
          on_episode=lambda rec: snapshots.append(
              np.array_equal(pair.online.circuit_params, pair.target.circuit_params)))
    assert snapshots[-1]
    assert not any(snapshots[:-1])


def test_zero_learning_rate_freezes_parameters(rng):
    online = QModel.hybrid(3, 2, BJ, rng)
    pair = TargetPair.from_online(online)
    before = online.param_groups()
    cfg = TrainerConfig(lr_circuit=0.0, lr_dense=0.0, update_timing="per_step", batch_size=8)
    train(Blackjack(make_rng(2)), pair, cfg, EpsilonSchedule(), 30, make_rng(3))
    for k, v in online.param_groups().items():
        assert np.array_equal(v, before[k])


def test_matching_targets_give_zero_loss_and_no_step(rng):
    online = QModel.hybrid(3, 2, BJ, rng)
    pair = TargetPair.from_online(online)
    trainer = Trainer(pair, TrainerConfig(batch_size=4))
    obs = np.array([[12.0, 3.0, 0.0], [18.0, 9.0, 1.0]])
    q = online.q_values_batch(obs)
    loss, grads = online.loss_and_gradients(obs, [0, 1], [q[0, 0], q[1, 1]])
    assert loss == 0.0
    before = online.param_groups()
    from qvcrl.nn import adam_step
    for name, values in before.items():
        assert np.array_equal(adam_step(trainer.optimizers[name], values, grads[name]), values)


def test_training_is_reproducible(rng):
    def run():
        init = np.random.default_rng(9)
        pair = TargetPair.from_online(QModel.pure(4, 2, ObsEncoder("directional"), init, output_scale=20.0))
        cfg = TrainerConfig(update_timing="per_step", batch_size=8)
        return train(CartPole(make_rng(5)), pair, cfg, EpsilonSchedule(), 6, make_rng(6))

    a, b = run(), run()
    assert [(r.episode, r.reward, r.epsilon) for r in a] == [(r.episode, r.reward, r.epsilon) for r in b]
    assert np.array_equal([r.loss for r in a], [r.loss for r in b])
    assert [r.episode for r in a] == list(range(1, 7))
    assert [r.epsilon for r in a[:3]] == [1.0, 0.9, 0.9 * 0.9]


def test_per_episode_records_one_update_loss(rng):
    pair = TargetPair.from_online(QModel.baseline([3, 6, 2], BJ, rng))
    recs = train(Blackjack(make_rng(0)), pair, TrainerConfig(), EpsilonSchedule(), 10, make_rng(1))
    assert all(math.isfinite(r.loss) for r in recs)
    assert all(r.reward in (-1.0, 0.0, 1.0) for r in recs)
