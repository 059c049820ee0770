"""Acceptance suite.  Each criterion prints one PASS/FAIL line in the summary.

Baselines run 1000 seeded episodes on the full 25x25 configuration.  The
training criterion trains an MLP for 2000 episodes (about 15 minutes on one
core); the resulting checkpoint is reused by the ordering criterion.
"""

import json
import math

import numpy as np
import pytest
from oracles import fd_check, joint_gain_oracle, small_net

from activemap.belief import (
    LN2,
    BeliefGrid,
    Observation,
    apply_observation,
    cell_entropy,
    center_grid,
    centered_belief,
)
from activemap.env import MOORE, EnvConfig, GridMap, sense
from activemap.harness import (
    EvalConfig,
    PolicyConfig,
    RunConfig,
    build_policy,
    evaluate,
    run_episode,
    run_episodes,
)
from activemap.neural import ActorCriticParams, OptimizerState, adam_step, save_params
from activemap.policies import expected_gain
from activemap.trainer import RolloutBuffer, TrainConfig, compute_returns, train

ENV = EnvConfig()  # 25x25, density 0.1, accuracy 0.8, horizon 300
EPISODES = 1000
SEED = 0


def run(policy: PolicyConfig, episodes=EPISODES, seed=SEED):
    return evaluate(RunConfig(env=ENV, policy=policy,
                              evaluation=EvalConfig(episodes=episodes, seed=seed)))


@pytest.fixture(scope="module")
def random_report():
    return run(PolicyConfig("random"))


@pytest.fixture(scope="module")
def myopic_report():
    return run(PolicyConfig("myopic"))


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    params, curve = train(TrainConfig(episodes=2000, seed=0), ENV)
    path = tmp_path_factory.mktemp("mlp") / "weights.bin"
    save_params(params, path)
    return str(path), curve


def _summary(rep):
    return f"{rep.mean:.2f} +/- {rep.std:.2f} over {rep.episodes} episodes"


@pytest.mark.criterion("random baseline mean in [85, 100]")
def test_random_baseline(random_report, record_property):
    record_property("detail", _summary(random_report))
    assert 85.0 <= random_report.mean <= 100.0


@pytest.mark.criterion("myopic baseline mean in [240, 262]")
def test_myopic_baseline(myopic_report, record_property):
    record_property("detail", _summary(myopic_report))
    assert 240.0 <= myopic_report.mean <= 262.0


@pytest.mark.criterion("policy ordering")
def test_myopic_far_above_random(random_report, myopic_report, record_property):
    diff = np.asarray(myopic_report.rewards) - np.asarray(random_report.rewards)
    se = diff.std(ddof=1) / math.sqrt(diff.size)
    record_property("detail", f"myopic - random paired difference {diff.mean():.2f} "
                              f"(s.e. {se:.2f}) > 100")
    assert diff.mean() > 100.0


@pytest.mark.slow
@pytest.mark.criterion("MLP training reaches trailing-100 mean >= 150 in 2000 episodes")
def test_mlp_training(trained, record_property):
    _, curve = trained
    mean = curve.trailing_mean(100)
    record_property("detail", f"trailing-100 mean {mean:.2f} after {len(curve.rewards)} "
                              f"episodes ({curve.wall_time[-1]:.0f} s)")
    assert len(curve.rewards) == 2000
    assert mean >= 150.0


@pytest.mark.slow
@pytest.mark.criterion("policy ordering")
def test_mlp_beats_random(trained, random_report, record_property):
    path, _ = trained
    learned = run(PolicyConfig("learned", weights=path))
    ratio = learned.mean / random_report.mean
    record_property("detail", f"MLP {learned.mean:.2f} / random {random_report.mean:.2f} "
                              f"= {ratio:.2f}x >= 1.5x")
    assert ratio >= 1.5


# -- property suite -----------------------------------------------------------

PROPERTY = "property suite"


@pytest.mark.criterion(PROPERTY)
def test_telescoping_reward(record_property):
    worst = 0.0
    policy = build_policy(ENV, PolicyConfig("random"))
    for ep in range(100):
        last = {}

        def rec(record, state, last=last):
            last["state"] = state

        total = run_episode(ENV, policy, 12345, ep, rec)
        s = last["state"]
        worst = max(worst, abs(total - (s.initial_entropy - s.entropy)))
    record_property("detail", f"telescoping max error {worst:.1e} over 100 episodes")
    assert worst < 1e-9


@pytest.mark.criterion(PROPERTY)
def test_logodds_commutativity(record_property):
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 500:
        k = int(rng.integers(1, 40))
        triples = [(int(r), int(c), int(z)) for r, c, z in
                   zip(rng.integers(0, 4, k), rng.integers(0, 4, k), rng.integers(0, 2, k))]
        counts = np.zeros((4, 4), int)
        for r, c, _ in triples:
            counts[r, c] += 1
        if counts.max() > 14:  # 15 same-sign readings of ln 4 would reach the clamp
            continue
        a, b = BeliefGrid.uniform(4), BeliefGrid.uniform(4)
        for t in triples:
            apply_observation(a, Observation.from_triples([t]), 0.8)
        perm = rng.permutation(k)
        apply_observation(b, Observation.from_triples([triples[i] for i in perm]), 0.8)
        assert np.array_equal(a.logodds, b.logodds)
        checked += 1
    record_property("detail", "log-odds order-independent (500 sequences, exact)")


@pytest.mark.criterion(PROPERTY)
def test_factorized_gain(record_property):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        prob = rng.uniform(0.0, 1.0, size=(5, 5))
        belief = BeliefGrid.from_prob(prob)
        pose = tuple(int(x) for x in rng.integers(0, 5, 2))
        fast = expected_gain(belief, pose, 0.8, MOORE)
        worst = max(worst, abs(fast - joint_gain_oracle(belief.prob(), pose, 0.8)))
    record_property("detail", f"expected gain vs joint enumeration {worst:.1e}")
    assert worst < 1e-9


@pytest.mark.criterion(PROPERTY)
def test_gradients(record_property):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        p = small_net(seed, in_dim=int(rng.integers(3, 9)), hidden=int(rng.integers(3, 8)))
        batch = int(rng.integers(1, 6))
        xs = [rng.uniform(-1, 1, p.in_dim) for _ in range(batch)]
        actions = [int(rng.integers(4)) for _ in range(batch)]
        returns = [float(rng.normal(scale=3)) for _ in range(batch)]
        worst = max(worst, fd_check(p, xs, actions, returns))
    record_property("detail", f"gradient max relative error {worst:.1e} over 20 nets")
    assert worst < 1e-4


@pytest.mark.criterion(PROPERTY)
def test_adam_and_returns_by_hand(record_property):
    p = ActorCriticParams(np.zeros(6), in_dim=1, hidden=1, n_actions=1)
    p.flat[0] = 1.0
    opt = OptimizerState.for_params(p, lr=0.1)
    g = np.zeros(6)
    g[0] = 0.5
    adam_step(opt, p, g)
    # m=0.05, v=0.00025, m_hat=0.5, v_hat=0.25: 1 - 0.1 * 0.5 / (0.5 + 1e-8)
    assert abs(p.flat[0] - 0.900000002) < 1e-9
    g[0] = -0.2
    adam_step(opt, p, g)
    # m=0.025, v=0.00028975, m_hat=0.025/0.19, v_hat=0.00028975/0.001999
    expected = 0.900000002 - 0.1 * (0.025 / 0.19) / (math.sqrt(0.00028975 / 0.001999) + 1e-8)
    assert abs(p.flat[0] - expected) < 1e-9

    b = RolloutBuffer()
    for r in (1.0, 1.0):
        b.add(None, 0, r)
    b.bootstrap = 1.0
    ret = compute_returns(b, 0.99)
    assert abs(ret[0] - 2.9701) < 1e-9 and abs(ret[1] - 1.99) < 1e-9
    record_property("detail", "Adam and n-step return hand traces match")


@pytest.mark.criterion(PROPERTY)
def test_sensor_error_rate(record_property):
    grid = GridMap(np.zeros((3, 3), bool))
    rng = np.random.default_rng(6)
    wrong = sum(int(sense(grid, (0, 0), 0.8, rng, offsets=[(0, 1)]).readings[0])
                for _ in range(10_000))
    record_property("detail", f"sensor error rate {wrong / 10_000:.4f}")
    assert abs(wrong / 10_000 - 0.2) <= 0.02


@pytest.mark.criterion(PROPERTY)
def test_end_to_end_determinism(record_property):
    for name in ("random", "frontier", "myopic"):
        a = run(PolicyConfig(name), episodes=20, seed=99).to_dict()
        b = run(PolicyConfig(name), episodes=20, seed=99).to_dict()
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    small = EnvConfig(side=7, horizon=40)
    (pa, ca), (pb, cb) = (train(TrainConfig(episodes=3, seed=4), small) for _ in range(2))
    assert ca.rewards == cb.rewards and np.array_equal(pa.flat, pb.flat)
    record_property("detail", "repeated seeded reports and training runs bit-identical")


@pytest.mark.criterion(PROPERTY)
def test_parallel_equals_serial(record_property):
    serial = run_episodes(ENV, PolicyConfig("myopic"), 5, 24, workers=1)
    parallel = run_episodes(ENV, PolicyConfig("myopic"), 5, 24, workers=4)
    record_property("detail", "parallel evaluation identical to serial")
    assert serial == parallel


# -- worked centering example -----------------------------------------------------

@pytest.mark.criterion("worked 3x3 centering example reproduced exactly")
def test_worked_centering_example(record_property):
    prob = np.full((3, 3), 0.5)
    prob[0, 0] = 0.0
    expected_c = np.array([
        [1, 1, 1, 1, 1],
        [1, 1, 1, 1, 1],
        [1, 1, 0, .5, .5],
        [1, 1, .5, .5, .5],
        [1, 1, .5, .5, .5],
    ])
    expected_h = np.where(expected_c == 0.5, 0.69, 0.0)
    c = center_grid(prob, (0, 0), fill=1.0)
    h = cell_entropy(c)
    assert np.array_equal(c, expected_c)
    assert np.array_equal(np.round(h, 2), expected_h)
    assert np.array_equal(h[expected_c == 0.5], np.full(8, LN2))
    cb, hb = centered_belief(BeliefGrid.from_prob(prob), (0, 0))
    np.testing.assert_allclose(cb, expected_c, atol=1e-8)
    np.testing.assert_allclose(hb, h, atol=1e-7)
    record_property("detail", "5x5 centered belief and entropy matrices match")
