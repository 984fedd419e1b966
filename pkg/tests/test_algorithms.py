"""Learner tests: worked examples, brute-force oracles and finite-difference gradients."""
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import chain_q_star, learner_gradient_violation, max_violation, micro_batch, \
    micro_learner, numeric_grad, qcombo_hand_gradients
from oracles import linear_qcombo as oracle_linear_qcombo
from qcombo.agent_io import OBS_DIM
from qcombo.algorithms import (ALGORITHMS, COMA, Batch, Experience, LearnerConfig, ReplayBuffer,
                               epsilon_greedy, make_learner, qmix_backward, qmix_mix)
from qcombo.algorithms.base import run_net, take
from qcombo.algorithms.value import init_mixer
from qcombo.neural import softmax

JOINT = [(a1, a2) for a1 in (0, 1) for a2 in (0, 1)]


def learner(alg, rows=1, cols=2, seed=0, weights=None, **kw):
    n = rows * cols
    k = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    return make_learner(LearnerConfig(algorithm=alg, **kw), rows, cols, k, seed=seed)


def batch(obs, prev, acts, rew, grew, nobs, nacts=None):
    """Feed-forward (1, B, ...) batch from per-transition lists."""
    f = lambda a: np.asarray(a)[None]
    acts = np.asarray(acts)
    nacts = acts if nacts is None else nacts
    return Batch(f(obs).astype(float), f(prev).astype(np.int64), f(acts).astype(np.int64),
                 f(rew).astype(float), f(grew).astype(float), f(nobs).astype(float),
                 f(nacts).astype(np.int64), np.arange(len(obs))[None])


def state_obs(s, n):
    """Observation block that encodes a small discrete state in the first queue entry."""
    o = np.zeros((n, OBS_DIM))
    o[:, 0] = 10.0 * s
    return o


def set_params(pset, **values):
    for name, v in values.items():
        pset.online[name][...] = v
        pset.target[name][...] = v


# -- config and behaviour policy ------------------------------------------------

def test_config_defaults():
    cfg = LearnerConfig()
    assert (cfg.gamma, cfg.lam, cfg.lr_q, cfg.lr_actor, cfg.tau) == (0.99, 1.0, 0.001, 0.0001, 0.01)
    assert (cfg.eps0, cfg.eps_decay, cfg.minibatches, cfg.batch_size) == (0.9, 0.995, 100, 30)
    assert cfg.buffer_capacity == 1000 and not cfg.rnn


@pytest.mark.parametrize("kw", [dict(gamma=1.0), dict(gamma=-0.1), dict(lam=-1.0), dict(eps0=1.5),
                                dict(algorithm="dqn"), dict(identity="bits"), dict(tau=0.0)])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        LearnerConfig(**kw)


def test_epsilon_greedy_examples():
    rng = np.random.default_rng(0)
    assert epsilon_greedy(np.array([1.0, 2.0]), 0.0, rng) == 1
    assert epsilon_greedy(np.array([3.0, 3.0]), 0.0, rng) == 0


def test_epsilon_one_is_uniform():
    rng = np.random.default_rng(0)
    q = np.tile([0.0, 5.0], (10_000, 1))
    freq = epsilon_greedy(q, 1.0, rng).mean()
    assert abs(freq - 0.5) <= 0.02


@given(st.floats(0.0, 1.0), st.integers(0, 2**31))
@settings(max_examples=30)
def test_epsilon_greedy_rate(eps, seed):
    rng = np.random.default_rng(seed)
    a = epsilon_greedy(np.tile([1.0, 0.0], (4000, 1)), eps, rng)
    # greedy action 0; action 1 only from exploration, probability eps / 2
    assert abs(a.mean() - eps / 2) < 5 * np.sqrt(0.25 / 4000) + 1e-12


# -- replay -------------------------------------------------------------------

def exp(i, n=2):
    z = np.zeros((n, OBS_DIM))
    return Experience(z, np.zeros(n, int), np.zeros(n, int), np.zeros(n), 0.0, z, np.zeros(n, int), i)


def test_replay_evicts_oldest():
    buf = ReplayBuffer(1000)
    for i in range(1001):
        buf.push(exp(i))
    assert len(buf) == 1000
    assert buf[0].index == 1 and buf[999].index == 1000


def test_replay_sample_indices_valid():
    buf = ReplayBuffer(1000)
    for i in range(1000):
        buf.push(exp(i))
    b = buf.sample(30, np.random.default_rng(0))
    assert b.index.shape == (1, 30)
    assert np.all((b.index >= 0) & (b.index < 1000))


def test_replay_undersized_returns_none():
    buf = ReplayBuffer(1000)
    for i in range(29):
        buf.push(exp(i))
    rng = np.random.default_rng(0)
    assert buf.sample(30, rng) is None
    assert buf.sample_sequences(6, 30, rng) is None
    lrn = micro_learner("idqn", 0, batch_size=30, minibatches=2)
    assert lrn.train_step(buf, rng) is None


@given(st.integers(180, 1500), st.integers(0, 2**31))
@settings(max_examples=25)
def test_replay_sequences_consecutive(pushed, seed):
    buf = ReplayBuffer(1000)
    for i in range(pushed):
        buf.push(exp(i))
    runs = buf.sample_sequences(6, 30, np.random.default_rng(seed))
    assert len(runs) == 6
    idx = np.concatenate([r.index[:, 0] for r in runs])
    assert idx.shape == (180,)
    assert np.all(np.diff(idx) == 1)
    assert idx[0] >= max(0, pushed - 1000)


# -- IDQN -----------------------------------------------------------------------

def test_idqn_fixed_point_gives_zero_loss():
    lrn = micro_learner("idqn", 1, gamma=0.0)
    b = micro_batch(2, 1, B=5)
    q = lrn.utilities(b)[0]
    b.rewards = take(q, b.actions)
    losses, grads, *_ = lrn.compute(b)
    assert losses["L_theta"] == 0.0
    assert all(np.all(g == 0) for g in grads["q"].values())


def test_idqn_unit_reward_zero_q():
    lrn = micro_learner("idqn", 2, gamma=0.0)
    set_params(lrn.psets["q"], W2=0.0, b2=0.0)
    b = micro_batch(2, 2, B=5)
    b.rewards[...] = 1.0
    losses, grads, *_ = lrn.compute(b)
    assert losses["L_theta"] == pytest.approx(0.5)

    def mean_q():
        q = lrn.utilities(b)[0]
        return float(take(q, b.actions).mean())

    dq = numeric_grad(mean_q, lrn.psets["q"].online)
    assert max_violation(grads["q"], {k: -v for k, v in dq.items()}) <= 1.0


def test_idqn_tabular_chain_converges():
    rewards, gamma = [[0.0, 1.0], [2.0, 0.0]], 0.5
    q_star = chain_q_star(rewards, gamma)
    lrn = learner("idqn", 1, 1, gamma=gamma, hidden=(16, 16), lr_q=0.01, tau=0.1)
    rows = list(itertools.product((0, 1), (0, 1), (0, 1)))  # state, previous action, action
    b = batch([state_obs(s, 1) for s, _, _ in rows], [[p] for _, p, _ in rows],
              [[a] for _, _, a in rows], [[rewards[s][a]] for s, _, a in rows],
              [rewards[s][a] for s, _, a in rows],
              [state_obs(s if a == 0 else 1 - s, 1) for s, _, a in rows])
    for _ in range(1000):
        lrn.update(b)
    for s, p in itertools.product((0, 1), (0, 1)):
        q = lrn.policy_outputs(state_obs(s, 1), np.array([p]))[0][0]
        np.testing.assert_allclose(q, q_star[s], atol=1e-3)


# -- IAC ------------------------------------------------------------------------

def test_iac_zero_advantage_zero_actor_gradient():
    lrn = micro_learner("iac", 3)
    b = micro_batch(2, 3, B=4)
    _, grads, *_ = lrn.compute(b, frozen={"advantage": np.zeros(b.rewards.shape)})
    assert all(np.all(g == 0) for g in grads["actor"].values())


@pytest.mark.parametrize("seed", range(3))
def test_iac_bandit_finds_best_arm(seed):
    lrn = learner("iac", 1, 1, seed=seed, gamma=0.0, lr_actor=0.05, lr_q=0.01, hidden=(8,),
                  actor_hidden=(8,))
    rng = np.random.default_rng(seed)
    o = state_obs(0, 1)
    for _ in range(200):
        p = softmax(lrn.policy_outputs(o, np.zeros(1))[0])[0]
        a = rng.choice(2, size=30, p=p)
        r = (a == 1).astype(float)
        lrn.update(batch([o] * 30, np.zeros((30, 1)), a[:, None], r[:, None], r, [o] * 30))
    assert softmax(lrn.policy_outputs(o, np.zeros(1))[0])[0, 1] > 0.99


def test_iac_critic_learns_constant_reward():
    lrn = learner("iac", 1, 1, gamma=0.0, lr_q=0.01, hidden=(8,))
    o = np.random.default_rng(0).uniform(0, 5, (30, 1, OBS_DIM))
    b = batch(o, np.zeros((30, 1)), np.zeros((30, 1)), np.full((30, 1), 2.0), np.full(30, 2.0), o)
    for _ in range(3000):
        lrn.update(b)
    v = run_net(lrn.nets["critic"], lrn.psets["critic"].online, lrn.enc.local(b.obs, b.prev_actions))[0]
    np.testing.assert_allclose(v, 2.0, atol=1e-2)


# -- VDN ------------------------------------------------------------------------

def test_vdn_single_agent_is_idqn():
    vdn = learner("vdn", 1, 1, seed=4, hidden=(4, 3))
    idqn = learner("idqn", 1, 1, seed=4, hidden=(4, 3))
    b = micro_batch(1, 4, B=6)
    b.global_reward = b.rewards[..., 0].copy()
    lv, gv, *_ = vdn.compute(b)
    li, gi, *_ = idqn.compute(b)
    assert lv["L_vdn"] == pytest.approx(li["L_theta"], rel=1e-12)
    for k in gi["q"]:
        np.testing.assert_allclose(gv["q"][k], gi["q"][k], rtol=1e-12, atol=1e-15)


def test_vdn_sum_of_maxima():
    lrn = learner("vdn", 1, 2, gamma=0.5, hidden=())
    w = np.zeros_like(lrn.psets["q"].online["W0"])
    w[-1] = (2.0, -2.0)  # last input is the column coordinate: 0 for the left agent, 1 for the right
    set_params(lrn.psets["q"], W0=w, b0=(1.0, 2.0))
    o = state_obs(0, 2)
    q = lrn.policy_outputs(o, np.zeros(2))[0]
    np.testing.assert_allclose(q, [[1.0, 2.0], [3.0, 0.0]])
    greedy = q.max(axis=1).sum()
    assert greedy == 5.0 == max(q[0, a1] + q[1, a2] for a1, a2 in JOINT)
    # chosen joint action (1, 0) also sums to 5; zero reward leaves y = gamma * 5
    # successor inputs carry (1, 0) as previous actions, which have zero weight here
    b = batch([o], [[0, 0]], [[1, 0]], [[0.0, 0.0]], [0.0], [o])
    assert lrn.compute(b)[0]["L_vdn"] == pytest.approx(0.5 * (0.5 * 5 - 5) ** 2)


@given(st.integers(0, 2**31), st.sampled_from([(1, 1), (1, 2), (1, 3), (2, 2)]))
@settings(max_examples=25)
def test_vdn_greedy_matches_joint_argmax(seed, shape):
    lrn = learner("vdn", *shape, seed=seed % 1000, hidden=(4,))
    n = shape[0] * shape[1]
    rng = np.random.default_rng(seed)
    q = lrn.policy_outputs(rng.uniform(0, 5, (n, OBS_DIM)), rng.integers(0, 2, n))[0]
    brute = max(sum(q[i, a[i]] for i in range(n)) for a in itertools.product((0, 1), repeat=n))
    greedy = np.argmax(q, axis=1)
    assert q[np.arange(n), greedy].sum() == pytest.approx(brute, abs=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_vdn_learns_additive_game(seed):
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, (2, 2))
    lrn = learner("vdn", 1, 2, seed=seed, gamma=0.0, lr_q=0.01, hidden=(16,))
    o = state_obs(0, 2)
    payoff = np.array([u[0, a1] + u[1, a2] for a1, a2 in JOINT])
    b = batch([o] * 4, np.zeros((4, 2)), JOINT, np.zeros((4, 2)), payoff, [o] * 4)
    for _ in range(300):
        lrn.update(b)
    greedy = tuple(np.argmax(lrn.policy_outputs(o, np.zeros(2))[0], axis=1))
    assert greedy == JOINT[int(np.argmax(payoff))]


# -- QMIX -----------------------------------------------------------------------

def random_mixer(rng, n=2, width=8, state_dim=6):
    p = init_mixer(state_dim, n, width, rng)
    for k in p:
        p[k] = rng.normal(size=p[k].shape)
    return p


def test_qmix_monotone_random_draws():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        p = random_mixer(rng, n=n)
        s = rng.normal(size=(1, 6))
        q = rng.normal(size=(1, n)) * 3
        base, cache = qmix_mix(p, s, q)
        _, dq = qmix_backward(p, cache, np.ones(1))
        assert np.all(dq >= 0)
        i = int(rng.integers(n))
        up = q.copy()
        up[0, i] += rng.uniform(0, 2)
        assert qmix_mix(p, s, up)[0][0] >= base[0] - 1e-12


def test_qmix_zero_hyper_weights_gives_state_bias():
    rng = np.random.default_rng(1)
    p = random_mixer(rng)
    for k in ("Hw1", "hw1", "Hw2", "hw2"):
        p[k][...] = 0.0
    s = rng.normal(size=(5, 6))
    expect = (s @ p["Hv"] + p["hv"])[:, 0]
    for _ in range(3):
        np.testing.assert_allclose(qmix_mix(p, s, rng.normal(size=(5, 2)) * 10)[0], expect, rtol=1e-13)


def test_qmix_argmax_consistency():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        p = random_mixer(rng)
        s = rng.normal(size=(1, 6))
        q = rng.normal(size=(2, 2))
        joint = np.array([[q[0, a1], q[1, a2]] for a1, a2 in JOINT])
        tot = qmix_mix(p, np.repeat(s, 4, axis=0), joint)[0]
        assert JOINT[int(np.argmax(tot))] == tuple(np.argmax(q, axis=1))


# -- COMA -----------------------------------------------------------------------

def test_coma_uniform_policy_baseline_is_mean():
    q = np.random.default_rng(0).normal(size=(3, 4, 2, 2))
    np.testing.assert_allclose(COMA.baseline(q, np.full_like(q, 0.5)), q.mean(axis=-1), rtol=1e-15)


def test_coma_deterministic_policy_zero_advantage():
    rng = np.random.default_rng(1)
    q = rng.normal(size=(1, 4, 2, 2))
    acts = rng.integers(0, 2, size=(1, 4, 2))
    adv = take(q, acts) - COMA.baseline(q, np.eye(2)[acts])
    assert np.all(adv == 0)
    lrn = micro_learner("coma", 1)
    b = micro_batch(2, 1, B=4)
    _, grads, *_ = lrn.compute(b, frozen={"advantage": adv})
    assert all(np.all(g == 0) for g in grads["actor"].values())


@pytest.mark.parametrize("seed", range(5))
def test_coma_baseline_zero_expectation(seed):
    lrn = micro_learner("coma", seed, rows=2, cols=2)
    b = micro_batch(4, seed, B=6)
    q = run_net(lrn.nets["critic"], lrn.psets["critic"].online, lrn.critic_input(b.obs, b.actions))[0]
    probs = softmax(lrn.actor_pass(b)[0])
    base = COMA.baseline(q, probs)
    expectation = (probs * (q - base[..., None])).sum(axis=-1)
    assert np.abs(expectation).max() <= 1e-9


# -- QCOMBO ---------------------------------------------------------------------

def linear_qcombo(lam=1.0, gamma=0.9, seed=0, weights=(0.3, 0.7), **kw):
    return learner("qcombo", 1, 2, seed=seed, weights=weights, lam=lam, gamma=gamma, hidden=(), **kw)


def test_consistency_loss_scalar_example():
    lrn = linear_qcombo()
    set_params(lrn.psets["q"], W0=0.0, b0=(1.0, 1.0))
    set_params(lrn.psets["g"], W0=0.0, b0=3.0)
    b = micro_batch(2, 0, B=4)
    assert lrn.compute(b)[0]["L_reg"] == pytest.approx(2.0, abs=1e-14)
    set_params(lrn.psets["g"], b0=1.0)
    assert lrn.compute(b)[0]["L_reg"] == pytest.approx(0.0, abs=1e-14)


def test_global_loss_fixed_point():
    lrn = micro_learner("qcombo", 5, gamma=0.0)
    b = micro_batch(2, 5, B=4)
    b.global_reward = lrn.global_value(lrn.psets["g"].online, b.obs, b.actions)[0]
    assert lrn.compute(b)[0]["L_w"] == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_qcombo_gradients_match_hand_expansion(seed):
    rng = np.random.default_rng(seed)
    lrn = oracle_linear_qcombo(seed, lam=rng.uniform(0, 5), gamma=rng.uniform(0, 0.99))
    b = micro_batch(2, seed, B=1)
    grads = lrn.compute(b)[1]
    hand = qcombo_hand_gradients(lrn, b)
    for net in ("q", "g"):
        for k in hand[net]:
            np.testing.assert_allclose(grads[net][k], hand[net][k], rtol=0, atol=1e-10)


@pytest.mark.parametrize("rnn", [False, True])
def test_qcombo_lambda_zero_matches_idqn_bitwise(rnn):
    qc = micro_learner("qcombo", 6, lam=0.0, rnn=rnn)
    iq = micro_learner("idqn", 6, rnn=rnn)
    iq.load_tensors(qc.state_tensors(), only=("q",))
    b = micro_batch(2, 6, T=4 if rnn else 1, B=3)
    gq = qc.compute(b)[1]["q"]
    gi = iq.compute(b)[1]["q"]
    for k in gi:
        assert np.array_equal(gq[k], gi[k])
    qc.update(b)
    iq.update(b)
    assert np.array_equal(qc.psets["q"].flat_online, iq.psets["q"].flat_online)


def test_large_lambda_reaches_consistency_floor():
    rng = np.random.default_rng(0)
    B = 8
    obs, nobs = rng.uniform(0, 5, (B, 2, OBS_DIM)), rng.uniform(0, 5, (B, 2, OBS_DIM))
    acts = rng.integers(0, 2, (B, 2))
    rew = rng.normal(size=(B, 2))
    b = batch(obs, rng.integers(0, 2, (B, 2)), acts, rew, rew.mean(axis=1), nobs)
    reg = {}
    for lam in (1.0, 100.0):
        lrn = linear_qcombo(lam=lam, gamma=0.5, lr_q=0.01)
        for _ in range(2000):
            out = lrn.update(b)
        reg[lam] = out["losses"]["L_reg"]
        # least-squares floor: best linear G for the current weighted utilities
        xg = np.hstack([lrn.global_input(b.obs, b.actions)[0], np.ones((B, 1))])
        target = take(lrn.utilities(b)[0], b.actions)[0] @ lrn.k
        resid = target - xg @ np.linalg.lstsq(xg, target, rcond=None)[0]
        floor = 0.5 * np.mean(resid ** 2)
    assert reg[100.0] < reg[1.0]
    assert reg[100.0] <= floor + 1e-4


def test_global_value_geometric_series():
    c, gamma = 0.01, 0.99
    lrn = linear_qcombo(lam=0.0, gamma=gamma, lr_q=0.01, tau=1.0)
    lrn.lrs["q"] = 0.0  # fixed local utilities, hence a fixed greedy policy
    o = state_obs(0, 2)
    # choose an action that is its own greedy successor so the policy is stationary
    a = next(np.array(j) for j in JOINT
             if tuple(np.argmax(lrn.policy_outputs(o, np.array(j))[0], axis=1)) == j)
    b = batch([o], [a], [a], [[c, c]], [c], [o])
    for _ in range(3000):
        lrn.update(b)
    g = lrn.global_value(lrn.psets["g"].online, b.obs, b.actions)[0]
    np.testing.assert_allclose(g, c / (1 - gamma), rtol=1e-3)


def test_global_value_policy_evaluation():
    """2-agent 2-state game; local utilities frozen, G must equal Q^pi of their greedy policy."""
    gamma = 0.5
    rng = np.random.default_rng(1)
    payoff = rng.uniform(-1, 1, (2, 4))
    step = lambda s, a: (s + a[0] + a[1]) % 2
    lrn = learner("qcombo", 1, 2, seed=3, gamma=gamma, lam=0.0, lr_q=0.003, tau=0.1, hidden=(32, 32))
    lrn.lrs["q"] = 0.0
    rows = [(s, j, a) for s in (0, 1) for j, a in enumerate(JOINT)]
    b = batch([state_obs(s, 2) for s, _, _ in rows], np.zeros((8, 2)), [a for *_, a in rows],
              np.zeros((8, 2)), [payoff[s, j] for s, j, _ in rows],
              [state_obs(step(s, a), 2) for s, _, a in rows])

    m, rhs = np.eye(8), payoff.reshape(-1)
    for s, j, a in rows:
        s2 = step(s, a)
        a2 = tuple(np.argmax(lrn.policy_outputs(state_obs(s2, 2), np.array(a))[0], axis=1))
        m[s * 4 + j, s2 * 4 + JOINT.index(a2)] -= gamma
    q_pi = np.linalg.solve(m, rhs)
    for _ in range(6000):
        lrn.update(b)
    g = lrn.global_value(lrn.psets["g"].online, b.obs, b.actions)[0][0]
    np.testing.assert_allclose(g, q_pi, atol=1e-3)


def test_nonfinite_loss_aborts_step():
    lrn = micro_learner("qcombo", 0)
    b = micro_batch(2, 0)
    b.rewards[0, 0, 0] = np.inf
    before = lrn.psets["q"].flat_online.copy()
    with pytest.raises(FloatingPointError), np.errstate(invalid="ignore"):
        lrn.update(b)
    assert np.array_equal(before, lrn.psets["q"].flat_online)


# -- gradients and training loop ------------------------------------------------

@pytest.mark.parametrize("alg", ALGORITHMS)
def test_gradients_feedforward(alg):
    for seed in range(3):
        lrn = micro_learner(alg, seed)
        assert learner_gradient_violation(lrn, micro_batch(2, seed)) <= 1.0


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_gradients_recurrent(alg):
    lrn = micro_learner(alg, 11, rnn=True)
    b = micro_batch(2, 11, T=3, B=2)
    h0 = {name: np.random.default_rng(1).normal(size=(2 * 2, 3)) * 0.5
          for name in ("q", "actor") if name in lrn.psets and lrn.nets[name].recurrent}
    assert learner_gradient_violation(lrn, b, h0) <= 1.0


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_train_step_runs_and_is_deterministic(alg):
    def run():
        lrn = micro_learner(alg, 0, minibatches=3, batch_size=5)
        buf = ReplayBuffer(1000)
        rng = np.random.default_rng(0)
        for i in range(40):
            b = micro_batch(2, i)
            buf.push(Experience(b.obs[0, 0], b.prev_actions[0, 0], b.actions[0, 0], b.rewards[0, 0],
                                float(b.global_reward[0, 0]), b.next_obs[0, 0], b.next_actions[0, 0], i))
        out = lrn.train_step(buf, rng)
        return out, lrn.snapshot()

    (l1, s1), (l2, s2) = run(), run()
    assert l1 == l2 and all(np.isfinite(v) for v in l1.values())
    assert all(np.array_equal(s1[k], s2[k]) for k in s1)


def test_recurrent_train_step_carries_hidden_state():
    lrn = micro_learner("qcombo", 0, rnn=True, rnn_periods=2, rnn_period_len=5)
    buf = ReplayBuffer(1000)
    for i in range(12):
        b = micro_batch(2, i)
        buf.push(Experience(b.obs[0, 0], b.prev_actions[0, 0], b.actions[0, 0], b.rewards[0, 0],
                            float(b.global_reward[0, 0]), b.next_obs[0, 0], b.next_actions[0, 0], i))
    assert not lrn._train_h
    assert lrn.train_step(buf, np.random.default_rng(0)) is not None
    assert lrn._train_h["q"].shape == (2, 3)
    assert np.any(lrn._train_h["q"] != 0)


def test_parameter_sharing_single_network():
    lrn = learner("qcombo", 2, 2, hidden=(4,))
    assert set(lrn.psets) == {"q", "g"}
    obs = np.tile(state_obs(1, 1), (4, 1))
    q = lrn.policy_outputs(obs, np.zeros(4, int))[0]
    assert q.shape == (4, 2)
    # identical observations, distinct identity codes, so outputs differ across agents
    assert not np.allclose(q[0], q[3])
