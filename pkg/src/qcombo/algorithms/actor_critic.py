"""Policy-gradient baselines: independent actor-critic and COMA."""
from __future__ import annotations

import numpy as np

from ..neural import log_softmax, softmax
from .base import N_ACTIONS, Learner, back_net, make_net, next_values, one_hot, run_net, take


class _ActorCritic(Learner):
    actor_critic = True
    policy_net = "actor"

    def _add_actor(self):
        cfg = self.cfg
        self._add("actor", make_net(self.enc.local_dim, N_ACTIONS, cfg.actor_hidden, cfg.rnn,
                                    cfg.rnn_hidden), cfg.lr_actor)

    def actor_pass(self, batch, h0=None):
        net = self.nets["actor"]
        x = self.enc.local(batch.obs, batch.prev_actions)
        logits, h_out, cache = run_net(net, self.psets["actor"].online, x, (h0 or {}).get("actor"))
        return logits, cache, ({"actor": h_out} if net.recurrent else {})

    def actor_surrogate(self, logits, actions, advantage):
        """-mean_(t,b) sum_n log pi(a^n | o^n) * A^n with A held constant; returns (value, dlogits)."""
        logp = log_softmax(logits)
        m = actions.shape[0] * actions.shape[1]
        value = float(-(take(logp, actions) * advantage).sum(axis=-1).mean())
        dlogits = -(advantage[..., None] * (one_hot(actions) - softmax(logits))) / m
        return value, dlogits


class IAC(_ActorCritic):
    """Independent actor-critic; a local state-value critic supplies the TD-error advantage."""

    name = "iac"

    def __init__(self, cfg, rows, cols, weights, seed=0):
        super().__init__(cfg, rows, cols, weights, seed)
        self._add("critic", make_net(self.enc.local_dim, 1, cfg.hidden, False), cfg.lr_q)
        self._add_actor()

    def compute(self, batch, h0=None, frozen=None):
        cfg = self.cfg
        net = self.nets["critic"]
        ps = self.psets["critic"]
        x = self.enc.local(batch.obs, batch.prev_actions)
        x_next = self.enc.local(batch.next_obs, batch.actions)
        v, _, cache = run_net(net, ps.online, x)
        v_next = next_values(net, ps.target, x, x_next)
        v, v_next = v[..., 0], v_next[..., 0]
        y = batch.rewards * cfg.reward_scale + cfg.gamma * v_next
        delta = y - v
        n = self.n_agents
        m = v.shape[0] * v.shape[1]
        loss_v = float(np.mean(0.5 * (delta ** 2).sum(axis=-1) / n))
        g_critic = back_net(net, ps.online, cache, (-delta / (n * m))[..., None])

        frozen = frozen or {"advantage": delta.copy()}
        logits, a_cache, h_out = self.actor_pass(batch, h0)
        surrogate, dlogits = self.actor_surrogate(logits, batch.actions, frozen["advantage"])
        g_actor = back_net(self.nets["actor"], self.psets["actor"].online, a_cache, dlogits)
        losses = {"L_critic": loss_v, "L_actor": surrogate}
        return (losses, {"critic": g_critic, "actor": g_actor},
                {"critic": loss_v, "actor": surrogate}, frozen, h_out)


class COMA(_ActorCritic):
    """Centralised critic Q(s, a^-n, n, o^n) with the counterfactual baseline."""

    name = "coma"

    def __init__(self, cfg, rows, cols, weights, seed=0):
        super().__init__(cfg, rows, cols, weights, seed)
        in_dim = self.enc.state_dim + N_ACTIONS * self.n_agents + self.enc.ids.shape[1] + 19
        self._add("critic", make_net(in_dim, N_ACTIONS, cfg.hidden, False), cfg.lr_q)
        self._add_actor()

    def critic_input(self, obs, actions):
        """(T, B, N, in): global state, others' actions (own slot zeroed), identity, own obs."""
        T, B, N, _ = obs.shape
        s = np.broadcast_to(self.enc.state(obs)[:, :, None, :], (T, B, N, self.enc.state_dim))
        a = one_hot(actions)  # (T, B, N, A)
        others = np.broadcast_to(a[:, :, None, :, :], (T, B, N, N, N_ACTIONS)).copy()
        others[:, :, np.arange(N), np.arange(N), :] = 0.0
        others = others.reshape(T, B, N, N * N_ACTIONS)
        ids = np.broadcast_to(self.enc.ids, (T, B, N, self.enc.ids.shape[1]))
        local = self.enc.local(obs, actions)[..., :19]
        return np.concatenate([s, others, ids, local], axis=-1)

    @staticmethod
    def baseline(q: np.ndarray, probs: np.ndarray) -> np.ndarray:
        """Counterfactual baseline b = sum_a pi(a | o^n) Q(s, (a^-n, a))."""
        return (probs * q).sum(axis=-1)

    def compute(self, batch, h0=None, frozen=None):
        cfg = self.cfg
        net = self.nets["critic"]
        ps = self.psets["critic"]
        q, _, cache = run_net(net, ps.online, self.critic_input(batch.obs, batch.actions))
        q_next, _, _ = run_net(net, ps.target, self.critic_input(batch.next_obs, batch.next_actions))
        y = (batch.global_reward * cfg.reward_scale)[..., None] + cfg.gamma * take(q_next, batch.next_actions)
        q_sel = take(q, batch.actions)
        td = y - q_sel
        n = self.n_agents
        m = q.shape[0] * q.shape[1]
        loss_q = float(np.mean(0.5 * (td ** 2).sum(axis=-1) / n))
        g_critic = back_net(net, ps.online, cache, (one_hot(batch.actions) * (-td / (n * m))[..., None]))

        logits, a_cache, h_out = self.actor_pass(batch, h0)
        if frozen is None:
            probs = softmax(logits)
            frozen = {"advantage": q_sel - self.baseline(q, probs)}
        surrogate, dlogits = self.actor_surrogate(logits, batch.actions, frozen["advantage"])
        g_actor = back_net(self.nets["actor"], self.psets["actor"].online, a_cache, dlogits)
        losses = {"L_critic": loss_q, "L_actor": surrogate}
        return (losses, {"critic": g_critic, "actor": g_actor},
                {"critic": loss_q, "actor": surrogate}, frozen, h_out)
