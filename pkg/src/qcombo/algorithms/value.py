"""Value-based baselines sharing one utility network across agents: IDQN, VDN, QMIX."""
from __future__ import annotations

import numpy as np

from .base import Learner, back_net, make_net, next_values, run_net, scatter, take


class UtilityLearner(Learner):
    """Owns the parameter-shared per-agent utility network ``q``."""

    def __init__(self, cfg, rows, cols, weights, seed=0):
        super().__init__(cfg, rows, cols, weights, seed)
        self._add("q", make_net(self.enc.local_dim, 2, cfg.hidden, cfg.rnn, cfg.rnn_hidden), cfg.lr_q)

    def utilities(self, batch, h0=None):
        """Online Q at (o, a_prev) plus target max/argmax at the successor inputs."""
        net = self.nets["q"]
        ps = self.psets["q"]
        h = (h0 or {}).get("q")
        x = self.enc.local(batch.obs, batch.prev_actions)
        x_next = self.enc.local(batch.next_obs, batch.actions)
        q, h_out, cache = run_net(net, ps.online, x, h)
        q_next = next_values(net, ps.target, x, x_next, h)
        return q, q_next, cache, {"q": h_out} if net.recurrent else {}

    def individual_td(self, batch, q, q_next):
        """Per-agent TD error scaled by 1/N, plus the individual loss."""
        cfg = self.cfg
        y = batch.rewards * cfg.reward_scale + cfg.gamma * q_next.max(axis=-1)
        q_sel = take(q, batch.actions)
        z1 = (y - q_sel) / self.n_agents
        loss = float(np.mean(0.5 * ((y - q_sel) ** 2).sum(axis=-1) / self.n_agents))
        return z1, q_sel, loss


class IDQN(UtilityLearner):
    name = "idqn"

    def compute(self, batch, h0=None, frozen=None):
        q, q_next, cache, h_out = self.utilities(batch, h0)
        z1, _, loss = self.individual_td(batch, q, q_next)
        m = batch.obs.shape[0] * batch.obs.shape[1]
        dq = scatter(-z1 / m, batch.actions)
        grads = {"q": back_net(self.nets["q"], self.psets["q"].online, cache, dq)}
        return {"L_theta": loss}, grads, {"q": loss}, frozen or {}, h_out


class VDN(UtilityLearner):
    name = "vdn"

    def compute(self, batch, h0=None, frozen=None):
        cfg = self.cfg
        q, q_next, cache, h_out = self.utilities(batch, h0)
        q_tot = take(q, batch.actions).sum(axis=-1)
        y = batch.global_reward * cfg.reward_scale + cfg.gamma * q_next.max(axis=-1).sum(axis=-1)
        td = y - q_tot
        loss = float(np.mean(0.5 * td ** 2))
        m = td.size
        dq_sel = np.broadcast_to((-td / m)[..., None], batch.actions.shape)
        grads = {"q": back_net(self.nets["q"], self.psets["q"].online, cache, scatter(dq_sel, batch.actions))}
        return {"L_vdn": loss}, grads, {"q": loss}, frozen or {}, h_out


# -- QMIX mixing network -------------------------------------------------------

def init_mixer(state_dim: int, n_agents: int, width: int, rng: np.random.Generator) -> dict:
    def lin(fan_in, fan_out):
        b = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-b, b, size=(fan_in, fan_out)), np.zeros(fan_out)

    p = {}
    p["Hw1"], p["hw1"] = lin(state_dim, n_agents * width)
    p["Hb1"], p["hb1"] = lin(state_dim, width)
    p["Hw2"], p["hw2"] = lin(state_dim, width)
    p["Hv"], p["hv"] = lin(state_dim, 1)
    return p


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def qmix_mix(params: dict, state: np.ndarray, q: np.ndarray):
    """Monotone mixing of per-agent values ``q`` (M, N) conditioned on ``state`` (M, S).

    Hypernetwork outputs for the mixing weights pass through abs(), so
    dQ_tot/dQ_n >= 0; biases are unconstrained.  Returns (Q_tot (M,), cache).
    """
    M, N = q.shape
    width = params["hb1"].shape[0]
    raw_w1 = state @ params["Hw1"] + params["hw1"]
    w1 = np.abs(raw_w1).reshape(M, N, width)
    b1 = state @ params["Hb1"] + params["hb1"]
    raw_w2 = state @ params["Hw2"] + params["hw2"]
    w2 = np.abs(raw_w2)
    b2 = (state @ params["Hv"] + params["hv"])[:, 0]
    pre = np.einsum("mn,mnw->mw", q, w1) + b1
    hidden = _elu(pre)
    q_tot = (hidden * w2).sum(axis=1) + b2
    return q_tot, (state, q, raw_w1, w1, raw_w2, w2, pre, hidden)


def qmix_backward(params: dict, cache, dq_tot: np.ndarray):
    """Returns (hypernetwork gradients, dQ_tot/dq scaled by ``dq_tot``)."""
    state, q, raw_w1, w1, raw_w2, w2, pre, hidden = cache
    M, N = q.shape
    g = {}
    d_w2 = hidden * dq_tot[:, None]
    d_hidden = w2 * dq_tot[:, None]
    d_pre = d_hidden * np.where(pre > 0, 1.0, np.exp(np.minimum(pre, 0.0)))
    d_w1 = q[:, :, None] * d_pre[:, None, :]
    dq = np.einsum("mw,mnw->mn", d_pre, w1)
    d_raw_w1 = (d_w1 * np.sign(raw_w1.reshape(w1.shape))).reshape(M, -1)
    d_raw_w2 = d_w2 * np.sign(raw_w2)
    g["Hw1"] = state.T @ d_raw_w1
    g["hw1"] = d_raw_w1.sum(axis=0)
    g["Hb1"] = state.T @ d_pre
    g["hb1"] = d_pre.sum(axis=0)
    g["Hw2"] = state.T @ d_raw_w2
    g["hw2"] = d_raw_w2.sum(axis=0)
    g["Hv"] = state.T @ dq_tot[:, None]
    g["hv"] = np.array([dq_tot.sum()])
    return g, dq


class _MixerNet:
    recurrent = False

    def __init__(self, state_dim, n_agents, width):
        self.state_dim, self.n_agents, self.width = state_dim, n_agents, width

    def init(self, rng):
        return init_mixer(self.state_dim, self.n_agents, self.width, rng)


class QMIX(UtilityLearner):
    name = "qmix"

    def __init__(self, cfg, rows, cols, weights, seed=0):
        super().__init__(cfg, rows, cols, weights, seed)
        self._add("mixer", _MixerNet(self.enc.state_dim, self.n_agents, cfg.mixing_width), cfg.lr_q)

    def compute(self, batch, h0=None, frozen=None):
        cfg = self.cfg
        q, q_next, cache, h_out = self.utilities(batch, h0)
        T, B, N = batch.actions.shape
        mix = self.psets["mixer"]
        s = self.enc.state(batch.obs).reshape(T * B, -1)
        s_next = self.enc.state(batch.next_obs).reshape(T * B, -1)
        q_sel = take(q, batch.actions).reshape(T * B, N)
        q_tot, mcache = qmix_mix(mix.online, s, q_sel)
        q_tot_next, _ = qmix_mix(mix.target, s_next, q_next.max(axis=-1).reshape(T * B, N))
        y = batch.global_reward.reshape(-1) * cfg.reward_scale + cfg.gamma * q_tot_next
        td = y - q_tot
        loss = float(np.mean(0.5 * td ** 2))
        g_mix, dq_sel = qmix_backward(mix.online, mcache, -td / td.size)
        g_q = back_net(self.nets["q"], self.psets["q"].online, cache,
                       scatter(dq_sel.reshape(T, B, N), batch.actions))
        return ({"L_qmix": loss}, {"q": g_q, "mixer": g_mix}, {"q": loss, "mixer": loss},
                frozen or {}, h_out)
