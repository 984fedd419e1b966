"""QCOMBO: independent utilities coupled to a global action-value by a consistency penalty.

Three losses share one minibatch:

* individual:  L(theta) = mean_n 1/2 (r^n + gamma max_a Qhat^n(o'^n, a) - Q^n(o^n, a^n))^2
* global:      L(w) = 1/2 (R^g + gamma Ghat(s', a') - G(s, a))^2,
               with a'^n = argmax_a Qhat^n(o'^n, a) taken from the *local* target utilities
* consistency: L_reg = 1/2 (G(s, a) - sum_n k^n Q^n(o^n, a^n))^2

and are minimised jointly as L(w) + L(theta) + lam * L_reg.  Execution only ever
uses the local utilities; G exists to shape them during training.
"""
from __future__ import annotations

import numpy as np

from ..neural import MlpSpec, FeedForwardNet, mlp_backward, mlp_forward
from .base import N_ACTIONS, back_net, one_hot, scatter
from .value import UtilityLearner


class QCOMBO(UtilityLearner):
    name = "qcombo"

    def __init__(self, cfg, rows, cols, weights, seed=0):
        super().__init__(cfg, rows, cols, weights, seed)
        g_in = self.enc.state_dim + N_ACTIONS * self.n_agents
        # the global value stays feed-forward even in recurrent mode
        self._add("g", FeedForwardNet(MlpSpec(g_in, cfg.hidden, 1)), cfg.lr_q)

    def global_input(self, obs, actions):
        s = self.enc.state(obs)
        a = one_hot(actions).reshape(*actions.shape[:-1], -1)
        return np.concatenate([s, a], axis=-1)

    def global_value(self, params, obs, actions):
        v, cache = mlp_forward(params, self.global_input(obs, actions))
        return v[..., 0], cache

    def compute(self, batch, h0=None, frozen=None):
        cfg = self.cfg
        lam = cfg.lam
        q, q_next, cache, h_out = self.utilities(batch, h0)
        z1, q_sel, loss_theta = self.individual_td(batch, q, q_next)

        g_ps = self.psets["g"]
        g, g_cache = self.global_value(g_ps.online, batch.obs, batch.actions)
        a_next = np.argmax(q_next, axis=-1)  # greedy joint action from local target utilities
        g_next, _ = self.global_value(g_ps.target, batch.next_obs, a_next)
        big_y = batch.global_reward * cfg.reward_scale + cfg.gamma * g_next

        weighted = q_sel @ self.k
        z2 = g - weighted
        loss_w = float(np.mean(0.5 * (big_y - g) ** 2))
        loss_reg = float(np.mean(0.5 * z2 ** 2))
        total = loss_w + loss_theta + lam * loss_reg

        m = g.size
        # d L_tot / d G = -[Y - (1 + lam) G + lam sum_n k^n Q^n]
        dg = -(big_y - (1.0 + lam) * g + lam * weighted) / m
        # d L_tot / d Q^n = -(Z1 + lam k^n Z2)
        coef = z1 + lam * self.k * z2[..., None]
        dq = scatter(-coef / m, batch.actions)

        grads = {
            "q": back_net(self.nets["q"], self.psets["q"].online, cache, dq),
            "g": mlp_backward(g_ps.online, g_cache, dg[..., None])[0],
        }
        losses = {"L_theta": loss_theta, "L_w": loss_w, "L_reg": loss_reg, "L_tot": total}
        return losses, grads, {"q": total, "g": total}, frozen or {}, h_out
