"""Shared learner plumbing: configuration, input encoding, behaviour policies."""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from ..agent_io import OBS_DIM
from ..neural import (FeedForwardNet, MlpSpec, ParamSet, RecurrentNet, adam_update,
                      soft_update_, softmax)
from .replay import Batch, ReplayBuffer

N_ACTIONS = 2
ALGORITHMS = ("qcombo", "idqn", "iac", "vdn", "qmix", "coma")

# fixed per-feature scale for network inputs: q, v (/10), wt [min], delay, phase, duration (/60 s)
OBS_SCALE = np.array([0.1] * 8 + [1.0] * 8 + [1.0, 1.0] + [1.0 / 60.0])


@dataclass
class LearnerConfig:
    algorithm: str = "qcombo"
    gamma: float = 0.99
    lam: float = 1.0
    lr_q: float = 0.001
    lr_actor: float = 0.0001
    tau: float = 0.01
    eps0: float = 0.9
    eps_decay: float = 0.995
    minibatches: int = 100
    batch_size: int = 30
    rnn: bool = False
    rnn_periods: int = 6
    rnn_period_len: int = 30
    identity: str = "coords"
    hidden: tuple[int, ...] = (256, 256)
    actor_hidden: tuple[int, ...] = (64, 64)
    rnn_hidden: int = 64
    mixing_width: int = 32
    reward_scale: float = 1.0
    buffer_capacity: int = 1000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.actor_hidden = tuple(int(h) for h in self.actor_hidden)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if not 0.0 <= self.eps0 <= 1.0 or not 0.0 < self.eps_decay <= 1.0:
            raise ValueError("epsilon schedule out of range")
        if self.identity not in ("coords", "onehot"):
            raise ValueError("identity must be 'coords' or 'onehot'")
        if min(self.minibatches, self.batch_size, self.rnn_periods, self.rnn_period_len) < 1:
            raise ValueError("training sizes must be positive")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in fields(self)}


def identity_codes(rows: int, cols: int, mode: str) -> np.ndarray:
    """Per-agent identity input, row-major agent order."""
    n = rows * cols
    if mode == "onehot":
        return np.eye(n)
    r = np.arange(n) // cols
    c = np.arange(n) % cols
    rr = r / (rows - 1) if rows > 1 else np.full(n, 0.5)
    cc = c / (cols - 1) if cols > 1 else np.full(n, 0.5)
    return np.stack([rr, cc], axis=1).astype(float)


def one_hot(actions: np.ndarray, n: int = N_ACTIONS) -> np.ndarray:
    return np.eye(n)[np.asarray(actions, dtype=np.int64)]


class Encoder:
    """Builds network inputs from raw observations."""

    def __init__(self, rows: int, cols: int, identity: str = "coords"):
        self.rows, self.cols = rows, cols
        self.n_agents = rows * cols
        self.ids = identity_codes(rows, cols, identity)

    @property
    def local_dim(self) -> int:
        return OBS_DIM + N_ACTIONS + self.ids.shape[1]

    @property
    def state_dim(self) -> int:
        return OBS_DIM * self.n_agents

    def local(self, obs: np.ndarray, prev_actions: np.ndarray) -> np.ndarray:
        """(..., N, 19) + (..., N) -> (..., N, local_dim)."""
        lead = obs.shape[:-1]
        ids = np.broadcast_to(self.ids, lead + self.ids.shape[-1:])
        return np.concatenate([obs * OBS_SCALE, one_hot(prev_actions), ids], axis=-1)

    def state(self, obs: np.ndarray) -> np.ndarray:
        """(..., N, 19) -> (..., 19N) scaled global state."""
        s = obs * OBS_SCALE
        return s.reshape(*s.shape[:-2], -1)


def epsilon_greedy(q_values: np.ndarray, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Row-wise epsilon-greedy over the last axis; ties go to action 0 (keep)."""
    q = np.atleast_2d(q_values)
    greedy = np.argmax(q, axis=-1)
    explore = rng.random(q.shape[0]) < eps
    random_a = rng.integers(0, q.shape[-1], size=q.shape[0])
    out = np.where(explore, random_a, greedy)
    return out if np.ndim(q_values) > 1 else out[0]


def take(values: np.ndarray, actions: np.ndarray) -> np.ndarray:
    """values[..., a] along the last axis."""
    return np.take_along_axis(values, actions[..., None], axis=-1)[..., 0]


def scatter(grad_sel: np.ndarray, actions: np.ndarray, n: int = N_ACTIONS) -> np.ndarray:
    return grad_sel[..., None] * one_hot(actions, n)


def make_net(input_dim: int, output_dim: int, hidden: tuple[int, ...], recurrent: bool,
             rnn_hidden: int = 64):
    if recurrent:
        return RecurrentNet(input_dim, output_dim, rnn_hidden)
    return FeedForwardNet(MlpSpec(input_dim, hidden, output_dim))


def run_net(net, params, x: np.ndarray, h0=None):
    """Apply ``net`` to x of shape (T, B, N, in); returns (T, B, N, out), h_T, cache."""
    T, B, N, D = x.shape
    y, h, cache = net.forward(params, x.reshape(T, B * N, D), h0)
    return y.reshape(T, B, N, -1), h, cache


def back_net(net, params, cache, dy: np.ndarray) -> dict:
    T, B, N, A = dy.shape
    return net.backward(params, cache, dy.reshape(T, B * N, A))


def next_values(net, params, x: np.ndarray, x_next: np.ndarray, h0=None) -> np.ndarray:
    """Network outputs at the successor inputs.

    Recurrent nets are unrolled over the run followed by its final successor so the
    successor of step t sees the hidden state built from steps <= t.
    """
    if not net.recurrent:
        return run_net(net, params, x_next)[0]
    full = np.concatenate([x, x_next[-1:]], axis=0)
    return run_net(net, params, full, h0)[0][1:]


class Learner:
    """Base class.  Subclasses fill ``self.psets`` / ``self.nets`` and implement ``compute``."""

    name = "base"
    actor_critic = False

    def __init__(self, cfg: LearnerConfig, rows: int, cols: int, weights: np.ndarray, seed: int = 0):
        self.cfg = cfg
        self.rows, self.cols = rows, cols
        self.n_agents = rows * cols
        self.enc = Encoder(rows, cols, cfg.identity)
        self.k = np.asarray(weights, dtype=float)
        self.rng = np.random.default_rng(seed)
        self.psets: dict[str, ParamSet] = {}
        self.nets: dict = {}
        self.lrs: dict[str, float] = {}
        self._train_h: dict[str, np.ndarray] = {}

    # subclasses: the network that drives acting ("q" or "actor")
    policy_net = "q"

    def _add(self, name: str, net, lr: float):
        self.nets[name] = net
        self.psets[name] = ParamSet(net.init(self.rng))
        self.lrs[name] = lr

    # -- acting -------------------------------------------------------------
    def initial_state(self):
        net = self.nets[self.policy_net]
        return net.initial_state(self.n_agents) if net.recurrent else None

    def policy_outputs(self, obs: np.ndarray, prev_actions: np.ndarray, h=None):
        """Q-values or logits for all agents at one decision: (N, A), h'."""
        net = self.nets[self.policy_net]
        x = self.enc.local(obs, prev_actions)[None, None]
        y, h_new, _ = run_net(net, self.psets[self.policy_net].online, x, h)
        return y[0, 0], h_new

    def act(self, obs, prev_actions, eps: float, rng: np.random.Generator, h=None, greedy=False):
        out, h_new = self.policy_outputs(obs, prev_actions, h)
        if not self.actor_critic:
            return epsilon_greedy(out, 0.0 if greedy else eps, rng), h_new
        probs = softmax(out)
        sampled = np.array([rng.choice(N_ACTIONS, p=p) for p in probs])
        explore = rng.random(len(probs)) < (0.0 if greedy else eps)
        random_a = rng.integers(0, N_ACTIONS, size=len(probs))
        return np.where(explore, random_a, sampled), h_new

    # -- learning -----------------------------------------------------------
    def compute(self, batch: Batch, h0: dict | None = None, frozen: dict | None = None):
        """Returns (losses, grads, objectives, frozen, h_out).

        ``objectives[name]`` is the scalar whose gradient w.r.t. ``psets[name].online`` is
        ``grads[name]``; ``frozen`` holds quantities treated as constants (advantages).
        """
        raise NotImplementedError

    def apply(self, grads: dict) -> None:
        for name in sorted(grads):
            adam_update(self.psets[name], grads[name], self.lrs[name])
        for name in sorted(self.psets):
            soft_update_(self.psets[name], self.cfg.tau)

    def update(self, batch: Batch, h0: dict | None = None) -> dict:
        losses, grads, _, _, h_out = self.compute(batch, h0)
        if not all(np.isfinite(v) for v in losses.values()):
            raise FloatingPointError(f"non-finite loss {losses}")
        self.apply(grads)
        return {"losses": losses, "h": h_out}

    def train_step(self, buffer: ReplayBuffer, rng: np.random.Generator) -> dict | None:
        """One training step: many minibatch updates (or consecutive RNN periods)."""
        cfg = self.cfg
        totals: dict[str, float] = {}
        count = 0
        if cfg.rnn:
            runs = buffer.sample_sequences(cfg.rnn_periods, cfg.rnn_period_len, rng)
            if runs is None:
                return None
            for batch in runs:
                h0 = {k: v for k, v in self._train_h.items()} or None
                out = self.update(batch, h0)
                self._train_h.update(out["h"])
                count += 1
                for k, v in out["losses"].items():
                    totals[k] = totals.get(k, 0.0) + v
        else:
            for _ in range(cfg.minibatches):
                batch = buffer.sample(cfg.batch_size, rng)
                if batch is None:
                    return None
                out = self.update(batch)
                count += 1
                for k, v in out["losses"].items():
                    totals[k] = totals.get(k, 0.0) + v
        return {k: v / count for k, v in totals.items()}

    # -- persistence --------------------------------------------------------
    def state_tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for name, ps in self.psets.items():
            for k, v in ps.online.items():
                out[f"{name}/online/{k}"] = v
            for k, v in ps.target.items():
                out[f"{name}/target/{k}"] = v
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray], only: tuple[str, ...] | None = None) -> None:
        for name, ps in self.psets.items():
            if only is not None and name not in only:
                continue
            for k in ps.online:
                ps.online[k][...] = tensors[f"{name}/online/{k}"]
                ps.target[k][...] = tensors[f"{name}/target/{k}"]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.state_tensors().items()}

