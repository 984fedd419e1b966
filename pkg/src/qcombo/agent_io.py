"""Observations, rewards and topology weights seen by the learning agents."""
from __future__ import annotations

import warnings

import numpy as np

from .sim import RewardFeatures, World

OBS_DIM = 19

# individual reward weights for (ql, wtl, dl, eml, fl, vl)
REWARD_WEIGHTS = np.array([-0.5, -0.5, -0.5, -0.25, -1.0, 1.0])


def observe_all(world: World) -> np.ndarray:
    """(N, 19) observations: q, v, wt, delay (lanes N, E, S, W), phase one-hot, phase duration."""
    inc = world.incoming_table()
    n = world.net.n_agents
    obs = np.empty((n, OBS_DIM))
    obs[:, 0:4] = inc[:, :, 0]
    obs[:, 4:8] = inc[:, :, 1]
    obs[:, 8:12] = inc[:, :, 2]
    obs[:, 12:16] = inc[:, :, 3]
    obs[:, 16:18] = 0.0
    obs[np.arange(n), 16 + world.phase] = 1.0
    obs[:, 18] = world.phase_ticks * 0.1
    return obs


def observe(world: World, agent: int) -> np.ndarray:
    if not 0 <= agent < world.net.n_agents:
        raise IndexError(f"no agent {agent}")
    return observe_all(world)[agent]


def features_array(features: list[RewardFeatures]) -> np.ndarray:
    return np.array([[f.ql, f.wtl, f.dl, f.eml, f.fl, f.vl] for f in features], dtype=float)


def individual_reward(features: RewardFeatures) -> float:
    return float(features_array([features])[0] @ REWARD_WEIGHTS)


def individual_rewards(features: list[RewardFeatures]) -> np.ndarray:
    return features_array(features) @ REWARD_WEIGHTS


def pagerank_weights(adjacency, damping: float = 0.85, tol: float = 1e-10,
                     max_iter: int = 1000) -> np.ndarray:
    """PageRank of an undirected graph by power iteration with uniform teleport.

    Dangling nodes (no neighbours) spread their mass uniformly.
    """
    adj = np.asarray(adjacency, dtype=float)
    n = adj.shape[0]
    if adj.shape != (n, n) or n == 0:
        raise ValueError("adjacency must be a non-empty square matrix")
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    adj = np.maximum(adj, adj.T)
    if n > 1 and not _connected(adj):
        warnings.warn("intersection graph is disconnected; relying on teleport", stacklevel=2)
    deg = adj.sum(axis=1)
    dangling = deg == 0
    trans = np.divide(adj, deg[:, None], out=np.zeros_like(adj), where=deg[:, None] > 0)
    k = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (k @ trans + k[dangling].sum() / n) + (1.0 - damping) / n
        done = np.abs(nxt - k).sum() < tol
        k = nxt
        if done:
            break
    return k / k.sum()


def _connected(adj: np.ndarray) -> bool:
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == adj.shape[0]


def global_reward(rewards, weights) -> float:
    r = np.asarray(rewards, dtype=float)
    k = np.asarray(weights, dtype=float)
    if r.shape != k.shape:
        raise ValueError(f"reward/weight shape mismatch {r.shape} vs {k.shape}")
    return float(r @ k)


def global_state(world: World) -> np.ndarray:
    """Row-major concatenation of every agent's observation (19 * N values)."""
    return observe_all(world).reshape(-1)
