"""FIFO replay buffer holding whole multi-agent transitions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Experience:
    obs: np.ndarray  # (N, 19)
    prev_actions: np.ndarray  # (N,)
    actions: np.ndarray  # (N,)
    rewards: np.ndarray  # (N,)
    global_reward: float
    next_obs: np.ndarray  # (N, 19)
    next_actions: np.ndarray  # (N,) behaviour actions taken at the next decision
    index: int = 0  # position in the run, for ordering checks

    @property
    def state(self) -> np.ndarray:
        return self.obs.reshape(-1)

    @property
    def next_state(self) -> np.ndarray:
        return self.next_obs.reshape(-1)


@dataclass
class Batch:
    """Arrays with leading (T, B) dims; T = 1 for feed-forward minibatches."""

    obs: np.ndarray  # (T, B, N, 19)
    prev_actions: np.ndarray  # (T, B, N)
    actions: np.ndarray
    rewards: np.ndarray  # (T, B, N)
    global_reward: np.ndarray  # (T, B)
    next_obs: np.ndarray
    next_actions: np.ndarray
    index: np.ndarray  # (T, B)

    @property
    def n_agents(self) -> int:
        return self.obs.shape[2]

    @property
    def state(self) -> np.ndarray:
        T, B, N, D = self.obs.shape
        return self.obs.reshape(T, B, N * D)

    @property
    def next_state(self) -> np.ndarray:
        T, B, N, D = self.next_obs.shape
        return self.next_obs.reshape(T, B, N * D)

    @classmethod
    def from_experiences(cls, exps: list[Experience], seq: bool = False) -> "Batch":
        """Stack into (1, B, ...) or, with ``seq``, into a (T, 1, ...) time-ordered run."""

        def stack(get):
            arr = np.stack([np.asarray(get(e), dtype=float) for e in exps])
            return arr[:, None] if seq else arr[None]

        return cls(
            stack(lambda e: e.obs),
            stack(lambda e: e.prev_actions).astype(np.int64),
            stack(lambda e: e.actions).astype(np.int64),
            stack(lambda e: e.rewards),
            stack(lambda e: e.global_reward),
            stack(lambda e: e.next_obs),
            stack(lambda e: e.next_actions).astype(np.int64),
            stack(lambda e: e.index).astype(np.int64),
        )


class ReplayBuffer:
    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Experience | None] = [None] * capacity
        self._head = 0  # physical slot of the oldest item
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, exp: Experience) -> None:
        if self._size < self.capacity:
            self._items[(self._head + self._size) % self.capacity] = exp
            self._size += 1
        else:
            self._items[self._head] = exp
            self._head = (self._head + 1) % self.capacity

    def __getitem__(self, i: int) -> Experience:
        """Chronological access: 0 is the oldest stored transition."""
        if not 0 <= i < self._size:
            raise IndexError(i)
        return self._items[(self._head + i) % self.capacity]

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch | None:
        """Uniform sampling with replacement; ``None`` when the buffer is too small."""
        if self._size < batch_size:
            return None
        idx = rng.integers(0, self._size, size=batch_size)
        return Batch.from_experiences([self[int(i)] for i in idx])

    def sample_sequences(self, periods: int, length: int, rng: np.random.Generator) -> list[Batch] | None:
        """``periods`` back-to-back runs of ``length`` consecutive transitions, oldest first."""
        need = periods * length
        if self._size < need:
            return None
        start = int(rng.integers(0, self._size - need + 1))
        return [
            Batch.from_experiences([self[start + p * length + t] for t in range(length)], seq=True)
            for p in range(periods)
        ]
