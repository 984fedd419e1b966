"""Multi-agent learners over a shared replay buffer."""
from .actor_critic import COMA, IAC
from .base import (ALGORITHMS, N_ACTIONS, Encoder, Learner, LearnerConfig, epsilon_greedy,
                   identity_codes)
from .qcombo import QCOMBO
from .replay import Batch, Experience, ReplayBuffer
from .value import IDQN, QMIX, VDN, qmix_backward, qmix_mix

LEARNERS = {"qcombo": QCOMBO, "idqn": IDQN, "iac": IAC, "vdn": VDN, "qmix": QMIX, "coma": COMA}


def make_learner(cfg: LearnerConfig, rows: int, cols: int, weights, seed: int = 0) -> Learner:
    return LEARNERS[cfg.algorithm](cfg, rows, cols, weights, seed)
