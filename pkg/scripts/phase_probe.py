#!/usr/bin/env python3
"""Greedy phase behaviour of trained 1x2 checkpoints, plus hand-written periodic controllers.

Runs each policy from an empty network, drops the first ``--skip`` seconds and reports the
left agent's switches to N-S per 120 s and its mean E-W green time.

Example:
    python scripts/phase_probe.py runs/matrix/1x2/*_seed*/checkpoints/final.ckpt
"""
import argparse

import numpy as np

from qcombo.config import parse_config
from qcombo.harness import LearnerPolicy, load_learner, phase_trace, run_policy


class PeriodicPolicy:
    """Per-agent fixed green splits: (E-W seconds, N-S seconds) for each agent."""

    def __init__(self, splits):
        self.splits = splits

    def reset(self):
        pass

    def act(self, t, obs, prev_actions):
        acts = []
        for agent, (ew, ns) in enumerate(self.splits):
            green_ew = obs[agent, 16] == 1.0
            elapsed = obs[agent, 18]
            acts.append(int(elapsed >= (ew if green_ew else ns)))
        return np.array(acts)


def summarise(name, records, skip, interval):
    tail = records[skip // interval:]
    tr = phase_trace(tail, agent=0, interval=interval)
    reward = np.mean([r["global_reward"] for r in tail])
    print(f"{name}: reward {reward:.2f}, left switches/120s {tr['switches_to_ns'] / (tr['duration'] / 120):.2f}, "
          f"mean E-W green {tr['mean_ew_green']:.1f}s, N-S share {tr['ns_share']:.2f}")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("checkpoints", nargs="*")
    p.add_argument("--config", default="configs/1x2.ini")
    p.add_argument("--duration", type=int, default=3000)
    p.add_argument("--skip", type=int, default=1000)
    args = p.parse_args()
    cfg = parse_config(args.config)
    interval = cfg.decision_interval
    for ckpt in args.checkpoints:
        learner, _ = load_learner(ckpt)
        recs = run_policy(cfg, cfg.train_flow, LearnerPolicy(learner, np.random.default_rng(0)), args.duration)
        summarise(ckpt, recs, args.skip, interval)
    for splits in ([(10**9, 5), (60, 60)], [(120, 5), (60, 60)], [(30, 5), (60, 60)]):
        recs = run_policy(cfg, cfg.train_flow, PeriodicPolicy(splits), args.duration)
        summarise(f"periodic {splits}", recs, args.skip, interval)


if __name__ == "__main__":
    main()
