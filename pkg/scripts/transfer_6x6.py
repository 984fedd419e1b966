#!/usr/bin/env python3
"""Run 2x2 checkpoints on the 6x6 grid next to static and random controllers.

Example:
    python scripts/transfer_6x6.py runs/matrix/2x2/qcombo_seed*/checkpoints/final.ckpt
"""
import argparse
from pathlib import Path

import numpy as np

from qcombo.config import parse_config
from qcombo.harness import reference_policy, run_policy, run_transfer, write_metrics


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("--target-config", default="configs/6x6_transfer.ini")
    p.add_argument("--duration", type=int)
    p.add_argument("--out", default="runs/transfer_6x6")
    args = p.parse_args()

    target = parse_config(args.target_config)
    program = target.test_flow or target.train_flow
    duration = args.duration or program.periods[-1].end
    out = Path(args.out)
    rows = []
    for i, ckpt in enumerate(args.checkpoints):
        recs = run_transfer(ckpt, target, out / f"checkpoint_{i}", duration)
        rows.append({"policy": str(ckpt), "global_reward": np.mean([r["global_reward"] for r in recs]),
                     "queue": np.mean([r["queue"] for r in recs])})
    for kind in ("static", "random"):
        pol = reference_policy(kind, target.rows * target.cols, target.seed, target.static_period)
        recs = run_policy(target, program, pol, duration)
        rows.append({"policy": kind, "global_reward": np.mean([r["global_reward"] for r in recs]),
                     "queue": np.mean([r["queue"] for r in recs])})
    for r in rows:
        print(f"{r['policy']}: global reward {r['global_reward']:.3f}, queue {r['queue']:.3f}")
    write_metrics(rows, out / "transfer_summary.csv")


if __name__ == "__main__":
    main()
