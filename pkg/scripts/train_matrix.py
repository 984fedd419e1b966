#!/usr/bin/env python3
"""Train several algorithms over seeds on the shipped configs and tabulate final-cycle results.

Example:
    python scripts/train_matrix.py --configs configs/1x2.ini configs/2x2.ini \
        --algos qcombo idqn --seeds 0 1 2 --out runs/matrix
"""
import argparse
import logging
from pathlib import Path

from qcombo.config import parse_config
from qcombo.harness import run_reference, run_training, write_metrics


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--configs", nargs="+", default=["configs/1x2.ini", "configs/2x2.ini"])
    p.add_argument("--algos", nargs="+", default=["qcombo", "idqn", "iac", "vdn", "qmix", "coma"])
    p.add_argument("--seeds", nargs="+", type=int, default=[0, 1, 2])
    p.add_argument("--rnn", action="store_true")
    p.add_argument("--references", action="store_true", help="also run static and random controllers")
    p.add_argument("--out", default="runs/matrix")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    rows = []
    for path in args.configs:
        base = parse_config(path)
        name = Path(path).stem
        for seed in args.seeds:
            cfg = base.replace(seed=seed)
            for algo in args.algos:
                run_cfg = cfg.with_learner(algorithm=algo, rnn=args.rnn)
                res = run_training(run_cfg, Path(args.out) / name / f"{algo}_seed{seed}")
                rows.append({"config": name, "policy": algo, "seed": seed, **res.summary[-1]})
                print(f"{name} {algo} seed {seed}: {res.summary[-1]['global_reward']:.3f}")
            if args.references:
                for kind in ("static", "random"):
                    res = run_reference(cfg, kind, Path(args.out) / name / f"{kind}_seed{seed}")
                    rows.append({"config": name, "policy": kind, "seed": seed, **res.summary[-1]})
    columns = ["config", "policy", "seed", "cycle", "eps", "global_reward", "queue", "wait", "delay",
               "L_theta", "L_w", "L_reg", "L_tot"]
    write_metrics(rows, Path(args.out) / "final_cycle.csv", columns)


if __name__ == "__main__":
    main()
