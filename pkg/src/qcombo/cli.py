"""Command line entry point: train, eval, transfer and sweep."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, parse_config
from .harness import (LearnerPolicy, RandomPolicy, Rollout, load_learner, run_evaluation, run_generalization,
                      run_training, run_transfer, schedule, write_manifest, write_metrics)
from .neural import load_checkpoint
from .sim import SimulatorFault

log = logging.getLogger("qcombo")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcombo", description="Multi-agent traffic signal control experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a learner on a configured network")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--algo", choices=["qcombo", "idqn", "iac", "vdn", "qmix", "coma"])
    t.add_argument("--rnn", action="store_true", help="recurrent per-agent networks")
    t.add_argument("--out", help="output directory (default: the config's output_dir)")

    e = sub.add_parser("eval", help="evaluate a checkpoint with a frozen policy")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--out")

    tr = sub.add_parser("transfer", help="run a checkpoint's local networks on another grid")
    tr.add_argument("--checkpoint", required=True)
    tr.add_argument("--target-config", required=True)
    tr.add_argument("--duration", type=int)
    tr.add_argument("--out")

    s = sub.add_parser("sweep", help="train QCOMBO once per consistency weight")
    s.add_argument("--lambda", dest="lambdas", required=True, help="comma separated, e.g. 0.1,1,10")
    s.add_argument("--config", default=None, help="base configuration (default: built-in 1x2)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    return p


def _parse_lambdas(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--lambda expects comma separated numbers, got {text!r}") from exc
    if not values or any(v < 0 for v in values):
        raise ConfigError("--lambda needs at least one non-negative value")
    return values


def cmd_train(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.algo:
        cfg = cfg.with_learner(algorithm=args.algo)
    if args.rnn:
        cfg = cfg.with_learner(rnn=True)
    out = Path(args.out or cfg.output_dir)
    result = run_training(cfg, out)
    last = result.summary[-1]
    print(f"trained {cfg.learner.algorithm} for {cfg.n_cycles} cycles: "
          f"final global reward {last['global_reward']:.3f}, queue {last['queue']:.3f} -> {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = parse_config(args.config)
    out = Path(args.out or Path(cfg.output_dir) / "eval")
    if cfg.test_flow is not None:
        records = run_generalization(args.checkpoint, cfg, out)
    else:
        learner, meta = load_learner(args.checkpoint)
        if (meta["rows"], meta["cols"]) != (cfg.rows, cfg.cols):
            raise ConfigError(f"checkpoint grid {meta['rows']}x{meta['cols']} does not match "
                              f"config grid {cfg.rows}x{cfg.cols}")
        roll = Rollout(cfg, cfg.train_flow, seed=cfg.seed)
        policy = LearnerPolicy(learner, np.random.default_rng([cfg.seed, 3]))
        # populate the network as during training, then one recorded evaluation period
        warm = RandomPolicy(roll.net.n_agents, np.random.default_rng([cfg.seed, 4]))
        while schedule(cfg, roll.t)[0] == "warmup":
            roll.step(warm)
        records = run_evaluation(roll, policy, cfg.eval_period, cfg.record_last)
        write_metrics(records, out / "eval.csv")
    write_manifest(out, cfg, 0.0, command="eval", checkpoint=str(args.checkpoint))
    mean = float(np.mean([r["global_reward"] for r in records]))
    print(f"evaluated {len(records)} decisions: mean global reward {mean:.3f} -> {out}")
    return 0


def cmd_transfer(args) -> int:
    cfg = parse_config(args.target_config)
    out = Path(args.out or Path(cfg.output_dir) / "transfer")
    _, meta = load_checkpoint(args.checkpoint)
    records = run_transfer(args.checkpoint, cfg, out, args.duration)
    write_manifest(out, cfg, 0.0, command="transfer", checkpoint=str(args.checkpoint),
                   source_grid=[meta["rows"], meta["cols"]])
    mean = float(np.mean([r["global_reward"] for r in records]))
    print(f"transferred {meta['rows']}x{meta['cols']} policy to {cfg.rows}x{cfg.cols}: "
          f"mean global reward {mean:.3f} -> {out}")
    return 0


def cmd_sweep(args) -> int:
    lambdas = _parse_lambdas(args.lambdas)
    if args.config:
        base = parse_config(args.config)
    else:
        from .config import ExperimentConfig
        from .sim import FlowPeriod, FlowProgram
        base = ExperimentConfig(rows=1, cols=2, output_dir="runs/sweep", train_flow=FlowProgram(
            (FlowPeriod(0, 12000, (700.0,), (10.0, 620.0)),)))
        # same desk profile as configs/1x2.ini
        base = base.with_learner(hidden=(64, 64), minibatches=25, lr_q=3e-4, reward_scale=0.01)
    if args.seed is not None:
        base = base.replace(seed=args.seed)
    root = Path(args.out or base.output_dir)
    rows = []
    for lam in lambdas:
        cfg = base.with_learner(algorithm="qcombo", lam=lam)
        result = run_training(cfg, root / f"lambda_{lam:g}")
        last = result.summary[-1]
        rows.append({"lambda": lam, "global_reward": last["global_reward"], "queue": last["queue"],
                     "L_reg": last.get("L_reg", float("nan"))})
        print(f"lambda {lam:g}: final global reward {last['global_reward']:.3f}")
    write_metrics(rows, root / "sweep.csv")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "transfer": cmd_transfer, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, KeyError, OSError, SimulatorFault, FloatingPointError) as exc:
        print(f"qcombo {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
