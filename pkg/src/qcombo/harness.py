"""Training / evaluation schedule, reference policies, generalisation and transfer runs."""
from __future__ import annotations

import csv
import json
import logging
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent_io import REWARD_WEIGHTS, features_array, observe_all, pagerank_weights
from .algorithms import Experience, ReplayBuffer, make_learner
from .algorithms.base import Learner, LearnerConfig
from .config import ExperimentConfig, dump_config
from .neural import config_hash, load_checkpoint, save_checkpoint
from .sim import EW, NS, SWITCH, FlowProgram, World, build_grid

log = logging.getLogger(__name__)


# -- policies -------------------------------------------------------------------

class StaticPolicy:
    """Fixed-time control: every light switches each ``period`` seconds."""

    def __init__(self, n_agents: int, period: int = 30):
        self.n, self.period = n_agents, period

    def reset(self):
        pass

    def act(self, t, obs, prev_actions):
        switch = t > 0 and t % self.period == 0
        return np.full(self.n, SWITCH if switch else 0, dtype=np.int64)


class RandomPolicy:
    """Uniform keep/switch at every decision."""

    def __init__(self, n_agents: int, rng: np.random.Generator):
        self.n, self.rng = n_agents, rng

    def reset(self):
        pass

    def act(self, t, obs, prev_actions):
        return self.rng.integers(0, 2, size=self.n)


class LearnerPolicy:
    """Decentralised execution of a learner's per-agent network."""

    def __init__(self, learner: Learner, rng: np.random.Generator, eps: float = 0.0):
        self.learner, self.rng, self.eps = learner, rng, eps
        self.h = learner.initial_state()

    def reset(self):
        self.h = self.learner.initial_state()

    def act(self, t, obs, prev_actions):
        a, self.h = self.learner.act(obs, prev_actions, self.eps, self.rng, self.h, greedy=self.eps == 0)
        return np.asarray(a, dtype=np.int64)


def reference_policy(kind: str, n_agents: int, seed: int = 0, period: int = 30):
    if kind == "static":
        return StaticPolicy(n_agents, period)
    if kind == "random":
        return RandomPolicy(n_agents, np.random.default_rng([seed, 7]))
    raise ValueError(f"unknown reference policy {kind!r}")


# -- stepping ------------------------------------------------------------------

@dataclass
class Step:
    t: int
    obs: np.ndarray
    prev_actions: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    global_reward: float
    features: np.ndarray  # (N, 6)
    next_obs: np.ndarray
    phases: np.ndarray  # committed phase after the window


class Rollout:
    """Drives a world one decision at a time."""

    def __init__(self, cfg: ExperimentConfig, program: FlowProgram, rows=None, cols=None, seed=0):
        rows = cfg.rows if rows is None else rows
        cols = cfg.cols if cols is None else cols
        self.cfg = cfg
        self.net = build_grid(rows, cols, cfg.edge_length)
        self.world = World(self.net, program, seed)
        self.k = pagerank_weights(self.net.adjacency)
        self.t = 0
        self.prev_actions = np.zeros(self.net.n_agents, dtype=np.int64)
        self.obs = observe_all(self.world)

    def step(self, policy) -> Step:
        obs, prev = self.obs, self.prev_actions
        actions = np.asarray(policy.act(self.t, obs, prev), dtype=np.int64)
        self.world.apply_actions(actions)
        self.world.advance(self.cfg.decision_interval)
        feats = features_array(self.world.pop_reward_features())
        rewards = feats @ REWARD_WEIGHTS
        step = Step(self.t, obs, prev, actions, rewards, float(rewards @ self.k), feats,
                    observe_all(self.world), self.world.phase.copy())
        self.obs = step.next_obs
        self.prev_actions = actions
        self.t += self.cfg.decision_interval
        return step


def make_record(step: Step, cfg: ExperimentConfig, **extra) -> dict:
    n = len(step.rewards)
    lanes = 4 * n * cfg.reward_window
    rec = {"t": step.t, **extra, "global_reward": step.global_reward,
           "queue": step.features[:, 0].sum() / lanes,
           "wait": step.features[:, 1].sum() / lanes,
           "delay": step.features[:, 2].sum() / lanes}
    for i in range(n):
        rec[f"reward_{i}"] = step.rewards[i]
    for i in range(n):
        rec[f"action_{i}"] = int(step.actions[i])
    for i in range(n):
        rec[f"phase_{i}"] = "EW" if step.phases[i] == EW else "NS"
    return rec


# -- persistence -------------------------------------------------------------------

def write_metrics(records: list[dict], path, columns: list[str] | None = None) -> Path:
    """CSV with a header row and one row per record, columns in a stable order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = list(records[0]) if records else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for rec in records:
            w.writerow([_fmt(rec.get(c, "")) for c in columns])
    return path


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_manifest(out_dir, cfg: ExperimentConfig, wall_time: float, **extra) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg.to_dict(), "config_hash": config_hash(cfg.to_dict()), "seed": cfg.seed,
                "git": git_describe(), "wall_time_s": round(wall_time, 3), **extra}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    (out / "config.ini").write_text(dump_config(cfg))
    return out / "manifest.json"


def save_learner(path, learner: Learner, cfg: ExperimentConfig, **meta) -> None:
    save_checkpoint(path, learner.state_tensors(), {
        "algorithm": learner.cfg.algorithm, "rows": learner.rows, "cols": learner.cols,
        "learner": learner.cfg.to_dict(), "config_hash": config_hash(cfg.to_dict()),
        "seed": cfg.seed, **meta})


def load_learner(path, rows: int | None = None, cols: int | None = None,
                 only: tuple[str, ...] | None = None) -> tuple[Learner, dict]:
    """Rebuild a learner from a checkpoint, optionally on a different grid.

    With a different grid only the per-agent networks named in ``only`` are restored.
    """
    tensors, meta = load_checkpoint(path)
    lcfg = LearnerConfig(**meta["learner"])
    rows = meta["rows"] if rows is None else rows
    cols = meta["cols"] if cols is None else cols
    k = pagerank_weights(build_grid(rows, cols).adjacency)
    learner = make_learner(lcfg, rows, cols, k, seed=meta.get("seed", 0))
    learner.load_tensors(tensors, only)
    return learner, meta


# -- training -----------------------------------------------------------------------

@dataclass
class TrainingResult:
    learner: Learner
    summary: list[dict] = field(default_factory=list)
    records: list[dict] = field(default_factory=list)
    losses: list[dict] = field(default_factory=list)
    out_dir: Path | None = None


def schedule(cfg: ExperimentConfig, t: int):
    """(phase, cycle) for the decision taken at second ``t``; phase None past the last cycle."""
    if t < cfg.warmup:
        return "warmup", -1
    span = cfg.train_period + cfg.eval_period
    cycle, within = divmod(t - cfg.warmup, span)
    if cycle >= cfg.n_cycles:
        return None, cycle
    return ("train" if within < cfg.train_period else "eval"), cycle


def epsilon_at(lcfg: LearnerConfig, cycle: int) -> float:
    return lcfg.eps0 * lcfg.eps_decay ** max(cycle, 0)


def run_training(cfg: ExperimentConfig, out_dir=None, write: bool = True) -> TrainingResult:
    """Warm-up with a random policy, then alternate training and evaluation periods."""
    started = time.time()
    out = Path(out_dir or cfg.output_dir)
    roll = Rollout(cfg, cfg.train_flow, seed=cfg.seed)
    learner = make_learner(cfg.learner, cfg.rows, cfg.cols, roll.k, seed=cfg.seed)
    buffer = ReplayBuffer(cfg.learner.buffer_capacity)
    rng_act = np.random.default_rng([cfg.seed, 1])
    rng_train = np.random.default_rng([cfg.seed, 2])
    rng_eval = np.random.default_rng([cfg.seed, 3])
    warm = RandomPolicy(roll.net.n_agents, np.random.default_rng([cfg.seed, 4]))
    train_pol = LearnerPolicy(learner, rng_act)
    eval_pol = LearnerPolicy(learner, rng_eval)
    result = TrainingResult(learner, out_dir=out)

    pending = None
    cycle_records: list[dict] = []
    cycle_losses: list[dict] = []
    end = cfg.warmup + cfg.n_cycles * (cfg.train_period + cfg.eval_period)
    index = 0
    while roll.t < end:
        phase, cycle = schedule(cfg, roll.t)
        eps = epsilon_at(cfg.learner, cycle)
        if phase == "warmup":
            policy = warm
        elif phase == "train":
            train_pol.eps = eps
            policy = train_pol
        else:
            eval_pol.eps = eps if cfg.eval_epsilon == "frozen" else 0.0
            policy = eval_pol
        # one recurrent state follows the single stream of decisions
        if phase == "eval":
            eval_pol.h = train_pol.h
        step = roll.step(policy)
        if phase == "eval":
            train_pol.h = eval_pol.h

        if pending is not None:
            pending.next_actions = step.actions.copy()
            buffer.push(pending)
            pending = None
        if phase in ("warmup", "train"):
            pending = Experience(step.obs, step.prev_actions, step.actions, step.rewards,
                                 step.global_reward, step.next_obs, step.actions, index)
            index += 1

        if phase == "train":
            losses = learner.train_step(buffer, rng_train)
            if losses is not None:
                row = {"t": step.t, "cycle": cycle, **losses}
                result.losses.append(row)
                cycle_losses.append(losses)
        elif eval_window(cfg, step.t) is not None:
            cycle_records.append(make_record(step, cfg, cycle=cycle, eps=eps))

        boundary = roll.t >= cfg.warmup and (roll.t - cfg.warmup) % (cfg.train_period + cfg.eval_period) == 0
        if phase == "eval" and boundary:
            summary = _summarise(cycle, eps, cycle_records, cycle_losses)
            result.summary.append(summary)
            result.records.extend(cycle_records)
            if write:
                write_metrics(cycle_records, out / "metrics" / f"eval_cycle_{cycle:02d}.csv")
                save_learner(out / "checkpoints" / f"cycle_{cycle:02d}.ckpt", learner, cfg, cycle=cycle)
            log.info("cycle %d eps %.3f reward %.3f queue %.3f", cycle, eps,
                     summary["global_reward"], summary["queue"])
            cycle_records, cycle_losses = [], []

    if write:
        write_metrics(result.summary, out / "summary.csv")
        write_metrics(result.losses, out / "losses.csv")
        save_learner(out / "checkpoints" / "final.ckpt", learner, cfg, cycle=cfg.n_cycles - 1)
        write_manifest(out, cfg, time.time() - started, command="train")
    return result


def eval_window(cfg: ExperimentConfig, t: int):
    """Cycle index if the decision at ``t`` falls in a recorded evaluation window, else None."""
    phase, cycle = schedule(cfg, t)
    if phase != "eval":
        return None
    eval_start = cfg.warmup + cycle * (cfg.train_period + cfg.eval_period) + cfg.train_period
    return cycle if t - eval_start >= cfg.eval_period - cfg.record_last else None


def run_reference(cfg: ExperimentConfig, kind: str, out_dir=None, write: bool = True) -> TrainingResult:
    """A static or random controller over the training schedule, recorded in the same windows."""
    started = time.time()
    roll = Rollout(cfg, cfg.train_flow, seed=cfg.seed)
    policy = reference_policy(kind, roll.net.n_agents, cfg.seed, cfg.static_period)
    result = TrainingResult(None, out_dir=Path(out_dir) if out_dir else None)
    end = cfg.warmup + cfg.n_cycles * (cfg.train_period + cfg.eval_period)
    per_cycle: dict[int, list] = {}
    while roll.t < end:
        step = roll.step(policy)
        cycle = eval_window(cfg, step.t)
        if cycle is not None:
            per_cycle.setdefault(cycle, []).append(make_record(step, cfg, cycle=cycle, eps=0.0))
    for cycle, recs in sorted(per_cycle.items()):
        result.records.extend(recs)
        result.summary.append(_summarise(cycle, 0.0, recs, []))
    if write and out_dir is not None:
        write_metrics(result.records, Path(out_dir) / f"{kind}_records.csv")
        write_metrics(result.summary, Path(out_dir) / f"{kind}_summary.csv")
        write_manifest(out_dir, cfg, time.time() - started, command=f"reference:{kind}")
    return result


def _summarise(cycle, eps, records, losses) -> dict:
    row = {"cycle": cycle, "eps": eps}
    for key in ("global_reward", "queue", "wait", "delay"):
        row[key] = float(np.mean([r[key] for r in records])) if records else float("nan")
    for key in sorted({k for l in losses for k in l}):
        row[key] = float(np.mean([l[key] for l in losses]))
    return row


# -- evaluation -------------------------------------------------------------------------

def run_evaluation(roll: Rollout, policy, steps: int = 400, record_last: int = 200, **tags) -> list[dict]:
    """Run ``policy`` for ``steps`` seconds, recording the windows that start in the last ``record_last``."""
    start = roll.t
    records = []
    while roll.t < start + steps:
        step = roll.step(policy)
        if step.t - start >= steps - record_last:
            records.append(make_record(step, roll.cfg, **tags))
    return records


def run_policy(cfg: ExperimentConfig, program: FlowProgram, policy, duration: int,
               rows=None, cols=None, seed=None, segments=None) -> list[dict]:
    """Execute a frozen policy from an empty network; every decision is recorded.

    ``segments`` are period start times; each record carries the index of its period.
    """
    roll = Rollout(cfg, program, rows, cols, cfg.seed if seed is None else seed)
    policy.reset()
    records = []
    bounds = list(segments or [0])
    while roll.t < duration:
        step = roll.step(policy)
        seg = int(np.searchsorted(bounds, step.t, side="right")) - 1
        records.append(make_record(step, cfg, period=seg))
    return records


def run_generalization(checkpoint, cfg: ExperimentConfig, out_dir=None) -> list[dict]:
    """Frozen policy on the multi-period ``test_flow`` program, one CSV per flow period."""
    if cfg.test_flow is None:
        raise ValueError("configuration has no [test_flow] program")
    learner, meta = load_learner(checkpoint)
    if (meta["rows"], meta["cols"]) != (cfg.rows, cfg.cols):
        raise ValueError(f"checkpoint grid {meta['rows']}x{meta['cols']} does not match "
                         f"test grid {cfg.rows}x{cfg.cols}")
    policy = LearnerPolicy(learner, np.random.default_rng([cfg.seed, 3]))
    starts = [p.start for p in cfg.test_flow.periods]
    duration = cfg.test_flow.periods[-1].end
    records = run_policy(cfg, cfg.test_flow, policy, duration, segments=starts)
    if out_dir is not None:
        out = Path(out_dir)
        cols = list(records[0]) if records else None
        write_metrics(records, out / "generalization.csv", cols)
        for i in range(len(starts)):
            write_metrics([r for r in records if r["period"] == i],
                          out / f"generalization_period_{i}.csv", cols)
    return records


def run_transfer(checkpoint, target: ExperimentConfig, out_dir=None, duration=None) -> list[dict]:
    """Execute a small-grid checkpoint's local networks on a larger grid, without training."""
    _, meta = load_checkpoint(checkpoint)
    if meta["learner"].get("identity") != "coords":
        raise ValueError("transfer needs a checkpoint trained with coordinate identity inputs; "
                         "one-hot agent labels have a grid-specific width")
    policy_net = "actor" if meta["algorithm"] in ("iac", "coma") else "q"
    learner, meta = load_learner(checkpoint, target.rows, target.cols, only=(policy_net,))
    program = target.test_flow or target.train_flow
    duration = duration or program.periods[-1].end
    policy = LearnerPolicy(learner, np.random.default_rng([target.seed, 3]))
    records = run_policy(target, program, policy, duration)
    if out_dir is not None:
        write_metrics(records, Path(out_dir) / "transfer.csv")
    return records


def phase_trace(records: list[dict], agent: int, interval: int = 5) -> dict:
    """Switch counts and green-interval lengths of one agent from consecutive records."""
    phases = [r[f"phase_{agent}"] for r in records]
    runs = []
    current, length = phases[0], 0
    for p in phases:
        if p == current:
            length += interval
        else:
            runs.append((current, length))
            current, length = p, interval
    ew = [l for p, l in runs if p == "EW"]
    to_ns = sum(1 for (a, _), (b, _) in zip(runs, runs[1:] + [(current, 0)]) if a == "EW" and b == "NS")
    return {"switches_to_ns": to_ns, "mean_ew_green": float(np.mean(ew)) if ew else float(len(phases) * interval),
            "duration": len(phases) * interval, "ns_share": phases.count("NS") / len(phases)}
