"""Training, evaluation and baseline runs with CSV reporting.

Random streams are split from the run seed by purpose, so changing for
instance the validation size never shifts the training episodes.
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

import secselect
from secselect.agent import OBS_LAYOUT_VERSION, action_mask, encode_observation, observation_length
from secselect.agent import AlwaysAccept, RandomAction
from secselect.dqn.checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from secselect.dqn.network import EVAL, Adam, QNetwork
from secselect.dqn.replay import ReplayBuffer, Transition
from secselect.dqn.training import TrainConfig, build_network, masked_argmax, select_action, sync_target, train_step
from secselect.environment.env import EpisodeState, ServiceSelectionEnv, Status, Task
from secselect.environment.scenario import Scenario
from secselect.errors import ConfigurationError
from secselect.harness.config import RunConfig, build_env, build_scenario
from secselect.harness.metrics import EpisodeRecord, episode_record, summarize

EPISODE_COLUMNS = (
    "phase", "epoch", "episode", "path", "length", "status", "cop", "tlo", "unno", "steps", "n_accepts", "return",
)
EPOCH_COLUMNS = (
    "phase", "epoch", "episodes", "cop_mean", "cop_std", "tlo_mean", "tlo_std", "unno_mean", "unno_std", "unno_n",
    "steps_mean", "steps_std", "n_success", "n_security_violation", "n_time_expired", "n_path_exhausted",
    "within_budget", "td_loss_mean", "td_updates", "epsilon",
)
STEP_COLUMNS = ("phase", "epoch", "episode", "step", "action", "kind", "r_o", "r_sl", "r_total")
CSV_VERSION = 1

# purpose -> spawn key of the run seed
STREAM_TRAIN_EPISODES = 1
STREAM_EXPLORE = 2
STREAM_REPLAY = 3


def stream(seed: int, key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, Status):
        return v.value
    return str(v)


class CsvSink:
    """Append-only CSV writer with a fixed header."""

    def __init__(self, path: Path, columns: Sequence[str]) -> None:
        self.path = path
        self.columns = tuple(columns)
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(self.columns)

    def write(self, row: dict) -> None:
        self._w.writerow([_fmt(row.get(c)) for c in self.columns])

    def close(self) -> None:
        self._fh.close()


# -- episodes -------------------------------------------------------------------

PolicyFn = Callable[[np.ndarray, np.ndarray], int]


def episode_set(env: ServiceSelectionEnv, n: int, seed: int) -> list[tuple[int, Task]]:
    """A fixed list of (path, task) pairs; the requirements' own task is used when it has one."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        path = int(rng.integers(len(env.scenario.paths)))
        task = env.fixed_task if env.fixed_task is not None else env.sample_task(rng)
        out.append((path, task))
    return out


def greedy_policy(net: QNetwork) -> PolicyFn:
    return lambda obs, mask: masked_argmax(net.forward(obs, EVAL), mask)


def fixed_policy(name: str, rng: np.random.Generator) -> PolicyFn:
    if name == "always-accept":
        return AlwaysAccept().act
    if name == "random":
        return RandomAction(rng).act
    raise ConfigurationError(f"unknown baseline policy {name!r}; choose always-accept or random")


@dataclass
class Learner:
    """Single-writer DQN state: online and target nets, replay, optimizer, counters."""

    net: QNetwork
    target: QNetwork
    buffer: ReplayBuffer
    opt: Adam
    cfg: TrainConfig
    explore_rng: np.random.Generator
    replay_rng: np.random.Generator
    env_steps: int = 0
    updates: int = 0
    epoch_losses: list[float] = field(default_factory=list)

    @classmethod
    def create(cls, obs_dim: int, n_actions: int, cfg: TrainConfig, seed: int) -> "Learner":
        net = build_network(obs_dim, n_actions, cfg)
        target = net.clone()
        return cls(net, target, ReplayBuffer(cfg.buffer_capacity, obs_dim, n_actions), Adam(net.params, cfg.lr), cfg,
                   stream(seed, STREAM_EXPLORE), stream(seed, STREAM_REPLAY))

    @property
    def epsilon(self) -> float:
        return self.cfg.epsilon(self.env_steps)

    def act(self, obs: np.ndarray, mask: np.ndarray) -> int:
        return select_action(self.net, obs, mask, self.epsilon, self.explore_rng)

    def observe(self, tr: Transition) -> None:
        self.buffer.add(tr)
        self.env_steps += 1
        if len(self.buffer) >= self.cfg.learning_starts and self.env_steps % self.cfg.train_every == 0:
            self.epoch_losses.append(train_step(self.net, self.target, self.buffer, self.cfg, self.opt, self.replay_rng))
            self.updates += 1
            if self.updates % self.cfg.target_sync == 0:
                sync_target(self.net, self.target)


def run_episode(
    env: ServiceSelectionEnv,
    policy: PolicyFn | None,
    rng: np.random.Generator | None = None,
    path: int | None = None,
    task: Task | None = None,
    learner: Learner | None = None,
    on_step: Callable[[int, int, object], None] | None = None,
) -> EpisodeState:
    """Play one episode; with a learner, actions come from it and transitions feed it."""
    state = env.reset(rng if rng is not None else np.random.default_rng(0), task=task, path=path, training=True)
    obs = encode_observation(state, env)
    mask = action_mask(state, env)
    n_obs = observation_length(env.m, env.K)
    while not state.done:
        a = learner.act(obs, mask) if learner is not None else policy(obs, mask)
        if not mask[a]:
            raise ConfigurationError(f"policy returned masked action {a}")
        step = state.step_index
        state, r, done, info = env.step(state, a)
        if done:
            next_obs, next_mask = np.zeros(n_obs), np.zeros(env.n_actions, dtype=bool)
        else:
            next_obs, next_mask = encode_observation(state, env), action_mask(state, env)
        if learner is not None:
            learner.observe(Transition(obs, a, r, next_obs, done, next_mask))
        if on_step is not None:
            on_step(step, a, info["breakdown"])
        obs, mask = next_obs, next_mask
    return state


# -- reporting ------------------------------------------------------------------


class Reporter:
    def __init__(self, out: Path, config: RunConfig) -> None:
        out.mkdir(parents=True, exist_ok=True)
        self.out = out
        self.config = config
        self.episodes = CsvSink(out / "metrics_episode.csv", EPISODE_COLUMNS)
        self.epochs = CsvSink(out / "metrics_epoch.csv", EPOCH_COLUMNS)
        self.steps = CsvSink(out / "metrics_step.csv", STEP_COLUMNS) if config["metrics"]["step_log"] else None

    def record(self, env: ServiceSelectionEnv, state: EpisodeState, phase: str, epoch: int, episode: int) -> EpisodeRecord:
        m = self.config["metrics"]
        rec = episode_record(state, env, m["cop"], m["steps"], m["unno"])
        self.episodes.write({
            "phase": phase, "epoch": epoch, "episode": episode, "path": rec.path, "length": rec.length,
            "status": rec.status, "cop": float(rec.cop), "tlo": float(rec.tlo),
            "unno": None if rec.unno is None else float(rec.unno), "steps": float(rec.steps),
            "n_accepts": rec.n_accepts, "return": float(rec.episode_return),
        })
        return rec

    def step_hook(self, phase: str, epoch: int, episode: int):
        if self.steps is None:
            return None

        def hook(step, action, b):
            self.steps.write({"phase": phase, "epoch": epoch, "episode": episode, "step": step, "action": action,
                              "kind": b.action_kind.value, "r_o": float(b.r_o), "r_sl": float(b.r_sl),
                              "r_total": float(b.r_total)})
        return hook

    def epoch_row(self, phase: str, epoch: int, records: Sequence[EpisodeRecord], losses=None, eps=None) -> dict:
        row = {"phase": phase, "epoch": epoch, **summarize(records)}
        if losses is not None:
            row["td_loss_mean"] = math.fsum(losses) / len(losses) if losses else math.nan
            row["td_updates"] = len(losses)
        row["epsilon"] = eps
        self.epochs.write({k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})
        return row

    def close(self) -> None:
        for sink in (self.episodes, self.epochs, self.steps):
            if sink is not None:
                sink.close()


def evaluate(
    env: ServiceSelectionEnv,
    policy: PolicyFn,
    episodes: Sequence[tuple[int, Task]],
    reporter: Reporter | None = None,
    phase: str = "validation",
    epoch: int = 0,
) -> list[EpisodeRecord]:
    records = []
    for i, (path, task) in enumerate(episodes):
        hook = reporter.step_hook(phase, epoch, i) if reporter else None
        state = run_episode(env, policy, path=path, task=task, on_step=hook)
        if reporter is not None:
            records.append(reporter.record(env, state, phase, epoch, i))
        else:
            records.append(episode_record(state, env))
    return records


def safe_cop(records: Sequence[EpisodeRecord]) -> float:
    """Mean COP where security-violation episodes count as zero."""
    return math.fsum(0.0 if r.status is Status.SECURITY_VIOLATION else r.cop for r in records) / len(records)


# -- runs -----------------------------------------------------------------------


@dataclass
class RunResult:
    out: Path
    epoch_rows: list[dict]
    eval_records: list[EpisodeRecord]
    best_epoch: int | None = None
    eval_episodes: list[tuple[int, Task]] = field(default_factory=list)


def _prepare(config: RunConfig, scenario: Scenario | None):
    scenario = scenario or build_scenario(config)
    env = build_env(config, scenario)
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    scenario.save(out / "scenario.json")
    return env, out


def _write_meta(out: Path, config: RunConfig, started: str, extra: dict) -> None:
    user_train = set(extra.pop("user_train_keys", ()))
    meta = {
        "config": config.doc,
        "seed": config.seed,
        "scenario_archive": "scenario.json",
        "versions": {
            "secselect": secselect.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "obs_layout": OBS_LAYOUT_VERSION,
            "checkpoint_format": FORMAT_VERSION,
            "csv_format": CSV_VERSION,
        },
        "defaulted_train_options": sorted(set(TrainConfig().to_dict()) - user_train - {"seed"}),
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }
    (out / "run.meta").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def run_training(config: RunConfig, scenario: Scenario | None = None, user_train_keys=()) -> RunResult:
    """Epochs of epsilon-greedy learning episodes, each followed by a greedy validation
    sweep; the best validation checkpoint is finally scored on held-out episodes."""
    started = _now()
    env, out = _prepare(config, scenario)
    cfg = config.train
    learner = Learner.create(observation_length(env.m, env.K), env.n_actions, cfg, cfg.seed)
    train_rng = stream(config.seed, STREAM_TRAIN_EPISODES)
    val_set = episode_set(env, config["validation"]["episodes"], config["validation"]["seed"])
    eval_set = episode_set(env, config["evaluation"]["episodes"], config["evaluation"]["seed"])
    rep = Reporter(out, config)
    rows, best = [], (-1.0, math.inf, 0)
    try:
        for epoch in range(1, config["epochs"] + 1):
            learner.epoch_losses = []
            train_records = []
            for i in range(config["episodes_per_epoch"]):
                state = run_episode(env, None, train_rng, learner=learner, on_step=rep.step_hook("train", epoch, i))
                train_records.append(rep.record(env, state, "train", epoch, i))
            rows.append(rep.epoch_row("train", epoch, train_records, learner.epoch_losses, learner.epsilon))
            val_records = evaluate(env, greedy_policy(learner.net), val_set, rep, "validation", epoch)
            rows.append(rep.epoch_row("validation", epoch, val_records))
            score = (safe_cop(val_records), rows[-1]["tlo_mean"])
            if score[0] > best[0] or (score[0] == best[0] and score[1] < best[1]):
                best = (score[0], score[1], epoch)
                save_checkpoint(learner.net, out / "best.slqn")
            if config["checkpoint_every"] and epoch % config["checkpoint_every"] == 0:
                save_checkpoint(learner.net, out / f"epoch{epoch:04d}.slqn")
        save_checkpoint(learner.net, out / "final.slqn")
        best_net = load_checkpoint(out / "best.slqn")
        eval_records = evaluate(env, greedy_policy(best_net), eval_set, rep, "eval", best[2])
        rows.append(rep.epoch_row("eval", best[2], eval_records))
    finally:
        rep.close()
    _write_meta(out, config, started, {"kind": "train", "best_epoch": best[2], "env_steps": learner.env_steps,
                                       "updates": learner.updates, "user_train_keys": user_train_keys})
    return RunResult(out, rows, eval_records, best[2], eval_set)


def run_baseline(config: RunConfig, policy: str, scenario: Scenario | None = None) -> RunResult:
    """The training protocol with a fixed policy and no learning."""
    started = _now()
    env, out = _prepare(config, scenario)
    act = fixed_policy(policy, stream(config.seed, STREAM_EXPLORE))
    train_rng = stream(config.seed, STREAM_TRAIN_EPISODES)
    val_set = episode_set(env, config["validation"]["episodes"], config["validation"]["seed"])
    eval_set = episode_set(env, config["evaluation"]["episodes"], config["evaluation"]["seed"])
    rep = Reporter(out, config)
    rows = []
    try:
        for epoch in range(1, config["epochs"] + 1):
            records = []
            for i in range(config["episodes_per_epoch"]):
                state = run_episode(env, act, train_rng, on_step=rep.step_hook("train", epoch, i))
                records.append(rep.record(env, state, "train", epoch, i))
            rows.append(rep.epoch_row("train", epoch, records))
            rows.append(rep.epoch_row("validation", epoch, evaluate(env, act, val_set, rep, "validation", epoch)))
        eval_records = evaluate(env, act, eval_set, rep, "eval", 0)
        rows.append(rep.epoch_row("eval", 0, eval_records))
    finally:
        rep.close()
    _write_meta(out, config, started, {"kind": "baseline", "policy": policy})
    return RunResult(out, rows, eval_records, None, eval_set)


def run_eval(config: RunConfig, checkpoint: str | Path, scenario: Scenario | None = None) -> RunResult:
    """Greedy policy from a checkpoint on the held-out evaluation episodes."""
    started = _now()
    env, out = _prepare(config, scenario)
    net = load_checkpoint(checkpoint)
    if net.in_dim != observation_length(env.m, env.K) or net.out_dim != env.n_actions:
        raise ConfigurationError(
            f"checkpoint dims {net.dims} do not fit m={env.m}, K={env.K} (need input "
            f"{observation_length(env.m, env.K)}, output {env.n_actions})"
        )
    eval_set = episode_set(env, config["evaluation"]["episodes"], config["evaluation"]["seed"])
    rep = Reporter(out, config)
    try:
        records = evaluate(env, greedy_policy(net), eval_set, rep, "eval", 0)
        rows = [rep.epoch_row("eval", 0, records)]
    finally:
        rep.close()
    _write_meta(out, config, started, {"kind": "eval", "checkpoint": str(checkpoint)})
    return RunResult(out, rows, records, None, eval_set)
