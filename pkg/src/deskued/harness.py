"""Experiment plumbing: JSON configs, the training loop, metrics files, checkpoints."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import pickle
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .buffer import ReplayConfig
from .curricula import (CurriculumConfig, PolicyConfig, TrainerState, columns, component_rng,
                        make_trainer, run_iteration)
from .envs import make_env
from .envs.generators import DomainConfig, sample_dr_level
from .envs.level import MAZE, level_to_dict
from .errors import ConfigInvalid, IoError
from .metrics import evaluate, load_suite, report_csv
from .policy import save_params
from .ppo import PPOConfig
from .rollout import policy_actor

SCHEMA_VERSION = 1
SECTIONS = {"env": DomainConfig, "curriculum": CurriculumConfig, "ppo": PPOConfig,
            "replay": ReplayConfig, "policy": PolicyConfig}


@dataclass
class ExperimentConfig:
    env: DomainConfig = field(default_factory=DomainConfig)
    curriculum: CurriculumConfig = field(default_factory=CurriculumConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    total_student_updates: int = 100
    max_iterations: int | None = None     # optional hard stop on curriculum iterations
    eval_interval: int = 50               # iterations between checkpoints
    eval_suite: str | None = None         # suite path or built-in name; None picks a default
    eval_episodes: int = 1
    master_seed: int = 0
    output_dir: str = "runs/default"
    workers: int = 1                      # evaluation threads

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("total_student_updates", "eval_episodes", "master_seed"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 0:
                raise ConfigInvalid("must be a non-negative integer", name)
        if not isinstance(self.eval_interval, int) or self.eval_interval < 1:
            raise ConfigInvalid("must be a positive integer", "eval_interval")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ConfigInvalid("must be >= 0", "max_iterations")
        if self.eval_episodes < 1:
            raise ConfigInvalid("must be >= 1", "eval_episodes")
        if self.workers < 1:
            raise ConfigInvalid("must be >= 1", "workers")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["policy"]["hidden_dims"] = list(out["policy"]["hidden_dims"])
        out["schema_version"] = SCHEMA_VERSION
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid("config must be a JSON object", "<root>")
        data = dict(data)
        version = data.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigInvalid(f"unsupported schema version {version}", "schema_version")
        kwargs = {}
        top = {f.name for f in dataclasses.fields(cls)}
        for key, value in data.items():
            if key not in top:
                raise ConfigInvalid(f"unknown key; expected one of {sorted(top)}", key)
            if key in SECTIONS:
                kwargs[key] = _section(SECTIONS[key], value, key)
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigInvalid(str(exc), "<root>") from exc


def _section(klass, value, name):
    if not isinstance(value, dict):
        raise ConfigInvalid("must be a JSON object", name)
    known = {f.name for f in dataclasses.fields(klass)}
    for key in value:
        if key not in known:
            raise ConfigInvalid(f"unknown key; expected one of {sorted(known)}", f"{name}.{key}")
    try:
        return klass(**value)
    except TypeError as exc:
        raise ConfigInvalid(str(exc), name) from exc


def config_schema() -> dict:
    """Section -> {field: default} for every accepted config key."""
    out = {}
    for name, klass in SECTIONS.items():
        out[name] = {f.name: _default(f) for f in dataclasses.fields(klass)}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name not in SECTIONS:
            out[f.name] = _default(f)
    return out


def _default(f):
    if f.default is not dataclasses.MISSING:
        return list(f.default) if isinstance(f.default, tuple) else f.default
    return None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise IoError("config file not found", path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"invalid JSON: {exc}", str(path)) from exc
    return ExperimentConfig.from_dict(data)


# run directory ---------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class MetricsWriter:
    """Appends rows to ``metrics.csv``; wall-clock timings go to ``timing.csv``."""

    def __init__(self, run_dir: Path, cols: tuple):
        self.path = run_dir / "metrics.csv"
        self.timing = run_dir / "timing.csv"
        self.cols = cols
        if not self.path.exists():
            self.path.write_text(",".join(cols) + "\n")
            self.timing.write_text("iteration,wallclock_ms\n")
        (run_dir / "metrics.schema.json").write_text(
            json.dumps({"version": SCHEMA_VERSION, "columns": list(cols)}, indent=1) + "\n")

    def truncate(self, iteration: int) -> None:
        """Drop rows with ``iteration >= iteration`` (resume after a checkpoint)."""
        for path in (self.path, self.timing):
            if not path.exists():
                continue
            lines = path.read_text().splitlines(keepends=True)
            kept = lines[:1] + [ln for ln in lines[1:] if int(ln.split(",", 1)[0]) < iteration]
            path.write_text("".join(kept))

    def write(self, row: dict, wall_ms: float) -> None:
        with open(self.path, "a") as fh:
            fh.write(",".join(_fmt(row[c]) for c in self.cols) + "\n")
        with open(self.timing, "a") as fh:
            fh.write(f"{row['iteration']},{wall_ms:.3f}\n")


def read_metrics(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_checkpoint(run_dir: Path, state: TrainerState) -> Path:
    ck = run_dir / "checkpoints"
    sub = ck / f"iter_{state.iteration:06d}"
    sub.mkdir(parents=True, exist_ok=True)
    for i, st in enumerate(state.students):
        save_params(sub / f"student_{i}.policy", st.params, st.updates,
                    {"frames": state.policy.frames, "env": dataclasses.asdict(state.env_cfg)})
    tmp = ck / "state.pkl.tmp"
    with open(tmp, "wb") as fh:
        pickle.dump(state, fh)
    tmp.replace(ck / "state.pkl")
    (ck / "latest.json").write_text(json.dumps({"iteration": state.iteration,
                                                "dir": sub.name}) + "\n")
    return sub


def load_state(path) -> TrainerState:
    """Trainer state from a run dir, its ``checkpoints/`` dir or a ``state.pkl`` file."""
    path = Path(path)
    for cand in (path, path / "state.pkl", path / "checkpoints" / "state.pkl",
                 path.parent / "state.pkl"):
        if cand.is_file() and cand.name == "state.pkl":
            with open(cand, "rb") as fh:
                return pickle.load(fh)
    raise IoError("no trainer state found", path)


# evaluation ------------------------------------------------------------------------

def default_suite(env_cfg: DomainConfig, seed: int, n: int = 20) -> list:
    if env_cfg.kind == MAZE and (env_cfg.width, env_cfg.height) in ((9, 9), (15, 15)):
        return load_suite(f"mazes_{env_cfg.width}x{env_cfg.height}")
    rng = component_rng(seed, "eval-suite")
    return [(f"{env_cfg.kind}_dr_{i}", sample_dr_level(env_cfg.kind, env_cfg, rng))
            for i in range(n)]


def evaluate_params(params, env_cfg: DomainConfig, suite, episodes: int, seed: int,
                    frames: int, workers: int = 1) -> dict:
    """Greedy evaluation; each level has its own env and RNG so threads stay deterministic."""
    actor = policy_actor(params, greedy=True)

    def one(item):
        i, pair = item
        rng = np.random.default_rng([seed, i])
        return evaluate(actor, [pair], make_env(env_cfg), episodes, rng, frames)["levels"][0]

    items = list(enumerate(suite))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_level = list(pool.map(one, items))
    else:
        per_level = [one(it) for it in items]
    rates = [p["solved_rate"] for p in per_level]
    rets = [p["mean_return"] for p in per_level]
    return {"levels": per_level,
            "aggregate": {"mean_solved_rate": float(np.mean(rates)),
                          "median_solved_rate": float(np.median(rates)),
                          "mean_return": float(np.mean(rets)),
                          "median_return": float(np.median(rets))}}


# main loop -------------------------------------------------------------------------

def _done(cfg: ExperimentConfig, state: TrainerState) -> bool:
    if state.student.updates >= cfg.total_student_updates:
        return True
    return cfg.max_iterations is not None and state.iteration >= cfg.max_iterations


def run(cfg: ExperimentConfig, resume: bool = False, on_row=None) -> TrainerState:
    """Train until the update budget is spent; returns the final trainer state."""
    run_dir = Path(cfg.output_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=1,
                                                        sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write run directory ({exc.strerror})", run_dir) from exc
    if resume:
        state = load_state(run_dir)
    else:
        state = make_trainer(cfg.env, cfg.curriculum, cfg.ppo, cfg.replay, cfg.policy,
                             cfg.master_seed)
        for name in ("metrics.csv", "timing.csv"):
            (run_dir / name).unlink(missing_ok=True)
    writer = MetricsWriter(run_dir, columns(state))
    writer.truncate(state.iteration)
    if not resume:
        save_checkpoint(run_dir, state)
    while not _done(cfg, state):
        t0 = time.perf_counter()
        row = run_iteration(state)
        writer.write(row, 1000 * (time.perf_counter() - t0))
        if on_row is not None:
            on_row(row)
        if state.iteration % cfg.eval_interval == 0:
            save_checkpoint(run_dir, state)
    save_checkpoint(run_dir, state)
    suite = load_suite(cfg.eval_suite) if cfg.eval_suite else default_suite(cfg.env,
                                                                            cfg.master_seed)
    report = evaluate_params(state.student.params, cfg.env, suite, cfg.eval_episodes,
                             cfg.master_seed, cfg.policy.frames, cfg.workers)
    report["iteration"] = state.iteration
    report["student_updates"] = state.student.updates
    (run_dir / "final_eval.json").write_text(json.dumps(report, indent=1) + "\n")
    (run_dir / "final_eval.csv").write_text(report_csv(report))
    return state


def buffer_dump(state: TrainerState) -> list:
    """One record per buffer entry with its current replay probability."""
    out = []
    for b, buf in enumerate(state.buffers):
        p = buf.replay_distribution(state.c) if len(buf) else np.zeros(0)
        for e, q in zip(buf.entries, p):
            out.append({"buffer": b, "level_id": e.level.level_id,
                        "level": level_to_dict(e.level), "score": e.score,
                        "timestamp": e.timestamp, "max_return": e.max_return,
                        "visits": e.visit_count, "p_replay": float(q),
                        "parent": state.level_log.get(e.level.level_id)})
    return out


def dumps(obj) -> str:
    buf = io.StringIO()
    json.dump(obj, buf, indent=1, default=float)
    return buf.getvalue()
