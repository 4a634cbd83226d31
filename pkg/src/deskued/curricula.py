"""Curriculum loops: domain randomisation, level replay (plain and robust), learned
adversarial teachers, REPAIRED, ACCEL and SAMPLR-grounded replay.

One call to :func:`run_iteration` performs one curriculum step and returns a
flat metrics row.  Everything random draws from named per-component streams
derived from the master seed, so a run is a pure function of its config.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .buffer import LevelBuffer, ReplayConfig, replay_decision
from .envs import make_env
from .envs.edits import mutate
from .envs.generators import (DomainConfig, multiroom_level, sample_dr_level,
                              sample_empty_level)
from .envs.level import APPLE, BANANA, FRUIT_CHOICE, ICY_MAZE, Level
from .errors import ConfigInvalid
from .generator import LevelGenerator
from .metrics import complexity_summary, level_stats, lzw_complexity
from .policy import Arch, PolicyParams, init_params
from .ppo import Optimizer, PPOConfig, Trajectory, make_batch, ppo_update
from .rollout import collect_rollout, max_return, mean_return, run_episode
from .samplr import NAIVE, NONE, SAMPLR, collect_fictitious_rollout, ground_level
from .scoring import MAX_MC, score

DR, PLR, ROBUST_PLR, MINIMAX, PAIRED, REPAIRED, ACCEL, SAMPLR_KIND = (
    "dr", "plr", "robust_plr", "minimax", "paired", "repaired", "accel", "samplr")
CURRICULUM_KINDS = (DR, PLR, ROBUST_PLR, MINIMAX, PAIRED, REPAIRED, ACCEL, SAMPLR_KIND)
GENERATOR_KINDS = (MINIMAX, PAIRED, REPAIRED)
LEVEL_SOURCES = ("dr", "empty", "multiroom")

CORE_COLUMNS = ("iteration", "d", "level_id", "score", "student_return", "buffer_size",
                "mean_buffer_score", "mean_shortest_path", "mean_block_count",
                "solved_path_length", "lzw_action_complexity", "student_updates")


@dataclass
class CurriculumConfig:
    kind: str = ROBUST_PLR
    levels_per_iteration: int = 1
    level_source: str = "dr"            # new levels: "dr", "empty" rooms or "multiroom" chains
    train_set_size: int = 0             # > 0: fixed finite training set drawn from level_source
    edits: int = 5
    edit_criterion: str = "hard"        # "hard": top (score - return) replay level; "batch": all
    fill_ratio: float = 0.5             # ACCEL initial buffer fill, fraction of capacity
    generator_budget: int | None = None
    generator_entropy_coef: float = 0.0
    grounding: str = SAMPLR             # SAMPLR kind: "samplr", "naive" or "none"
    act_on: str = "fictitious"
    eval_steps: int | None = None       # stop-gradient rollout length (default: rollout_length)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in CURRICULUM_KINDS:
            raise ConfigInvalid(f"unknown curriculum {self.kind!r}; choose from {CURRICULUM_KINDS}",
                                "curriculum.kind")
        if self.levels_per_iteration < 1:
            raise ConfigInvalid("must be >= 1", "curriculum.levels_per_iteration")
        if self.level_source not in LEVEL_SOURCES:
            raise ConfigInvalid(f"choose from {LEVEL_SOURCES}", "curriculum.level_source")
        if self.edit_criterion not in ("hard", "batch"):
            raise ConfigInvalid("must be hard or batch", "curriculum.edit_criterion")
        if self.edits < 1:
            raise ConfigInvalid("must be >= 1", "curriculum.edits")
        if not 0.0 <= self.fill_ratio <= 1.0:
            raise ConfigInvalid("must be in [0, 1]", "curriculum.fill_ratio")
        if self.grounding not in (SAMPLR, NAIVE, NONE):
            raise ConfigInvalid("must be samplr, naive or none", "curriculum.grounding")
        if self.act_on not in ("fictitious", "real"):
            raise ConfigInvalid("must be fictitious or real", "curriculum.act_on")


@dataclass
class PolicyConfig:
    hidden_dims: tuple = (64, 64)
    frames: int = 4

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if self.frames < 1 or not self.hidden_dims:
            raise ConfigInvalid("frames >= 1 and at least one hidden layer", "policy")


@dataclass
class Student:
    params: PolicyParams
    opt: Optimizer
    updates: int = 0


def component_rng(master_seed: int, label: str):
    """Independent stream for one component, fixed by the master seed and its label."""
    return np.random.default_rng([int(master_seed), zlib.crc32(label.encode())])


@dataclass
class TrainerState:
    env_cfg: DomainConfig
    cur: CurriculumConfig
    ppo: PPOConfig
    replay: ReplayConfig
    policy: PolicyConfig
    master_seed: int
    env: object
    fict_env: object
    students: list
    buffers: list
    rngs: dict
    generator: LevelGenerator | None = None
    train_set: list = field(default_factory=list)
    seen: set = field(default_factory=set)
    level_log: dict = field(default_factory=dict)   # level_id -> parent id, None if generated
    c: int = 0                                      # episodes (rollouts) scored so far
    iteration: int = 0

    @property
    def student(self) -> Student:
        return self.students[0]

    @property
    def eval_steps(self) -> int:
        return self.cur.eval_steps or self.ppo.rollout_length


def make_trainer(env_cfg: DomainConfig, cur: CurriculumConfig, ppo: PPOConfig,
                 replay: ReplayConfig, policy: PolicyConfig, master_seed: int) -> TrainerState:
    if cur.kind in GENERATOR_KINDS and env_cfg.kind == FRUIT_CHOICE:
        raise ConfigInvalid("learned generators only design grid levels", "curriculum.kind")
    if cur.level_source == "multiroom" and env_cfg.kind != "maze":
        raise ConfigInvalid("multiroom levels are plain mazes", "curriculum.level_source")
    rngs = {k: component_rng(master_seed, k) for k in
            ("env", "policy-init", "replay-decision", "edits", "rollout", "ppo", "generator",
             "grounding")}
    env = make_env(env_cfg)
    fict_env = make_env(env_cfg)
    probe = _new_level_from_source(env_cfg, cur, component_rng(master_seed, "probe"))
    arch = Arch(env.obs_dim(probe) * policy.frames, policy.hidden_dims, env.n_actions)
    n_students = 2 if cur.kind in (PAIRED, REPAIRED) else 1
    students = [Student(init_params(arch, rngs["policy-init"]), Optimizer(arch.n_params, ppo))
                for _ in range(n_students)]
    buffers = [] if cur.kind in (DR, MINIMAX, PAIRED) else \
        [LevelBuffer(replay) for _ in range(n_students)]
    state = TrainerState(env_cfg, cur, ppo, replay, policy, master_seed, env, fict_env,
                         students, buffers, rngs)
    if cur.kind in GENERATOR_KINDS:
        gen_ppo = replace(ppo, entropy_coef=cur.generator_entropy_coef, minibatches=1,
                          normalize_advantages=False)
        budget = env_cfg.wall_budget if cur.generator_budget is None else cur.generator_budget
        state.generator = LevelGenerator(env_cfg, budget, gen_ppo, rngs["generator"],
                                         policy.hidden_dims)
    if cur.train_set_size:
        state.train_set = [_new_level_from_source(env_cfg, cur, rngs["env"])
                           for _ in range(cur.train_set_size)]
    if cur.kind == ACCEL:
        for _ in range(int(replay.capacity * cur.fill_ratio)):
            level = _new_level(state)
            state.buffers[0].update(level, 0.0, 0)
            state.level_log[level.level_id] = None
    return state


# level sources ----------------------------------------------------------------------

def _new_level_from_source(env_cfg, cur, rng) -> Level:
    if cur.level_source == "empty":
        return sample_empty_level(env_cfg.kind, env_cfg, rng)
    if cur.level_source == "multiroom":
        return multiroom_level(int(rng.integers(1, 5)), rng)
    return sample_dr_level(env_cfg.kind, env_cfg, rng)


def _new_level(state: TrainerState) -> Level:
    rng = state.rngs["env"]
    if state.train_set:
        unseen = [lv for lv in state.train_set if lv.key not in state.seen]
        pool = unseen or state.train_set
        return pool[rng.integers(len(pool))]
    return _new_level_from_source(state.env_cfg, state.cur, rng)


# rollouts, scoring and training --------------------------------------------------------

def _rollout(state, student: Student, level, steps=None, reground=None) -> Trajectory:
    return collect_rollout(state.env, level, student.params, steps or state.ppo.rollout_length,
                           state.rngs["rollout"], state.policy.frames, reground=reground)


def _score(state, traj: Trajectory, buffer: LevelBuffer | None, level, extra_returns=()):
    kind = state.replay.score_kind
    r_max = None
    if kind == MAX_MC:
        known = buffer.max_return(level) if buffer is not None else None
        candidates = [max_return(traj), *extra_returns] + ([known] if known is not None else [])
        r_max = max(candidates)
    return score(traj, kind, state.ppo.gamma, state.ppo.gae_lambda, max_return=r_max,
                 dense=state.replay.dense_max_mc)


def _train(state, student: Student, trajs) -> dict:
    batch = make_batch(trajs, state.ppo)
    student.params, stats = ppo_update(student.params, batch, state.ppo, state.rngs["ppo"],
                                       student.opt)
    student.updates += 1
    return stats


def relative_regret(env, level, protagonist, antagonist, episodes: int, seed: int = 0,
                    frames: int = 4) -> float:
    """Mean antagonist return minus mean protagonist return on ``level``.

    Episode ``k`` of both players draws its actions from the same seed, so
    identical players give exactly zero.
    """
    diffs = []
    for k in range(episodes):
        ra, _, _ = run_episode(env, level, antagonist, np.random.default_rng([seed, k]), frames, k)
        rp, _, _ = run_episode(env, level, protagonist, np.random.default_rng([seed, k]), frames, k)
        diffs.append(ra - rp)
    return float(np.mean(diffs))


# metrics rows ------------------------------------------------------------------------

def columns(state: TrainerState) -> tuple:
    cols = list(CORE_COLUMNS)
    kind = state.cur.kind
    if kind in (PAIRED, REPAIRED):
        cols += ["antagonist_return", "regret"]
    if kind in GENERATOR_KINDS:
        cols += ["generator_reward", "generator_updates"]
    if kind == ACCEL:
        cols += ["edited_levels", "admitted_edits"]
    if state.env_cfg.kind == FRUIT_CHOICE:
        cols += ["level_apple", "train_apple_rate", "train_eat_events", "train_banana_choice"]
    if kind == SAMPLR_KIND and state.env_cfg.kind == ICY_MAZE:
        cols += ["posterior_alpha", "posterior_beta", "fictitious_ice_rate", "real_ice_rate"]
    if state.cur.level_source == "multiroom":
        cols += ["level_rooms", "replay_weighted_rooms"]
    return tuple(cols)


def _lzw(trajs) -> float:
    vals = [lzw_complexity(t.info["episode_actions"][0]) for t in trajs
            if t.info["episode_actions"] and t.info["episode_actions"][0]]
    return float(np.mean(vals)) if vals else 0.0


def _base_row(state, d, levels, trajs, scores) -> dict:
    buf = state.buffers[0] if state.buffers else None
    held = [e.level for e in buf.entries] if buf is not None and len(buf) else levels
    row = {"iteration": state.iteration, "d": int(d), "level_id": levels[0].level_id,
           "score": float(np.mean(scores)), "student_return": float(np.mean([mean_return(t)
                                                                             for t in trajs])),
           "buffer_size": len(buf) if buf is not None else 0,
           "mean_buffer_score": buf.mean_score() if buf is not None else 0.0,
           "lzw_action_complexity": _lzw(trajs), "student_updates": state.student.updates}
    row.update(complexity_summary(held))
    row["solved_path_length"] = _solved_path_length(levels, trajs)
    return row


def _solved_path_length(levels, trajs):
    """Mean shortest path over the played levels the student solved at least once."""
    paths = [level_stats(lv)[0] for lv, tr in zip(levels, trajs) if any(tr.episode_solved)]
    return float(np.mean(paths)) if paths else ""


def _fruit_stats(levels, trained) -> dict:
    eats = [e for t in trained for e in t.info.get("eats", [])]
    return {"level_apple": float(np.mean([lv.extras["correct_fruit"] == APPLE for lv in levels])),
            "train_apple_rate": float(np.mean([c == APPLE for _, c in eats])) if eats else "",
            "train_eat_events": len(eats),
            "train_banana_choice": float(np.mean([a == BANANA for a, _ in eats])) if eats else ""}


def _multiroom_stats(state, levels) -> dict:
    buf = state.buffers[0] if state.buffers else None
    out = {"level_rooms": float(np.mean([lv.extras.get("rooms", 0) for lv in levels]))}
    if buf is not None and len(buf):
        p = buf.replay_distribution(state.c)
        rooms = np.array([e.level.extras.get("rooms", 0) for e in buf.entries], dtype=float)
        out["replay_weighted_rooms"] = float(p @ rooms)
    else:
        out["replay_weighted_rooms"] = ""
    return out


def _finish(state, row, levels, trained) -> dict:
    if state.env_cfg.kind == FRUIT_CHOICE:
        row.update(_fruit_stats(levels, trained))
    if state.cur.level_source == "multiroom":
        row.update(_multiroom_stats(state, levels))
    cols = columns(state)
    state.iteration += 1
    return {k: row.get(k, "") for k in cols}


# iterations -------------------------------------------------------------------------

def run_iteration_plr(state: TrainerState) -> dict:
    """DR, PLR or robust PLR: decide replay, roll out, maybe train, score, buffer."""
    kind = state.cur.kind
    n = state.cur.levels_per_iteration
    buf = state.buffers[0] if state.buffers else None
    d = False
    if buf is not None:
        d = replay_decision(buf, len(state.seen), len(state.train_set) or None, state.replay,
                            state.rngs["replay-decision"])
    levels = [buf.sample(state.c, state.rngs["replay-decision"]) if d else _new_level(state)
              for _ in range(n)]
    trajs = [_rollout(state, state.student, lv) for lv in levels]
    train = kind in (DR, PLR) or d
    if train:
        _train(state, state.student, trajs)
    scores = []
    for lv, tr in zip(levels, trajs):
        s = _score(state, tr, buf, lv)
        scores.append(s)
        if buf is not None:
            buf.update(lv, s, state.c, max_return(tr))
        state.seen.add(lv.key)
        state.c += 1
    row = _base_row(state, d, levels, trajs, scores)
    return _finish(state, row, levels, trajs if train else [])


def run_iteration_generator(state: TrainerState) -> dict:
    """Minimax (reward = -return) or PAIRED (reward = antagonist - protagonist return)."""
    gen = state.generator
    ep = gen.design(state.rngs["generator"])
    level = ep.level
    tp = _rollout(state, state.students[0], level)
    trajs = [tp]
    row_extra = {}
    if state.cur.kind == PAIRED:
        ta = _rollout(state, state.students[1], level)
        reward = mean_return(ta) - mean_return(tp)
        _train(state, state.students[1], [ta])
        row_extra = {"antagonist_return": mean_return(ta), "regret": reward}
    else:
        reward = -mean_return(tp)
    _train(state, state.students[0], [tp])
    gen.update(ep, reward, state.rngs["generator"])
    s = _score(state, tp, None, level)
    state.c += 1
    row = _base_row(state, 0, [level], trajs, [s])
    row.update(row_extra, generator_reward=reward, generator_updates=gen.updates)
    return _finish(state, row, [level], trajs)


def run_iteration_repaired(state: TrainerState) -> dict:
    """Generator episodes are evaluated without gradients; replay trains each student."""
    bp, ba = state.buffers
    sp, sa = state.students
    d = False
    if len(bp) and len(ba):
        d = replay_decision(bp, len(state.seen), None, state.replay, state.rngs["replay-decision"])
    gen = state.generator
    if not d:
        ep = gen.design(state.rngs["generator"])
        lp = la = ep.level
        tp = _rollout(state, sp, lp, state.eval_steps)
        ta = _rollout(state, sa, la, state.eval_steps)
        regret = mean_return(ta) - mean_return(tp)
        gen.update(ep, regret, state.rngs["generator"])
        reward = regret
    else:
        lp = bp.sample(state.c, state.rngs["replay-decision"])
        la = ba.sample(state.c, state.rngs["replay-decision"])
        tp = _rollout(state, sp, lp)
        ta = _rollout(state, sa, la)
        _train(state, sp, [tp])
        _train(state, sa, [ta])
        regret = mean_return(ta) - mean_return(tp)
        reward = ""
    s_p = _score(state, tp, bp, lp, extra_returns=(max_return(ta),) if not d else ())
    s_a = _score(state, ta, ba, la, extra_returns=(max_return(tp),) if not d else ())
    bp.update(lp, s_p, state.c, max_return(tp))
    ba.update(la, s_a, state.c, max_return(ta))
    state.seen.add(lp.key)
    state.c += 1
    row = _base_row(state, d, [lp], [tp], [s_p])
    row.update(antagonist_return=mean_return(ta), regret=regret, generator_reward=reward,
               generator_updates=gen.updates)
    return _finish(state, row, [lp], [tp] if d else [])


def run_iteration_accel(state: TrainerState) -> dict:
    """Replay-and-edit, or evaluate a fresh generator level without gradients."""
    buf = state.buffers[0]
    n = state.cur.levels_per_iteration
    d = replay_decision(buf, len(state.seen), None, state.replay, state.rngs["replay-decision"])
    edited = admitted = 0
    if not d:
        levels = [_new_level(state) for _ in range(n)]
        trajs = [_rollout(state, state.student, lv, state.eval_steps) for lv in levels]
        scores = [_score(state, tr, buf, lv) for lv, tr in zip(levels, trajs)]
        for lv, tr, s in zip(levels, trajs, scores):
            buf.admit(lv, s, state.c, max_return(tr))
            state.level_log.setdefault(lv.level_id, None)
            state.seen.add(lv.key)
            state.c += 1
    else:
        levels = [buf.sample(state.c, state.rngs["replay-decision"]) for _ in range(n)]
        trajs = [_rollout(state, state.student, lv) for lv in levels]
        _train(state, state.student, trajs)
        scores = [_score(state, tr, buf, lv) for lv, tr in zip(levels, trajs)]
        for lv, tr, s in zip(levels, trajs, scores):
            buf.update(lv, s, state.c, max_return(tr))
            state.c += 1
        if state.cur.edit_criterion == "hard":
            gaps = [s - mean_return(tr) for s, tr in zip(scores, trajs)]
            parents = [levels[int(np.argmax(gaps))]]
        else:
            parents = levels
        for parent in parents:
            child = mutate(parent, state.cur.edits, state.rngs["edits"])
            state.level_log.setdefault(child.level_id, parent.level_id)
            tr = _rollout(state, state.student, child, state.eval_steps)
            s = _score(state, tr, buf, child)
            edited += 1
            admitted += buf.admit(child, s, state.c, max_return(tr)) in ("inserted", "replaced",
                                                                         "updated")
            state.c += 1
    row = _base_row(state, d, levels, trajs, scores)
    row.update(edited_levels=edited, admitted_edits=admitted)
    return _finish(state, row, levels, trajs if d else [])


def run_iteration_samplr(state: TrainerState) -> dict:
    """Robust PLR whose replay updates use grounded transitions.

    ``grounding="samplr"`` trains on fictitious transitions resampled from
    the true posterior; ``"naive"`` redraws each level's aleatoric
    parameters from the prior at every episode reset; ``"none"`` is plain
    robust PLR.
    """
    buf = state.buffers[0]
    mode = state.cur.grounding
    n = state.cur.levels_per_iteration
    d = replay_decision(buf, len(state.seen), len(state.train_set) or None, state.replay,
                        state.rngs["replay-decision"])
    levels = [buf.sample(state.c, state.rngs["replay-decision"]) if d else _new_level(state)
              for _ in range(n)]
    trajs = []
    for lv in levels:
        if mode == NAIVE:
            # one draw per rollout would make a whole batch share the aleatoric outcome
            tr = _rollout(state, state.student, lv, None if d else state.eval_steps,
                          lambda x: ground_level(x, state.env_cfg, state.rngs["grounding"]))
        elif mode == SAMPLR and d:
            tr = collect_fictitious_rollout(state.env, state.fict_env, lv, state.student.params,
                                            state.ppo.rollout_length, state.rngs["rollout"],
                                            state.env_cfg, state.policy.frames, state.cur.act_on)
        else:
            tr = _rollout(state, state.student, lv, None if d else state.eval_steps)
        trajs.append(tr)
    if d:
        _train(state, state.student, trajs)
    scores = []
    for lv, tr in zip(levels, trajs):
        s = _score(state, tr, buf, lv)
        scores.append(s)
        buf.update(lv, s, state.c, max_return(tr))
        state.seen.add(lv.key)
        state.c += 1
    row = _base_row(state, d, levels, trajs, scores)
    if state.env_cfg.kind == ICY_MAZE:
        info = trajs[0].info
        row.update(posterior_alpha=info.get("posterior_alpha", ""),
                   posterior_beta=info.get("posterior_beta", ""),
                   fictitious_ice_rate=info.get("fictitious_ice_rate", ""),
                   real_ice_rate=float(levels[0].ice[~levels[0].walls].mean()))
    return _finish(state, row, levels, trajs if d else [])


ITERATIONS = {DR: run_iteration_plr, PLR: run_iteration_plr, ROBUST_PLR: run_iteration_plr,
              MINIMAX: run_iteration_generator, PAIRED: run_iteration_generator,
              REPAIRED: run_iteration_repaired, ACCEL: run_iteration_accel,
              SAMPLR_KIND: run_iteration_samplr}


def run_iteration(state: TrainerState) -> dict:
    return ITERATIONS[state.cur.kind](state)


def minimax_teacher_iteration(state: TrainerState) -> dict:
    return run_iteration_generator(state)
