"""Level scoring functions.

Every score is a pure function of a finished rollout.  A rollout can hold
several consecutive episodes on the same level; scores are computed per
episode (the trailing unfinished one included) and averaged.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigInvalid, MissingDistributions, MissingMaxReturn
from .ppo import Trajectory, compute_gae, td_errors

POLICY_ENTROPY = "policy_entropy"
MIN_MARGIN = "min_margin"
LEAST_CONFIDENCE = "least_confidence"
ONE_STEP_TD = "one_step_td"
GAE = "gae"
L1_VALUE_LOSS = "l1_value_loss"
PVL = "positive_value_loss"
MAX_MC = "max_mc"

SCORE_KINDS = (POLICY_ENTROPY, MIN_MARGIN, LEAST_CONFIDENCE, ONE_STEP_TD, GAE, L1_VALUE_LOSS,
               PVL, MAX_MC)
NEEDS_DISTS = (POLICY_ENTROPY, MIN_MARGIN, LEAST_CONFIDENCE)


def check_kind(kind: str) -> str:
    if kind not in SCORE_KINDS:
        raise ConfigInvalid(f"unknown score kind {kind!r}; choose from {SCORE_KINDS}",
                            "replay.score_kind")
    return kind


def episode_slices(dones) -> list:
    """Index ranges of consecutive episodes; the last may be unfinished."""
    ends = np.flatnonzero(np.asarray(dones, dtype=bool)) + 1
    starts = np.concatenate([[0], ends])
    stops = np.concatenate([ends, [len(dones)]])
    return [slice(int(a), int(b)) for a, b in zip(starts, stops) if b > a]


def _dist_score(kind, dists):
    if kind == POLICY_ENTROPY:
        p = np.clip(dists, 1e-300, None)
        return float(np.mean(-(dists * np.log(p)).sum(axis=1)))
    top = np.sort(dists, axis=1)[:, ::-1]
    if kind == MIN_MARGIN:
        return float(np.mean(top[:, 0] - top[:, 1]))
    return float(np.mean(1.0 - top[:, 0]))


def _adv_score(kind, adv, delta, values, max_return, dense):
    if kind == L1_VALUE_LOSS:
        return float(np.mean(np.abs(adv)))
    if kind == GAE:
        return float(np.mean(adv))
    if kind == PVL:
        return float(np.mean(np.maximum(adv, 0.0)))
    if kind == ONE_STEP_TD:
        return float(np.mean(np.abs(delta)))
    if kind == MAX_MC:
        if dense:
            return float(max_return - values[0])
        return float(np.mean(max_return - values))
    raise ConfigInvalid(f"unknown score kind {kind!r}", "replay.score_kind")


def score(traj: Trajectory, kind: str, gamma=0.995, lam=0.95, dists=None, max_return=None,
          dense=False) -> float:
    """Score a rollout.  ``dists`` defaults to ``traj.probs``."""
    check_kind(kind)
    if kind in NEEDS_DISTS:
        dists = traj.probs if dists is None else dists
        if dists is None:
            raise MissingDistributions(f"{kind} needs per-step action distributions")
        dists = np.asarray(dists, dtype=np.float64)
        return float(np.mean([_dist_score(kind, dists[s]) for s in episode_slices(traj.dones)]))
    if kind == MAX_MC and max_return is None:
        raise MissingMaxReturn("max_mc needs the level's highest observed return")
    adv, _ = compute_gae(traj.rewards, traj.values, traj.dones, traj.bootstrap_value, gamma,
                         lam, traj.next_values, traj.breaks)
    delta = td_errors(traj.rewards, traj.values, traj.dones, traj.bootstrap_value, gamma,
                      traj.next_values)
    values = np.asarray(traj.values, dtype=np.float64)
    return float(np.mean([_adv_score(kind, adv[s], delta[s], values[s], max_return, dense)
                          for s in episode_slices(traj.dones)]))


def negative_value_loss(traj: Trajectory, gamma=0.995, lam=0.95) -> float:
    """Companion of PVL: mean clipped-negative advantage (PVL + this = L1 value loss)."""
    adv, _ = compute_gae(traj.rewards, traj.values, traj.dones, traj.bootstrap_value, gamma,
                         lam, traj.next_values, traj.breaks)
    return float(np.mean([np.mean(np.maximum(-adv[s], 0.0))
                          for s in episode_slices(traj.dones)]))
