"""Desk-scale unsupervised environment design.

Autocurricula (prioritised level replay and its robust variant, REPAIRED,
ACCEL, SAMPLR grounding) over small grid environments, plus a finite
dual-curriculum-game analyser.
"""

from . import buffer, curricula, envs, games, metrics, policy, ppo, samplr, scoring
from .errors import DeskUEDError

__version__ = "0.1.0"

__all__ = ["DeskUEDError", "buffer", "curricula", "envs", "games", "metrics", "policy", "ppo",
           "samplr", "scoring"]
