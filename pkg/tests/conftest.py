import numpy as np
import pytest

from deskued.envs.level import from_ascii


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def empty5():
    """5x5 room, agent (1,1) facing east, goal (3,3)."""
    return from_ascii(["#####",
                       "#A..#",
                       "#...#",
                       "#..G#",
                       "#####"], facing=0)
