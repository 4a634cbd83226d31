import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deskued.buffer import (GREEDY, PROPORTIONAL, RANK, LevelBuffer, ReplayConfig,
                            replay_decision, score_distribution, staleness_distribution)
from deskued.envs.level import empty_walls, make_grid_level
from deskued.errors import ConfigInvalid, EmptyBuffer


def level(i):
    return make_grid_level(empty_walls(5, 5), (1, 1), (3, 3), seed=i)


def buffer(**kw):
    return LevelBuffer(ReplayConfig(**kw))


def test_rank_example():
    p = score_distribution([0.3, 0.1, 0.2], 1.0, RANK)
    assert np.allclose(p, [6 / 11, 2 / 11, 3 / 11], atol=1e-12)


def test_proportional_and_temperature():
    p = score_distribution([1.0, 3.0], 1.0, PROPORTIONAL)
    assert np.allclose(p, [0.25, 0.75], atol=1e-6)
    p = score_distribution([1.0, 3.0], 0.5, PROPORTIONAL)
    assert np.allclose(p, [0.1, 0.9], atol=1e-6)


def test_greedy_first_max():
    assert score_distribution([0.2, 0.7, 0.7], 0.1, GREEDY).tolist() == [0, 1, 0]


def test_staleness_example():
    assert np.allclose(staleness_distribution([5, 3, 2], 5), [0.0, 0.4, 0.6])


def test_mixture():
    b = buffer(capacity=2, staleness_coef=0.5, prioritization=GREEDY)
    b.update(level(0), 1.0, 3)
    b.update(level(1), 0.0, 1)
    assert np.allclose(b.replay_distribution(3), [0.5, 0.5])


def test_insert_into_empty():
    b = buffer(capacity=2)
    assert b.update(level(0), 0.4, 0) == "inserted" and len(b) == 1
    assert b.update(level(0), 0.6, 1, ret=0.5) == "updated" and len(b) == 1
    e = b.get(level(0))
    assert e.score == 0.6 and e.timestamp == 1 and e.max_return == 0.5 and e.visit_count == 2


def test_reject_and_replace():
    b = buffer(capacity=1)
    b.update(level(0), 0.9, 0)
    assert b.update(level(1), 0.5, 1) == "rejected" and level(0) in b
    b2 = buffer(capacity=1)
    b2.update(level(0), 0.1, 0)
    assert b2.update(level(1), 0.5, 7) == "replaced"
    assert level(1) in b2 and level(0) not in b2 and b2.get(level(1)).timestamp == 7


def test_admit_threshold():
    b = buffer(capacity=3)
    assert b.admit(level(0), 0.0, 0) == "rejected"
    assert b.admit(level(0), 0.2, 0) == "inserted"


def test_empty_buffer_errors():
    with pytest.raises(EmptyBuffer):
        buffer().replay_distribution(0)
    with pytest.raises(EmptyBuffer):
        score_distribution([], 0.1)


def test_replay_decision_rates():
    rng = np.random.default_rng(0)
    b = buffer(replay_rate=0.5)
    assert not replay_decision(b, 10, None, b.cfg, rng)   # empty buffer never replays
    b.update(level(0), 1.0, 0)
    frac = np.mean([replay_decision(b, 0, None, b.cfg, rng) for _ in range(10_000)])
    assert 0.48 <= frac <= 0.52
    ann = ReplayConfig(anneal=True)
    assert not any(replay_decision(b, 0, 50, ann, rng) for _ in range(200))
    assert all(replay_decision(b, 50, 50, ann, rng) for _ in range(200))


def test_sample_follows_distribution():
    b = buffer(capacity=3, temperature=1.0, staleness_coef=0.0)
    for i, s in enumerate([0.3, 0.1, 0.2]):
        b.update(level(i), s, 0)
    rng = np.random.default_rng(1)
    draws = [b.sample(1, rng).seed for _ in range(20_000)]
    freq = np.bincount(draws, minlength=3) / len(draws)
    assert np.allclose(freq, [6 / 11, 2 / 11, 3 / 11], atol=0.015)


def test_config_validation():
    with pytest.raises(ConfigInvalid):
        ReplayConfig(capacity=0)
    with pytest.raises(ConfigInvalid):
        ReplayConfig(prioritization="uniform")
    with pytest.raises(ConfigInvalid):
        ReplayConfig(score_kind="nope")


ops = st.lists(st.tuples(st.integers(0, 30), st.floats(-1, 1, allow_nan=False)),
               min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(ops, st.integers(1, 8), st.sampled_from([RANK, PROPORTIONAL, GREEDY]),
       st.floats(0.05, 2.0), st.floats(0.0, 1.0))
def test_buffer_laws(seq, capacity, prio, temp, rho):
    b = buffer(capacity=capacity, prioritization=prio, temperature=temp, staleness_coef=rho)
    for c, (lvl, s) in enumerate(seq, start=1):
        before_full = b.full and level(lvl) not in b
        if before_full:
            i = b.min_support_index(c)
            victim, victim_score = b.entries[i].level, b.entries[i].score
            min_before = b.scores.min()
        outcome = b.update(level(lvl), s, c)
        assert len(b) <= capacity
        if before_full:
            assert (outcome == "replaced") == (s > victim_score)
            assert (victim in b) == (outcome == "rejected")
            if outcome == "replaced":
                assert b.scores.min() >= min_before
        p = b.replay_distribution(c + 1)
        assert abs(p.sum() - 1) < 1e-9 and np.all(p >= 0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-500, 500), min_size=1, max_size=20, unique=True),
       st.floats(0.05, 2.0))
def test_rank_invariant_under_monotone_maps(scores, temp):
    # grid-spaced scores so every map below stays strictly monotone in floating point
    s = np.array(scores) / 100.0
    p = score_distribution(s, temp, RANK)
    for f in (lambda x: 3 * x + 1, np.exp, np.arctan, lambda x: x ** 3):
        assert np.allclose(score_distribution(f(s), temp, RANK), p, atol=1e-12)
