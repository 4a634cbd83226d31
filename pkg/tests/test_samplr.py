import numpy as np
import pytest
from scipy import stats

from deskued.envs import FORWARD, TURN_RIGHT, make_env
from deskued.envs.generators import DomainConfig, sample_dr_level
from deskued.envs.level import APPLE, empty_walls, make_grid_level
from deskued.errors import DoubleCount, StateSyncFailure
from deskued.policy import Arch, PolicyParams
from deskued.rollout import collect_rollout
from deskued.samplr import (NAIVE, NONE, SAMPLR, BeliefPosterior, fictitious_transition,
                            ground_level, resample_unvisited, training_rewards)

ICY = DomainConfig(kind="icy_maze", width=7, height=7)
FRUIT = DomainConfig(kind="fruit_choice", min_rooms=0, max_rooms=1)


def icy_level(ice_every=3):
    walls = empty_walls(7, 7)
    ice = np.zeros_like(walls)
    ice[1:-1, 1:-1].flat[::ice_every] = True
    return make_grid_level(walls, (1, 1), (5, 5), 0, 0, "icy_maze", ice, 0.3)


def test_posterior_counts():
    b = BeliefPosterior(1.0, 15.0)
    assert b.params == (1.0, 15.0)
    cells = [(i, 0) for i in range(10)]
    for i, c in enumerate(cells):
        b = b.observe(c, icy=i < 2)
    assert b.params == (3.0, 23.0)
    assert b.predictive_mean == pytest.approx(3 / 26)
    with pytest.raises(DoubleCount):
        b.observe((0, 0), True)


def test_from_state_matches_incremental():
    rng = np.random.default_rng(0)
    visited = rng.random((6, 6)) < 0.4
    ice = rng.random((6, 6)) < 0.3
    b = BeliefPosterior(2.0, 5.0)
    for y, x in zip(*np.nonzero(visited)):
        b = b.observe((x, y), bool(ice[y, x]))
    assert BeliefPosterior.from_state(2.0, 5.0, visited, ice).params == b.params


def test_resample_keeps_visited_tiles():
    env = make_env(ICY)
    env.reset(icy_level())
    for a in [FORWARD, FORWARD, TURN_RIGHT, FORWARD, FORWARD]:
        env.step(a)
    st = env.get_state()
    rng = np.random.default_rng(1)
    for _ in range(200):
        new, q = resample_unvisited(st, env._walls, BeliefPosterior(1.0, 1.0), rng)
        assert np.array_equal(new.ice[st.visited], st.ice[st.visited])
        assert not new.ice[env._walls].any() and 0 <= q <= 1
        assert new.pos == st.pos and new.t == st.t


def test_confident_posterior_ices_everything():
    env = make_env(ICY)
    env.reset(icy_level())
    st = env.get_state()
    rng = np.random.default_rng(2)
    open_unvisited = ~env._walls & ~st.visited
    hits = np.mean([resample_unvisited(st, env._walls, BeliefPosterior(1e6, 1.0), rng)[0]
                    .ice[open_unvisited].mean() for _ in range(10_000)])
    assert hits > 0.999


def test_resampled_counts_follow_beta_binomial():
    env = make_env(ICY)
    env.reset(icy_level())
    for a in [FORWARD, FORWARD, FORWARD]:
        env.step(a)
    st = env.get_state()
    belief = BeliefPosterior.from_state(1.0, 15.0, st.visited, st.ice)
    mask = ~env._walls & ~st.visited
    m = int(mask.sum())
    rng = np.random.default_rng(3)
    n = 4000
    counts = np.array([resample_unvisited(st, env._walls, belief, rng)[0].ice[mask].sum()
                       for _ in range(n)])
    a, b = belief.params
    pmf = stats.betabinom(m, a, b).pmf(np.arange(m + 1))
    # pool the tail so every expected count is at least 5
    cut = int(np.flatnonzero(pmf * n >= 5).max())
    obs = np.append(np.bincount(counts, minlength=m + 1)[:cut], (counts >= cut).sum())
    exp = np.append(pmf[:cut], pmf[cut:].sum()) * n
    assert stats.chisquare(obs, exp).pvalue > 0.01


def test_fully_visited_transition_is_real_transition():
    env, fict, real = make_env(ICY), make_env(ICY), make_env(ICY)
    level = icy_level()
    for e in (env, fict, real):
        e.reset(level)
    env.state.visited[:] = True
    real.set_state(env.get_state())
    rng = np.random.default_rng(4)
    for a in [FORWARD, FORWARD, TURN_RIGHT, FORWARD]:
        res_f, _, _ = fictitious_transition(env, fict, a, rng, ICY)
        res_r = real.step(a)
        env.set_state(real.get_state())
        assert res_f.reward == res_r.reward and res_f.done == res_r.done
        assert np.array_equal(fict.state.ice, real.state.ice)
        assert fict.state.pos == real.state.pos


def test_state_sync_failure():
    env, fict = make_env(ICY), make_env(ICY)
    env.reset(icy_level())
    fict.reset(icy_level(ice_every=2))
    with pytest.raises(StateSyncFailure):
        fictitious_transition(env, fict, FORWARD, np.random.default_rng(0), ICY)


def test_naive_grounding_uses_prior():
    rng = np.random.default_rng(5)
    lv = sample_dr_level("fruit_choice", FRUIT, rng)
    apple = np.mean([ground_level(lv, FRUIT, rng).extras["correct_fruit"] == APPLE
                     for _ in range(4000)])
    assert abs(apple - 0.7) < 0.03
    rates = [ground_level(icy_level(), ICY, rng).extras["ice_rate"] for _ in range(4000)]
    assert abs(np.mean(rates) - 1 / 16) < 0.005


def test_naive_grounding_redraws_every_episode():
    rng = np.random.default_rng(10)
    env = make_env(FRUIT)
    level = sample_dr_level("fruit_choice", FRUIT, rng)
    tr = collect_rollout(env, level, fruit_policy(), 2000, rng,
                         reground=lambda lv: ground_level(lv, FRUIT, rng))
    correct = [c == APPLE for _, c in tr.info["eats"]]
    assert len(correct) > 200
    assert abs(np.mean(correct) - 0.7) < 0.1
    # without regrounding every episode shares the level's fruit
    tr = collect_rollout(env, level, fruit_policy(), 500, rng)
    assert len({c for _, c in tr.info["eats"]}) == 1


def fruit_policy():
    arch = Arch(make_env(FRUIT).obs_dim() * 4, (8,), 4)
    return PolicyParams(arch, np.zeros(arch.n_params))


def apple_levels(rng, n=20):
    out = []
    for _ in range(n):
        lv = sample_dr_level("fruit_choice", FRUIT, rng)
        extras = dict(lv.extras, correct_fruit=APPLE)
        out.append(lv.evolve(extras=extras))
    return out


def test_fruit_grounded_streams_agree():
    rng = np.random.default_rng(6)
    levels = apple_levels(rng)
    env, fict = make_env(FRUIT), make_env(FRUIT)
    params = fruit_policy()
    # independent streams: a shared seed would make samplr and naive draw identically
    s, v, u = (training_rewards(mode, env, fict, levels, params, 1000,
                                np.random.default_rng(seed), FRUIT)
               for seed, mode in ((7, SAMPLR), (8, NAIVE), (9, NONE)))
    assert stats.ks_2samp(s, v, method="asymp").pvalue > 0.01
    # the curated apple-only levels never pay the banana reward
    assert not np.any(u == FRUIT.r_banana) and np.any(s == FRUIT.r_banana)
