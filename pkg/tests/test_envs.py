import itertools
from collections import deque

import numpy as np
import pytest

from deskued.envs import make_env
from deskued.envs.edits import (ADD_WALL, MOVE_GOAL, REMOVE_WALL, TOGGLE_ICE, EditOp,
                                apply_edit, apply_edits, mutate)
from deskued.envs.fruit import EAT_APPLE, EAT_BANANA, KICK, MOVE, FruitChoiceEnv
from deskued.envs.generators import (DomainConfig, multiroom_level, perfect_maze,
                                     sample_dr_level, sample_empty_level)
from deskued.envs.level import (APPLE, BANANA, FRUIT_CHOICE, ICY_MAZE, Level, from_ascii,
                                from_json, make_grid_level, to_ascii, to_json, validate_level)
from deskued.envs.maze import FORWARD, TURN_LEFT, TURN_RIGHT, MazeEnv, shortest_path_length
from deskued.errors import ConfigInvalid, EpisodeDone, InvalidEdit, InvalidLevel


def fruit_level(rooms=0, fruit=APPLE, kicks=None):
    kicks = tuple(kicks if kicks is not None else [1] * rooms)
    return Level(FRUIT_CHOICE, extras={"room_count": rooms, "correct_fruit": fruit,
                                       "door_kick_counts": kicks})


# levels ------------------------------------------------------------------------------

def test_json_round_trip_is_exact(rng):
    cfgs = [DomainConfig(kind=k) for k in ("maze", ICY_MAZE, FRUIT_CHOICE)]
    for cfg in cfgs:
        for _ in range(20):
            lv = sample_dr_level(cfg.kind, cfg, rng)
            back = from_json(to_json(lv))
            assert back == lv
            assert to_json(back) == to_json(lv)
            assert back.level_id == lv.level_id


def test_ascii_round_trip(empty5):
    assert to_ascii(empty5).splitlines() == ["#####", "#A..#", "#...#", "#..G#", "#####"]


def test_invalid_levels_rejected(empty5):
    with pytest.raises(InvalidLevel):
        validate_level(empty5.evolve(goal=empty5.agent))
    bad_border = empty5.evolve(cells="." + empty5.cells[1:])
    with pytest.raises(InvalidLevel):
        validate_level(bad_border)
    with pytest.raises(InvalidLevel):
        MazeEnv().reset(empty5.evolve(goal=(0, 0)))
    with pytest.raises(InvalidLevel):
        validate_level(fruit_level(rooms=9, kicks=[1] * 9))


# maze dynamics -----------------------------------------------------------------------

def test_initial_view_of_empty_room(empty5):
    env = MazeEnv()
    obs = env.reset(empty5, 0)
    # facing east from (1,1): the cells ahead in the interior are empty
    assert obs.view.shape == (5, 5)
    assert obs.view[4, 2] != 1  # agent's own cell is open
    assert env.obs_dim() == 5 * 5 * 3 + 4


def test_goal_reward_formula():
    level = from_ascii(["#" * 29, "#A" + "." * 25 + "G#", "#" * 29])
    env = MazeEnv()
    env.reset(level)
    for t in range(26):
        res = env.step(FORWARD)
        if t < 25:
            assert res.reward == 0.0 and not res.done
    assert res.done and res.info["reached_goal"]
    assert res.reward == pytest.approx(1 - 0.9 * 26 / 250)
    env.reset(level)
    for _ in range(25):
        env.step(FORWARD)
    env.step(TURN_LEFT)
    env.step(TURN_RIGHT)
    # 27 steps so far, goal is one cell further: reward for T = 28
    assert env.step(FORWARD).reward == pytest.approx(1 - 0.9 * 28 / 250)


def test_goal_at_25_steps_rewards_0_91():
    level = from_ascii(["#" * 28, "#A" + "." * 24 + "G#", "#" * 28])
    env = MazeEnv()
    env.reset(level)
    rewards = [env.step(FORWARD).reward for _ in range(25)]
    assert rewards[-1] == pytest.approx(0.91)
    assert sum(rewards[:-1]) == 0.0


def test_timeout_and_episode_done(empty5):
    env = MazeEnv(t_max=7)
    env.reset(empty5)
    for _ in range(6):
        assert not env.step(TURN_LEFT).done
    res = env.step(TURN_LEFT)
    assert res.done and res.reward == 0.0 and not res.info["reached_goal"]
    with pytest.raises(EpisodeDone):
        env.step(FORWARD)


def test_blocked_move_stays_and_costs_a_step(empty5):
    env = MazeEnv()
    env.reset(empty5.evolve(facing=3))  # facing north into the border
    env.step(FORWARD)
    assert env.state.pos == (1, 1) and env.state.t == 1


def test_ice_slides_one_extra_cell():
    rows = ["#######", "#A....#", "#.....#", "#....G#", "#######"]
    base = from_ascii(rows, env_kind=ICY_MAZE)
    ice = np.zeros((5, 7), dtype=bool)
    ice[1, 2] = True
    level = make_grid_level(base.walls, base.agent, base.goal, 0, 0, ICY_MAZE, ice=ice)
    env = MazeEnv()
    env.reset(level)
    env.step(FORWARD)
    assert env.state.pos == (3, 1)
    # ice against a wall: no slide
    ice2 = np.zeros((5, 7), dtype=bool)
    ice2[1, 5] = True
    lv2 = make_grid_level(base.walls, (4, 1), base.goal, 0, 0, ICY_MAZE, ice=ice2)
    env.reset(lv2)
    env.step(FORWARD)
    assert env.state.pos == (5, 1)


def test_observation_blind_to_ice(rng):
    cfg = DomainConfig(kind=ICY_MAZE)
    base = sample_dr_level(ICY_MAZE, cfg, rng)
    env_a, env_b = MazeEnv(), MazeEnv()
    other_ice = (rng.random(base.walls.shape) < 0.5) & ~base.walls
    alt = make_grid_level(base.walls, base.agent, base.goal, base.facing, base.seed, ICY_MAZE,
                          ice=other_ice)
    env_a.reset(base)
    env_b.reset(alt)
    for _ in range(30):
        # align positions, then compare views state by state
        env_b.state.pos, env_b.state.facing = env_a.state.pos, env_a.state.facing
        assert np.array_equal(env_a.encode(env_a.observe()), env_b.encode(env_b.observe()))
        res = env_a.step(int(rng.integers(3)))
        if res.done:
            break


def test_determinism_under_action_script(rng):
    cfg = DomainConfig()
    level = sample_dr_level("maze", cfg, rng)
    script = rng.integers(3, size=100)

    def trace():
        env = MazeEnv()
        out = [env.encode(env.reset(level, 7)).tobytes()]
        for a in script:
            r = env.step(a)
            out.append((env.encode(r.obs).tobytes(), r.reward, r.done))
            if r.done:
                break
        return out

    assert trace() == trace()


def test_maze_rewards_in_declared_range(rng):
    env = MazeEnv()
    cfg = DomainConfig(wall_budget=5)
    for _ in range(30):
        lv = sample_dr_level("maze", cfg, rng)
        env.reset(lv)
        while True:
            r = env.step(int(rng.integers(3)))
            assert r.reward == 0.0 or 0.1 < r.reward <= 1.0
            if r.done:
                break


# fruit choice ------------------------------------------------------------------------

def test_fruit_zero_rooms_first_eat_terminates():
    env = FruitChoiceEnv()
    obs = env.reset(fruit_level(0, BANANA))
    assert obs.fruit_visible
    res = env.step(EAT_BANANA)
    assert res.done and res.reward == 10.0
    env.reset(fruit_level(0, BANANA))
    res = env.step(EAT_APPLE)
    assert res.done and res.reward == 0.0
    env.reset(fruit_level(0, APPLE))
    assert env.step(EAT_APPLE).reward == 3.0


def test_fruit_doors_need_kicks():
    env = FruitChoiceEnv()
    env.reset(fruit_level(1, APPLE, kicks=[2]))
    env.step(MOVE)
    assert env.state.room == 0
    env.step(KICK)
    assert env.observe().door_open is False
    env.step(KICK)
    assert env.observe().door_open is True
    env.step(MOVE)
    assert env.state.room == 1 and env.observe().fruit_visible
    assert env.step(EAT_APPLE).reward == 3.0


def test_fruit_observation_hides_identity():
    env = FruitChoiceEnv()
    a = env.encode(env.reset(fruit_level(1, APPLE)))
    b = env.encode(env.reset(fruit_level(1, BANANA)))
    assert np.array_equal(a, b)


# generators --------------------------------------------------------------------------

def test_zero_wall_budget_gives_border_only(rng):
    cfg = DomainConfig(wall_budget=0)
    for _ in range(20):
        assert sample_dr_level("maze", cfg, rng).wall_count == 0


def test_dr_levels_satisfy_invariants(rng):
    cfg = DomainConfig(wall_budget=40)
    for _ in range(200):
        lv = sample_dr_level("maze", cfg, rng)
        validate_level(lv)
        assert lv.wall_count <= 40
        assert lv.agent != lv.goal


def test_fruit_q_one_always_apple(rng):
    cfg = DomainConfig(kind=FRUIT_CHOICE, q_apple=1.0)
    assert all(sample_dr_level(FRUIT_CHOICE, cfg, rng).extras["correct_fruit"] == APPLE
               for _ in range(1000))


def test_fruit_kick_counts_in_range(rng):
    cfg = DomainConfig(kind=FRUIT_CHOICE)
    for _ in range(200):
        lv = sample_dr_level(FRUIT_CHOICE, cfg, rng)
        kicks = lv.extras["door_kick_counts"]
        assert len(kicks) == lv.extras["room_count"] <= 8
        assert all(1 <= k <= 3 for k in kicks)


def test_icy_prior_mean_tile_rate():
    # Beta(1, 15) mean is 1/16; averaged over levels of identical size
    cfg = DomainConfig(kind=ICY_MAZE, wall_budget=0, width=5, height=5)
    rng = np.random.default_rng(0)
    rates = []
    for _ in range(100_000):
        q = rng.beta(cfg.ice_alpha, cfg.ice_beta)
        rates.append(np.mean(rng.random(9) < q))
    assert abs(np.mean(rates) - 1 / 16) < 0.005
    levels = [sample_dr_level(ICY_MAZE, cfg, rng) for _ in range(20_000)]
    tile = np.mean([lv.ice[~lv.walls].mean() for lv in levels])
    assert abs(tile - 1 / 16) < 0.005


def test_config_validation():
    with pytest.raises(ConfigInvalid) as exc:
        DomainConfig(kind="lava")
    assert exc.value.field == "env.kind"
    with pytest.raises(ConfigInvalid):
        DomainConfig(wall_budget=1000)


def test_empty_level_and_multiroom(rng):
    assert sample_empty_level("maze", DomainConfig(), rng).wall_count == 0
    for n in range(1, 5):
        lv = multiroom_level(n, rng)
        assert lv.extras["rooms"] == n
        assert shortest_path_length(lv) > 0
    with pytest.raises(ConfigInvalid):
        multiroom_level(5, rng)


def test_perfect_maze_is_connected(rng):
    lv = perfect_maze(15, 15, rng)
    assert shortest_path_length(lv) > 0
    with pytest.raises(ConfigInvalid):
        perfect_maze(14, 15, rng)


# shortest path -----------------------------------------------------------------------

def test_shortest_path_examples(empty5):
    assert shortest_path_length(empty5) == 4
    adjacent = empty5.evolve(goal=(2, 1))
    assert shortest_path_length(adjacent) == 1
    enclosed = from_ascii(["#######", "#A.#..#", "#..#G.#", "#..#..#", "#######"])
    assert shortest_path_length(enclosed) == 0


def _reachable_by_actions(level, t_max):
    """Exhaustive search over (pos, facing) with the real dynamics."""
    env = MazeEnv(t_max=t_max)
    env.reset(level)
    start = (env.state.pos, env.state.facing)
    seen = {start}
    queue = deque([(env.get_state(), 0)])
    while queue:
        state, depth = queue.popleft()
        if depth >= t_max:
            continue
        for a in (TURN_LEFT, TURN_RIGHT, FORWARD):
            env.set_state(state)
            res = env.step(a)
            if res.info["reached_goal"]:
                return True
            key = (env.state.pos, env.state.facing)
            if not res.done and key not in seen:
                seen.add(key)
                queue.append((env.get_state(), depth + 1))
    return False


def test_shortest_path_zero_iff_unreachable():
    # every 3x3 interior wall pattern with fixed agent and goal corners
    rng = np.random.default_rng(3)
    interior = [(x, y) for y in range(1, 4) for x in range(1, 4) if (x, y) not in ((1, 1), (3, 3))]
    for bits in itertools.product([0, 1], repeat=len(interior)):
        if rng.random() > 0.35:
            continue
        walls = np.ones((5, 5), dtype=bool)
        walls[1:4, 1:4] = False
        for b, (x, y) in zip(bits, interior):
            walls[y, x] = bool(b)
        lv = make_grid_level(walls, (1, 1), (3, 3))
        assert (shortest_path_length(lv) == 0) == (not _reachable_by_actions(lv, 250))


# edits -------------------------------------------------------------------------------

def test_add_wall_changes_one_cell(empty5, rng):
    out = apply_edit(empty5, EditOp(ADD_WALL, (2, 2)), rng)
    diff = out.walls != empty5.walls
    assert diff.sum() == 1 and out.walls[2, 2]
    assert out.agent == empty5.agent and out.goal == empty5.goal


def test_remove_wall_on_empty_is_noop(empty5, rng):
    assert apply_edit(empty5, EditOp(REMOVE_WALL, (2, 2)), rng) == empty5


def test_wall_on_goal_relocates_goal_uniformly(empty5):
    counts = {}
    rng = np.random.default_rng(0)
    for _ in range(3000):
        out = apply_edit(empty5, EditOp(ADD_WALL, (3, 3)), rng)
        assert out.walls[3, 3] and out.goal != (3, 3) and out.goal != out.agent
        assert not out.walls[out.goal[1], out.goal[0]]
        counts[out.goal] = counts.get(out.goal, 0) + 1
    # 9 interior cells minus the new wall and the agent
    assert len(counts) == 7
    freq = np.array(list(counts.values())) / 3000
    assert np.all(np.abs(freq - 1 / 7) < 0.03)


def test_relocation_happens_after_all_edits(empty5, rng):
    edits = [EditOp(ADD_WALL, (3, 3))] + [EditOp(ADD_WALL, c) for c in
                                           [(1, 2), (2, 2), (2, 1), (3, 1), (3, 2), (1, 3)]]
    out = apply_edits(empty5, edits, rng)
    assert out.goal == (2, 3)  # the only open cell left besides the agent


def test_move_goal_and_invalid_edits(empty5, rng):
    assert apply_edit(empty5, EditOp(MOVE_GOAL, (2, 3)), rng).goal == (2, 3)
    assert apply_edit(empty5, EditOp(MOVE_GOAL, (1, 1)), rng).goal == empty5.goal
    with pytest.raises(InvalidEdit):
        apply_edit(empty5, EditOp(ADD_WALL, (0, 2)), rng)
    with pytest.raises(InvalidEdit):
        apply_edit(empty5, EditOp(ADD_WALL, (9, 9)), rng)
    with pytest.raises(InvalidEdit):
        apply_edit(empty5, EditOp(TOGGLE_ICE, (2, 2)), rng)


def test_mutations_keep_invariants(rng):
    for kind in ("maze", ICY_MAZE, FRUIT_CHOICE):
        cfg = DomainConfig(kind=kind)
        lv = sample_dr_level(kind, cfg, rng)
        for _ in range(200):
            child = mutate(lv, 5, rng)
            validate_level(child)
            assert (child.width, child.height) == (lv.width, lv.height)
            assert child.level_id != lv.level_id
            lv = child


def test_make_env_dispatch():
    assert isinstance(make_env(DomainConfig(kind=FRUIT_CHOICE)), FruitChoiceEnv)
    env = make_env(DomainConfig(t_max=40))
    assert isinstance(env, MazeEnv) and env.t_max == 40
