import numpy as np
import pytest

from deskued.errors import ConfigInvalid
from deskued.policy import Arch, PolicyParams, forward, init_params, log_softmax, numerical_grad
from deskued.ppo import (Optimizer, PPOConfig, clip_grad, clipped_surrogate, compute_gae,
                         normalize, ppo_loss, ppo_loss_and_grad, ppo_update, td_errors)


def mc_advantages(rewards, values, dones, bootstrap, gamma):
    """Discounted return to the end of each episode (bootstrapped if cut) minus V."""
    out = np.zeros(len(rewards))
    for t in range(len(rewards)):
        g, disc = 0.0, 1.0
        for k in range(t, len(rewards)):
            g += disc * rewards[k]
            disc *= gamma
            if dones[k]:
                break
        else:
            g += disc * bootstrap
        out[t] = g - values[t]
    return out


def random_traj(rng, n=None):
    n = n or int(rng.integers(1, 65))
    return (rng.normal(size=n), rng.normal(size=n), rng.random(n) < 0.15,
            float(rng.normal()), float(rng.uniform(0.5, 1.0)))


def test_gae_worked_example():
    adv, ret = compute_gae([1.0, 0.0], [0.5, 0.5], [False, True], 0.0, 1.0, 1.0)
    assert np.allclose(td_errors([1.0, 0.0], [0.5, 0.5], [False, True], 0.0, 1.0), [1.0, -0.5])
    assert np.allclose(adv, [0.5, -0.5]) and np.allclose(ret, [1.0, 0.0])


def test_gae_limits_on_random_trajectories():
    rng = np.random.default_rng(0)
    for _ in range(300):
        r, v, d, b, g = random_traj(rng)
        a0, _ = compute_gae(r, v, d, b, g, 0.0)
        nxt = np.where(d, 0.0, np.append(v[1:], b))
        assert np.max(np.abs(a0 - (r + g * nxt - v))) < 1e-8
        a1, _ = compute_gae(r, v, d, b, g, 1.0)
        assert np.max(np.abs(a1 - mc_advantages(r, v, d, b, g))) < 1e-8


def test_gae_explicit_next_values_and_breaks():
    # explicit successors, break after step 0: the recursion restarts there
    adv, _ = compute_gae([1.0, 2.0], [0.0, 0.0], [False, False], 0.0, 1.0, 1.0,
                         next_values=[5.0, 0.0], breaks=[True, False])
    assert np.allclose(adv, [6.0, 2.0])


def test_clipped_surrogate_examples():
    assert clipped_surrogate(1.0, 2.0, 0.2) == pytest.approx(2.0)
    assert clipped_surrogate(2.0, 1.0, 0.2) == pytest.approx(1.2)
    assert clipped_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)


def test_normalize_moments():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a = normalize(rng.normal(3, 7, size=int(rng.integers(2, 300))))
        assert abs(a.mean()) < 1e-9 and abs(a.std() - 1) < 1e-6
    assert np.all(normalize(np.full(5, 2.0)) == 0)


def small_problem(rng, n=12, arch=Arch(6, (8, 8), 3)):
    params = PolicyParams(arch, rng.normal(scale=0.5, size=arch.n_params))
    obs = rng.normal(size=(n, 6))
    out = forward(params, obs)
    actions = rng.integers(3, size=n)
    logp = log_softmax(out.logits)[np.arange(n), actions]
    batch = {"obs": obs, "actions": actions,
             "log_probs": logp + rng.normal(scale=0.3, size=n),
             "values": out.value + rng.normal(scale=0.3, size=n),
             "returns": rng.normal(size=n), "advantages": rng.normal(size=n)}
    return params, batch


@pytest.mark.parametrize("clip_value", [False, True])
def test_ppo_gradient_matches_finite_differences(clip_value):
    rng = np.random.default_rng(2)
    cfg = PPOConfig(entropy_coef=0.01, clip_value=clip_value)
    for _ in range(5):
        params, batch = small_problem(rng)
        _, g, _ = ppo_loss_and_grad(params, batch, cfg)
        num = numerical_grad(lambda th: ppo_loss(PolicyParams(params.arch, th), batch, cfg),
                             params.theta)
        rel = np.abs(g - num) / np.maximum(np.maximum(np.abs(g), np.abs(num)), 1e-6)
        assert rel.max() < 1e-4


def test_zero_learning_rate_leaves_params_bitwise():
    rng = np.random.default_rng(3)
    params, batch = small_problem(rng)
    new, _ = ppo_update(params, batch, PPOConfig(learning_rate=0.0, rollout_length=12),
                        np.random.default_rng(0))
    assert new.theta.tobytes() == params.theta.tobytes()


def test_positive_advantage_raises_action_probability():
    rng = np.random.default_rng(4)
    arch = Arch(6, (8,), 3)
    params = init_params(arch, rng)
    obs = rng.normal(size=(1, 6))
    out = forward(params, obs)
    batch = {"obs": obs, "actions": np.array([2]),
             "log_probs": log_softmax(out.logits)[:, 2], "values": out.value,
             "returns": out.value.copy(), "advantages": np.array([1.0])}
    cfg = PPOConfig(learning_rate=1e-2, epochs=1, rollout_length=1,
                    normalize_advantages=False)
    new, _ = ppo_update(params, batch, cfg, np.random.default_rng(0))
    assert forward(new, obs).probs[0, 2] > out.probs[0, 2]


def test_grad_clipping_bounds_sgd_step():
    rng = np.random.default_rng(5)
    params, batch = small_problem(rng)
    batch["advantages"] *= 1e3
    cfg = PPOConfig(optimizer="sgd", learning_rate=0.1, epochs=1, rollout_length=12,
                    max_grad_norm=0.5)
    _, g, _ = ppo_loss_and_grad(params, batch, cfg)
    assert np.linalg.norm(g) > 0.5
    new, stats = ppo_update(params, batch, cfg, np.random.default_rng(0))
    assert np.linalg.norm(new.theta - params.theta) == pytest.approx(0.05, rel=1e-9)
    assert stats["grad_norm"] == pytest.approx(np.linalg.norm(g))


def test_clip_grad():
    g, n = clip_grad(np.array([3.0, 4.0]), 1.0)
    assert n == 5.0 and np.allclose(g, [0.6, 0.8])
    g, n = clip_grad(np.array([0.3, 0.4]), 1.0)
    assert np.allclose(g, [0.3, 0.4])


def test_adam_first_step_is_sign_times_lr():
    opt = Optimizer(3, PPOConfig(adam_eps=1e-12))
    out = opt.step(np.zeros(3), np.array([2.0, -0.5, 1e-3]), 0.1)
    assert np.allclose(out, [-0.1, 0.1, -0.1], atol=1e-8)


def test_update_reproducible_with_same_rng():
    rng = np.random.default_rng(6)
    params, batch = small_problem(rng, n=16)
    cfg = PPOConfig(minibatches=4, rollout_length=16, learning_rate=1e-3)
    a, _ = ppo_update(params, batch, cfg, np.random.default_rng(9))
    b, _ = ppo_update(params, batch, cfg, np.random.default_rng(9))
    assert a.theta.tobytes() == b.theta.tobytes()


@pytest.mark.parametrize("kw", [{"gamma": 0.0}, {"gae_lambda": 1.5}, {"clip_eps": 0.0},
                                {"epochs": 0}, {"minibatches": 3}, {"optimizer": "rmsprop"},
                                {"learning_rate": -1.0}])
def test_config_validation(kw):
    with pytest.raises(ConfigInvalid):
        PPOConfig(**kw)
