"""PPO with generalised advantage estimation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigInvalid, NonFiniteLoss
from .policy import PolicyParams, backward, entropy, forward, log_softmax


@dataclass
class PPOConfig:
    gamma: float = 0.995
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 5
    minibatches: int = 1
    learning_rate: float = 1e-4
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    max_grad_norm: float = 0.5
    rollout_length: int = 256
    adam_eps: float = 1e-5
    optimizer: str = "adam"          # "adam" or "sgd"
    normalize_advantages: bool = True
    clip_value: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 < self.gamma <= 1:
            raise ConfigInvalid("gamma must be in (0, 1]", "ppo.gamma")
        if not 0 <= self.gae_lambda <= 1:
            raise ConfigInvalid("gae_lambda must be in [0, 1]", "ppo.gae_lambda")
        if self.clip_eps <= 0:
            raise ConfigInvalid("clip_eps must be positive", "ppo.clip_eps")
        for name in ("epochs", "minibatches", "rollout_length"):
            if int(getattr(self, name)) < 1:
                raise ConfigInvalid(f"{name} must be >= 1", f"ppo.{name}")
        if self.rollout_length % self.minibatches:
            raise ConfigInvalid("minibatches must divide rollout_length", "ppo.minibatches")
        if self.learning_rate < 0 or self.max_grad_norm <= 0:
            raise ConfigInvalid("learning_rate >= 0 and max_grad_norm > 0 required",
                                "ppo.learning_rate")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigInvalid("optimizer must be adam or sgd", "ppo.optimizer")


@dataclass
class Trajectory:
    """One rollout on one level (possibly several consecutive episodes).

    ``dones[t]`` marks that step ``t`` ended an episode.  ``next_values`` is
    only set when the successor values are not simply the next row of
    ``values`` (fictitious transitions); ``breaks`` then marks where the
    advantage recursion must not carry over.
    """

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    bootstrap_value: float = 0.0
    probs: np.ndarray | None = None
    next_values: np.ndarray | None = None
    breaks: np.ndarray | None = None
    level_ref: str = ""
    episode_returns: list = field(default_factory=list)
    episode_solved: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rewards)


def td_errors(rewards, values, dones, bootstrap_value, gamma, next_values=None):
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if next_values is None:
        next_values = np.append(values[1:], bootstrap_value)
        next_values = np.where(dones, 0.0, next_values)
    return rewards + gamma * np.asarray(next_values, dtype=np.float64) - values


def compute_gae(rewards, values, dones, bootstrap_value, gamma, lam, next_values=None,
                breaks=None):
    """Backward-recursive GAE.  Returns ``(advantages, returns)``."""
    dones = np.asarray(dones, dtype=bool)
    delta = td_errors(rewards, values, dones, bootstrap_value, gamma, next_values)
    breaks = dones if breaks is None else np.asarray(breaks, dtype=bool)
    adv = np.zeros_like(delta)
    carry = 0.0
    for t in range(len(delta) - 1, -1, -1):
        if breaks[t]:
            carry = 0.0
        carry = delta[t] + gamma * lam * carry
        adv[t] = carry
    return adv, adv + np.asarray(values, dtype=np.float64)


def trajectory_gae(traj: Trajectory, gamma, lam):
    return compute_gae(traj.rewards, traj.values, traj.dones, traj.bootstrap_value, gamma, lam,
                       traj.next_values, traj.breaks)


def normalize(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    return (adv - adv.mean()) / max(std, 1e-8)


def clipped_surrogate(ratio, adv, eps):
    """Per-sample ``min(r A, clip(r, 1-eps, 1+eps) A)``."""
    return np.minimum(ratio * adv, np.clip(ratio, 1 - eps, 1 + eps) * adv)


def _head_loss(logits, values, mb, cfg: PPOConfig):
    n = len(mb["actions"])
    idx = np.arange(n)
    lp_all = log_softmax(logits)
    logp = lp_all[idx, mb["actions"]]
    ratio = np.exp(logp - mb["log_probs"])
    adv = mb["advantages"]
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1 - cfg.clip_eps, 1 + cfg.clip_eps) * adv
    surr = np.minimum(unclipped, clipped)
    ent = entropy(logits)
    err = values - mb["returns"]
    if cfg.clip_value:
        v_clip = mb["values"] + np.clip(values - mb["values"], -cfg.clip_eps, cfg.clip_eps)
        err_c = v_clip - mb["returns"]
        use_clip = err_c ** 2 > err ** 2
        vloss = 0.5 * np.where(use_clip, err_c ** 2, err ** 2)
        dv = np.where(use_clip & (np.abs(values - mb["values"]) < cfg.clip_eps), err_c,
                      np.where(use_clip, 0.0, err))
    else:
        vloss = 0.5 * err ** 2
        dv = err
    loss = (-surr.mean() + cfg.value_coef * vloss.mean() - cfg.entropy_coef * ent.mean())
    # d(-surr)/d logp: only where the unclipped branch is the active minimum
    active = unclipped <= clipped
    g_logp = np.where(active, -ratio * adv, 0.0) / n
    probs = np.exp(lp_all)
    onehot = np.zeros_like(logits)
    onehot[idx, mb["actions"]] = 1.0
    dlogits = g_logp[:, None] * (onehot - probs)
    dlogits += cfg.entropy_coef / n * probs * (lp_all + ent[:, None])
    dvalues = cfg.value_coef * dv / n
    stats = {"policy_loss": float(-surr.mean()), "value_loss": float(vloss.mean()),
             "entropy": float(ent.mean()),
             "clip_frac": float(np.mean(np.abs(ratio - 1) > cfg.clip_eps)),
             "approx_kl": float(np.mean(mb["log_probs"] - logp))}
    return float(loss), dlogits, dvalues, stats


def ppo_loss(params: PolicyParams, mb: dict, cfg: PPOConfig) -> float:
    out = forward(params, mb["obs"])
    loss = _head_loss(out.logits, out.value, mb, cfg)[0]
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"PPO loss evaluated to {loss}")
    return loss


def ppo_loss_and_grad(params: PolicyParams, mb: dict, cfg: PPOConfig):
    out = forward(params, mb["obs"])
    loss, dlogits, dvalues, stats = _head_loss(out.logits, out.value, mb, cfg)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"PPO loss evaluated to {loss}")
    return loss, backward(params, out, dlogits, dvalues), stats


class Optimizer:
    """Adam (or plain SGD) over a flat parameter vector."""

    def __init__(self, n_params: int, cfg: PPOConfig):
        self.kind = cfg.optimizer
        self.eps = cfg.adam_eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, theta, g, lr, beta1=0.9, beta2=0.999):
        if self.kind == "sgd":
            return theta - lr * g
        self.t += 1
        self.m = beta1 * self.m + (1 - beta1) * g
        self.v = beta2 * self.v + (1 - beta2) * g * g
        m_hat = self.m / (1 - beta1 ** self.t)
        v_hat = self.v / (1 - beta2 ** self.t)
        return theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_grad(g, max_norm):
    norm = float(np.sqrt(g @ g))
    if norm > max_norm:
        g = g * (max_norm / norm)
    return g, norm


def make_batch(trajs, cfg: PPOConfig) -> dict:
    """Stack trajectories into one batch with advantages computed once."""
    advs, rets = zip(*(trajectory_gae(t, cfg.gamma, cfg.gae_lambda) for t in trajs))
    adv = np.concatenate(advs)
    batch = {
        "obs": np.concatenate([t.obs for t in trajs]),
        "actions": np.concatenate([t.actions for t in trajs]).astype(int),
        "log_probs": np.concatenate([t.log_probs for t in trajs]),
        "values": np.concatenate([t.values for t in trajs]),
        "returns": np.concatenate(rets),
        "advantages": normalize(adv) if cfg.normalize_advantages else adv,
    }
    return batch


def ppo_update(params: PolicyParams, batch: dict, cfg: PPOConfig, rng, optimizer=None):
    """``epochs`` passes of shuffled minibatch steps.  Returns ``(params', stats)``.

    The optimizer (Adam moments) is updated in place when given.
    """
    opt = optimizer or Optimizer(params.arch.n_params, cfg)
    theta = params.theta.copy()
    n = len(batch["actions"])
    acc = {}
    steps = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for idx in np.array_split(perm, cfg.minibatches):
            mb = {k: v[idx] for k, v in batch.items()}
            cur = PolicyParams(params.arch, theta)
            loss, g, stats = ppo_loss_and_grad(cur, mb, cfg)
            g, norm = clip_grad(g, cfg.max_grad_norm)
            theta = opt.step(theta, g, cfg.learning_rate)
            stats["loss"] = loss
            stats["grad_norm"] = norm
            for k, v in stats.items():
                acc[k] = acc.get(k, 0.0) + v
            steps += 1
    return PolicyParams(params.arch, theta), {k: v / steps for k, v in acc.items()}


def config_dict(cfg: PPOConfig) -> dict:
    return asdict(cfg)


__all__ = ["Optimizer", "PPOConfig", "Trajectory", "clip_grad", "clipped_surrogate",
           "compute_gae", "make_batch", "normalize", "ppo_loss", "ppo_loss_and_grad",
           "ppo_update", "td_errors", "trajectory_gae"]
