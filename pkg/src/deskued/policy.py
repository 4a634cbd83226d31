"""Feed-forward actor-critic with hand-written backprop.

Shared tanh encoder, then two linear heads: categorical logits and a scalar
value.  All weights live in one flat vector ``theta``; the per-layer arrays
are reshaped views into it, so optimizers only ever see a vector.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, NonFiniteLoss


@dataclass(frozen=True)
class Arch:
    input_dim: int
    hidden_dims: tuple = (64, 64)
    action_count: int = 3

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    @property
    def shapes(self) -> list:
        dims = (self.input_dim,) + self.hidden_dims
        out = []
        for i in range(len(self.hidden_dims)):
            out += [(f"W{i}", (dims[i], dims[i + 1])), (f"b{i}", (dims[i + 1],))]
        last = dims[-1]
        out += [("Wp", (last, self.action_count)), ("bp", (self.action_count,)),
                ("Wv", (last, 1)), ("bv", (1,))]
        return out

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.shapes)

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden_dims": list(self.hidden_dims),
                "action_count": self.action_count}

    @classmethod
    def from_dict(cls, d) -> "Arch":
        return cls(int(d["input_dim"]), tuple(d["hidden_dims"]), int(d["action_count"]))


@lru_cache(maxsize=64)
def _slices(arch: Arch) -> dict:
    out, pos = {}, 0
    for name, shape in arch.shapes:
        n = int(np.prod(shape))
        out[name] = (pos, pos + n, shape)
        pos += n
    return out


@dataclass
class PolicyParams:
    arch: Arch
    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.arch.n_params,):
            raise DimensionMismatch(
                f"theta has {self.theta.size} entries, arch needs {self.arch.n_params}")

    def layers(self, theta=None) -> dict:
        theta = self.theta if theta is None else theta
        return {k: theta[a:b].reshape(s) for k, (a, b, s) in _slices(self.arch).items()}

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.arch, self.theta.copy())

    def digest(self) -> str:
        return hashlib.sha1(self.theta.tobytes()).hexdigest()


def _orthogonal(shape, gain, rng):
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def init_params(arch: Arch, rng, policy_scale=0.01, value_scale=1.0) -> PolicyParams:
    """Orthogonal weights, zero biases; a tiny policy head keeps the start near uniform."""
    params = PolicyParams(arch, np.zeros(arch.n_params))
    views = params.layers()
    gains = {"Wp": policy_scale, "Wv": value_scale}
    for name, shape in arch.shapes:
        if name.startswith("W"):
            views[name][...] = _orthogonal(shape, gains.get(name, np.sqrt(2.0)), rng)
    return params


@dataclass
class ForwardOut:
    logits: np.ndarray
    value: np.ndarray
    cache: list = field(default_factory=list, repr=False)

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


def forward(params: PolicyParams, obs: np.ndarray) -> ForwardOut:
    """Logits and values for one observation (1-D) or a batch (2-D)."""
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != params.arch.input_dim:
        raise DimensionMismatch(f"observation has {x.shape[1]} features, "
                                f"network expects {params.arch.input_dim}")
    L = params.layers()
    acts = [x]
    h = x
    for i in range(len(params.arch.hidden_dims)):
        h = np.tanh(h @ L[f"W{i}"] + L[f"b{i}"])
        acts.append(h)
    logits = h @ L["Wp"] + L["bp"]
    value = (h @ L["Wv"] + L["bv"])[:, 0]
    if single:
        return ForwardOut(logits[0], value[0], acts)
    return ForwardOut(logits, value, acts)


def backward(params: PolicyParams, out: ForwardOut, dlogits, dvalue,
             detach_value_encoder=False) -> np.ndarray:
    """Gradient of a loss with respect to theta, given its gradients at the heads."""
    L = params.layers()
    grad = np.zeros_like(params.theta)
    G = params.layers(grad)
    dlogits = np.atleast_2d(dlogits)
    dvalue = np.atleast_1d(np.asarray(dvalue, dtype=np.float64))[:, None]
    acts = out.cache
    h = acts[-1]
    G["Wp"][...] = h.T @ dlogits
    G["bp"][...] = dlogits.sum(axis=0)
    G["Wv"][...] = h.T @ dvalue
    G["bv"][...] = dvalue.sum(axis=0)
    dh = dlogits @ L["Wp"].T
    if not detach_value_encoder:
        dh = dh + dvalue @ L["Wv"].T
    for i in reversed(range(len(params.arch.hidden_dims))):
        dz = dh * (1.0 - acts[i + 1] ** 2)
        G[f"W{i}"][...] = acts[i].T @ dz
        G[f"b{i}"][...] = dz.sum(axis=0)
        if i:
            dh = dz @ L[f"W{i}"].T
    return grad


def grad(params: PolicyParams, obs: np.ndarray, loss_closure, detach_value_encoder=False):
    """Run ``loss_closure(logits, values) -> (loss, dlogits, dvalues)`` and backprop it.

    Returns ``(loss, gradient)``.
    """
    out = forward(params, np.atleast_2d(obs))
    loss, dlogits, dvalue = loss_closure(out.logits, out.value)
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss evaluated to {loss}")
    return float(loss), backward(params, out, dlogits, dvalue, detach_value_encoder)


def numerical_grad(f, theta: np.ndarray, h=1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f`` at ``theta``."""
    g = np.zeros_like(theta)
    t = theta.copy()
    for i in range(theta.size):
        old = t[i]
        t[i] = old + h
        up = f(t)
        t[i] = old - h
        down = f(t)
        t[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def sample_action(out: ForwardOut, rng, greedy=False):
    """Categorical draw (or argmax) from a single-observation forward pass."""
    lp = log_softmax(out.logits)
    if greedy:
        a = int(np.argmax(out.logits))
    else:
        cdf = np.cumsum(np.exp(lp))
        a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        a = min(a, lp.size - 1)
    return a, float(lp[a])


# checkpoints -----------------------------------------------------------

def save_params(path, params: PolicyParams, step=0, extra=None) -> None:
    header = {"arch": params.arch.to_dict(), "step": int(step), "dtype": "<f8",
              "n_params": params.arch.n_params}
    if extra:
        header["extra"] = extra
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(params.theta.astype("<f8").tobytes())


def load_params(path):
    """Returns ``(params, header)``."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        theta = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    return PolicyParams(Arch.from_dict(header["arch"]), theta), header
