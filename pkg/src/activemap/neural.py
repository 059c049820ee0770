"""Shared-trunk MLP actor-critic with a hand-written backward pass and Adam.

Parameters live in one flat float64 vector; named views expose the layers.
That keeps Adam, norm clipping and serialization single-array operations.

Layout (row-major, in this order)::

    trunk_w   (in_dim, hidden)
    trunk_b   (hidden,)
    policy_w  (hidden, n_actions)
    policy_b  (n_actions,)
    value_w   (hidden,)
    value_b   (1,)
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from activemap._backend import kernels

HIDDEN = 256
CHANNELS = 2
MAGIC = b"ACTIVEMAP-WEIGHTS 1\n"


class WeightFileError(ValueError):
    pass


def _layout(in_dim, hidden, n_actions):
    return [
        ("trunk_w", (in_dim, hidden)),
        ("trunk_b", (hidden,)),
        ("policy_w", (hidden, n_actions)),
        ("policy_b", (n_actions,)),
        ("value_w", (hidden,)),
        ("value_b", (1,)),
    ]


def _views(flat, layout):
    out, pos = {}, 0
    for name, shape in layout:
        size = math.prod(shape)
        out[name] = flat[pos:pos + size].reshape(shape)
        pos += size
    return out


@dataclass
class ActorCriticParams:
    flat: np.ndarray
    in_dim: int
    hidden: int = HIDDEN
    n_actions: int = 4
    env: dict = field(default_factory=dict)
    version: int = 0

    def __post_init__(self):
        self.layout = _layout(self.in_dim, self.hidden, self.n_actions)
        size = sum(math.prod(s) for _, s in self.layout)
        if self.flat.shape != (size,):
            raise ValueError(f"flat parameter vector has shape {self.flat.shape}, expected ({size},)")
        self.views = _views(self.flat, self.layout)

    def __getattr__(self, name):
        views = self.__dict__.get("views")
        if views is not None and name in views:
            return views[name]
        raise AttributeError(name)

    def __getstate__(self):
        state = dict(self.__dict__)
        del state["views"], state["layout"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self.__post_init__()

    def unflatten(self, vec: np.ndarray) -> dict:
        return _views(vec, self.layout)

    def copy(self) -> "ActorCriticParams":
        return ActorCriticParams(self.flat.copy(), self.in_dim, self.hidden,
                                 self.n_actions, dict(self.env), self.version)


def input_dim(side: int) -> int:
    return CHANNELS * (2 * side - 1) ** 2


def init_params(rng: np.random.Generator, side: int = 25, n_actions: int = 4,
                hidden: int = HIDDEN, in_dim: int | None = None) -> ActorCriticParams:
    """Weights uniform in +/-1/sqrt(fan_in); biases zero."""
    if in_dim is None:
        in_dim = input_dim(side)
    layout = _layout(in_dim, hidden, n_actions)
    flat = np.zeros(sum(math.prod(s) for _, s in layout))
    views = _views(flat, layout)
    for name, fan_in in (("trunk_w", in_dim), ("policy_w", hidden), ("value_w", hidden)):
        bound = 1.0 / math.sqrt(fan_in)
        views[name][...] = rng.uniform(-bound, bound, size=views[name].shape)
    env = {"side": side, "channels": CHANNELS, "n_actions": n_actions}
    return ActorCriticParams(flat, in_dim, hidden, n_actions, env)


@dataclass
class ForwardTrace:
    x: np.ndarray
    h_pre: np.ndarray
    h: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    value: float
    version: int


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def forward(params: ActorCriticParams, features: np.ndarray, keep_trace: bool = True):
    """Return ``(action_probs, value, trace)``; trace is None unless requested."""
    x = np.asarray(features, dtype=np.float64).reshape(-1)
    if x.shape[0] != params.in_dim:
        raise ValueError(
            f"features of size {np.size(features)} (shape {np.shape(features)}) "
            f"do not match network input {params.in_dim}"
        )
    v = params.views
    h_pre = x @ v["trunk_w"] + v["trunk_b"]
    h = np.maximum(h_pre, 0.0)
    logits = h @ v["policy_w"] + v["policy_b"]
    probs = softmax(logits)
    value = float(h @ v["value_w"] + v["value_b"][0])
    trace = None
    if keep_trace:
        trace = ForwardTrace(x.copy(), h_pre, h, logits, probs, value, params.version)
    return probs, value, trace


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(probs)
    a = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(a, len(probs) - 1)


def policy_entropy(probs: np.ndarray) -> np.ndarray:
    logp = np.log(np.where(probs > 0, probs, 1.0))
    return -(probs * logp).sum(axis=-1)


def a2c_grads(params: ActorCriticParams, batch, entropy_coef: float = 0.001,
              value_coef: float = 0.5) -> tuple[np.ndarray, dict]:
    """Exact gradient of the summed A2C loss over ``batch``.

    ``batch`` holds ``(trace, action, n_step_return)`` triples.  Per sample the
    loss is ``-log pi(a) * adv - entropy_coef * H(pi) + value_coef * (R - V)^2``
    with ``adv = R - V`` held constant.  Returns ``(flat_grad, stats)``.
    """
    if not batch:
        raise ValueError("empty batch")
    for tr, _, _ in batch:
        if tr.version != params.version:
            raise ValueError(
                f"trace from parameter version {tr.version} used with version {params.version}"
            )
    X = np.stack([tr.x for tr, _, _ in batch])
    Hpre = np.stack([tr.h_pre for tr, _, _ in batch])
    Hid = np.stack([tr.h for tr, _, _ in batch])
    P = np.stack([tr.probs for tr, _, _ in batch])
    V = np.array([tr.value for tr, _, _ in batch])
    A = np.array([a for _, a, _ in batch])
    R = np.array([r for _, _, r in batch], dtype=float)
    B = len(batch)

    adv = R - V
    logP = np.log(np.where(P > 0, P, 1.0))
    ent = -(P * logP).sum(axis=1)

    onehot = np.zeros_like(P)
    onehot[np.arange(B), A] = 1.0
    d_logits = (P - onehot) * adv[:, None]
    d_logits += entropy_coef * P * (logP + ent[:, None])
    d_value = 2.0 * value_coef * (V - R)

    grad = np.empty_like(params.flat)
    g = params.unflatten(grad)
    v = params.views
    g["policy_w"][...] = Hid.T @ d_logits
    g["policy_b"][...] = d_logits.sum(axis=0)
    g["value_w"][...] = Hid.T @ d_value
    g["value_b"][0] = d_value.sum()
    d_h = d_logits @ v["policy_w"].T + d_value[:, None] * v["value_w"][None, :]
    d_h *= Hpre > 0
    g["trunk_w"][...] = X.T @ d_h
    g["trunk_b"][...] = d_h.sum(axis=0)

    policy_loss = float(-(logP[np.arange(B), A] * adv).sum())
    value_loss = float((adv ** 2).sum())
    stats = {
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": float(ent.sum()),
        "loss": policy_loss - entropy_coef * float(ent.sum()) + value_coef * value_loss,
    }
    return grad, stats


def global_norm(grads: np.ndarray) -> float:
    return float(np.sqrt(np.dot(grads, grads)))


def clip_global_norm(grads: np.ndarray, max_norm: float) -> np.ndarray:
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm > max_norm:
        return grads * (max_norm / norm)
    return grads


@dataclass
class OptimizerState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-4
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ActorCriticParams, lr: float = 1e-4) -> "OptimizerState":
        return cls(np.zeros_like(params.flat), np.zeros_like(params.flat), lr)


def adam_step(opt: OptimizerState, params: ActorCriticParams, grads: np.ndarray):
    """Bias-corrected Adam update, in place on both ``params`` and ``opt``."""
    if grads.shape != params.flat.shape or opt.m.shape != params.flat.shape:
        raise ValueError("gradient, moment and parameter shapes disagree")
    opt.t += 1
    kernels.adam_update(params.flat, opt.m, opt.v, np.ascontiguousarray(grads, dtype=np.float64),
                        opt.lr, opt.beta1, opt.beta2, opt.eps, opt.t)
    params.version += 1
    return params, opt


def save_params(params: ActorCriticParams, path) -> None:
    header = {
        "layout": [[name, list(shape)] for name, shape in params.layout],
        "count": int(params.flat.size),
        "dtype": "<f8",
        "in_dim": params.in_dim,
        "hidden": params.hidden,
        "n_actions": params.n_actions,
        "env": params.env,
    }
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        f.write(params.flat.astype("<f8").tobytes())
    os.replace(tmp, path)


def load_params(path, expect_env=None) -> ActorCriticParams:
    """Read a weight file; ``expect_env`` (EnvConfig or dict) guards against mismatches."""
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise WeightFileError(f"{path}: not an activemap weight file")
    rest = blob[len(MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise WeightFileError(f"{path}: truncated header")
    try:
        header = json.loads(rest[:nl])
    except json.JSONDecodeError as exc:
        raise WeightFileError(f"{path}: corrupt header ({exc})") from None
    payload = rest[nl + 1:]
    if len(payload) != 8 * header["count"]:
        raise WeightFileError(
            f"{path}: payload holds {len(payload)} bytes, header promises {8 * header['count']}"
        )
    layout = _layout(header["in_dim"], header["hidden"], header["n_actions"])
    if [[n, list(s)] for n, s in layout] != header["layout"]:
        raise WeightFileError(f"{path}: layout {header['layout']} is not the MLP layout {layout}")
    if expect_env is not None:
        want = {
            "side": getattr(expect_env, "side", None) or expect_env.get("side"),
            "channels": CHANNELS,
            "n_actions": getattr(expect_env, "n_actions", None) or expect_env.get("n_actions", 4),
        }
        found = {k: header["env"].get(k) for k in want}
        if found != want:
            raise WeightFileError(
                f"{path}: weights trained for {found} (input {header['in_dim']}) but the "
                f"environment expects {want} (input {input_dim(want['side'])})"
            )
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ActorCriticParams(flat, header["in_dim"], header["hidden"], header["n_actions"],
                             header["env"])
