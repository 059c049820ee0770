"""Single-threaded A2C training loop for the MLP actor-critic."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from activemap import neural
from activemap.env import TRAIN_STREAM, EnvConfig, episode_streams, reset, step


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 10_000
    gamma: float = 0.99
    n_steps: int = 20
    lr: float = 1e-4
    lr_halving_interval: int = 5_000
    entropy_coef: float = 0.001
    value_coef: float = 0.5
    max_grad_norm: float = 50.0
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in ("episodes", "n_steps", "lr", "lr_halving_interval", "max_grad_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.entropy_coef < 0 or self.value_coef < 0 or self.checkpoint_every < 0:
            raise ValueError("coefficients and checkpoint interval must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown training keys: {sorted(unknown)}")
        return cls(**d)


def learning_rate(config: TrainConfig, episode: int) -> float:
    """Step schedule: halve every ``lr_halving_interval`` episodes."""
    return config.lr * 0.5 ** (episode // config.lr_halving_interval)


@dataclass
class RolloutBuffer:
    traces: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    terminal: bool = False
    bootstrap: float = 0.0

    def add(self, trace, action, reward):
        self.traces.append(trace)
        self.actions.append(action)
        self.rewards.append(reward)

    def __len__(self):
        return len(self.rewards)

    def clear(self):
        self.traces.clear()
        self.actions.clear()
        self.rewards.clear()
        self.terminal = False
        self.bootstrap = 0.0


def compute_returns(buffer: RolloutBuffer, gamma: float) -> list[float]:
    """Bootstrapped n-step returns by one backward sweep."""
    running = 0.0 if buffer.terminal else buffer.bootstrap
    out = [0.0] * len(buffer.rewards)
    for i in range(len(buffer.rewards) - 1, -1, -1):
        running = buffer.rewards[i] + gamma * running
        out[i] = running
    return out


@dataclass
class LearningCurve:
    episodes: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)

    def append(self, episode, reward, wall):
        self.episodes.append(episode)
        self.rewards.append(reward)
        self.wall_time.append(wall)

    def trailing_mean(self, window: int) -> float:
        return float(np.mean(self.rewards[-window:]))

    def write(self, path, smoothed_path=None, kernel_width: float = 50.0):
        with open(path, "w") as f:
            f.write("episode,reward\n")
            for e, r in zip(self.episodes, self.rewards):
                f.write(f"{e},{r!r}\n")
        if smoothed_path is not None:
            smooth = smooth_curve(self.rewards, kernel_width)
            with open(smoothed_path, "w") as f:
                f.write("episode,reward\n")
                for e, r in zip(self.episodes, smooth):
                    f.write(f"{e},{float(r)!r}\n")


def read_curve(path) -> tuple[np.ndarray, np.ndarray]:
    episodes, rewards = [], []
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "episode,reward":
        raise ValueError(f"{path}: expected an 'episode,reward' header")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            e, r = line.split(",")
            episodes.append(int(e))
            rewards.append(float(r))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
    return np.array(episodes), np.array(rewards)


def smooth_curve(series, kernel_width: float) -> np.ndarray:
    """Gaussian smoothing (sigma = ``kernel_width`` samples), renormalized at the edges."""
    if kernel_width <= 0:
        raise ValueError(f"kernel width must be positive, got {kernel_width}")
    y = np.asarray(series, dtype=float)
    if y.size == 0:
        return y.copy()
    radius = int(math.ceil(4 * kernel_width))
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / kernel_width) ** 2)
    k /= k.sum()
    num = np.convolve(y, k, mode="full")[radius:radius + y.size]
    den = np.convolve(np.ones_like(y), k, mode="full")[radius:radius + y.size]
    return num / den


class TrainingDiverged(RuntimeError):
    pass


def _update(params, opt, buffer, config):
    returns = compute_returns(buffer, config.gamma)
    batch = list(zip(buffer.traces, buffer.actions, returns))
    grads, stats = neural.a2c_grads(params, batch, config.entropy_coef, config.value_coef)
    if not (math.isfinite(stats["loss"]) and np.isfinite(grads).all()):
        raise TrainingDiverged(
            "non-finite A2C loss; batch dump: "
            f"stats={stats} rewards={buffer.rewards} returns={returns} "
            f"values={[t.value for t in buffer.traces]} actions={buffer.actions} "
            f"probs={[t.probs.tolist() for t in buffer.traces]}"
        )
    grads = neural.clip_global_norm(grads, config.max_grad_norm)
    neural.adam_step(opt, params, grads)
    return stats


def run_training_episode(params, opt, env_config, config, episode):
    """One episode of rollouts and updates; returns the episode reward."""
    env_rng, pol_rng = episode_streams(config.seed, episode, TRAIN_STREAM)
    state, res = reset(env_rng, env_config)
    feats = res.features
    buffer = RolloutBuffer()
    total = 0.0
    while True:
        probs, _, trace = neural.forward(params, feats)
        action = neural.sample_action(probs, pol_rng)
        res = step(state, action)
        total += res.reward
        buffer.add(trace, action, res.reward)
        feats = res.features
        if res.done or len(buffer) == config.n_steps:
            buffer.terminal = res.done
            if not res.done:
                buffer.bootstrap = neural.forward(params, feats, keep_trace=False)[1]
            _update(params, opt, buffer, config)
            buffer.clear()
        if res.done:
            return total


def train(config: TrainConfig, env_config: EnvConfig = EnvConfig(),
          params: neural.ActorCriticParams | None = None, *,
          checkpoint_path=None, progress=None):
    """Train and return ``(params, LearningCurve)``; deterministic given ``config.seed``.

    ``progress`` is called as ``progress(episode, reward, curve)`` after each
    episode.
    """
    if params is None:
        init_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
        params = neural.init_params(init_rng, env_config.side, env_config.n_actions)
    opt = neural.OptimizerState.for_params(params, config.lr)
    curve = LearningCurve()
    t0 = time.perf_counter()
    for ep in range(config.episodes):
        opt.lr = learning_rate(config, ep)
        reward = run_training_episode(params, opt, env_config, config, ep)
        curve.append(ep, reward, time.perf_counter() - t0)
        if progress is not None:
            progress(ep, reward, curve)
        if checkpoint_path and config.checkpoint_every and (ep + 1) % config.checkpoint_every == 0:
            neural.save_params(params, checkpoint_path)
    return params, curve
