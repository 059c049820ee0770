"""Seeded batch evaluation, paired policy comparison and episode tracing."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from activemap.env import EnvConfig, episode_streams, reset, step, step_record
from activemap.policies import LearnedPolicy, PolicyContext, make_policy
from activemap.trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    name: str = "random"
    weights: str | None = None
    greedy: bool = False
    myopic_motion: str = "belief-weighted"
    unknown_entropy: float = 0.6
    replan_interval: int = 20

    @property
    def spec(self) -> str:
        if self.name == "learned":
            if not self.weights:
                raise ConfigError("learned policy needs a weights path")
            return f"learned:{self.weights}"
        return self.name

    @property
    def label(self) -> str:
        return "learned" if self.name == "learned" else self.name

    def options(self) -> dict:
        return {
            "greedy": self.greedy,
            "myopic_motion": self.myopic_motion,
            "unknown_entropy": self.unknown_entropy,
            "replan_interval": self.replan_interval,
        }

    @classmethod
    def parse(cls, text: str, **overrides) -> "PolicyConfig":
        """Accept ``random``, ``frontier``, ``myopic`` or ``learned:<path>``."""
        if text.startswith("learned:"):
            return cls(name="learned", weights=text.split(":", 1)[1], **overrides)
        return cls(name=text, **overrides)


@dataclass(frozen=True)
class EvalConfig:
    episodes: int = 1000
    seed: int = 0
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = EnvConfig()
    policy: PolicyConfig = PolicyConfig()
    evaluation: EvalConfig = EvalConfig()
    train: TrainConfig = TrainConfig()
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.policy.name not in ("random", "frontier", "myopic", "learned"):
            raise ConfigError(f"unknown policy {self.policy.name!r}")
        if self.evaluation.episodes < 1:
            raise ConfigError("evaluation.episodes must be at least 1")
        if self.evaluation.workers < 1:
            raise ConfigError("evaluation.workers must be at least 1")
        unknown = set(self.output) - {"report", "trace", "dir"}
        if unknown:
            raise ConfigError(f"unknown output keys: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "env": self.env.to_dict(),
            "policy": asdict(self.policy),
            "evaluation": asdict(self.evaluation),
            "train": self.train.to_dict(),
            "output": dict(self.output),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        sections = {"env", "policy", "evaluation", "train", "output"}
        unknown = set(d) - sections
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            return cls(
                env=EnvConfig.from_dict(d.get("env", {})),
                policy=_strict(PolicyConfig, d.get("policy", {}), "policy"),
                evaluation=_strict(EvalConfig, d.get("evaluation", {}), "evaluation"),
                train=TrainConfig.from_dict(d.get("train", {})),
                output=dict(d.get("output", {})),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data)


def _strict(cls, d, section):
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    return cls(**d)


def build_policy(env_config: EnvConfig, policy: PolicyConfig):
    return make_policy(policy.spec, env_config, **policy.options())


def run_episode(env_config: EnvConfig, policy, master_seed: int, episode: int,
                recorder=None) -> float:
    """Play one evaluation episode and return its total reward.

    ``recorder(record, state)`` receives the reset record and one record per step.
    """
    env_rng, pol_rng = episode_streams(master_seed, episode)
    policy.reset()
    need_features = isinstance(policy, LearnedPolicy)
    state, res = reset(env_rng, env_config, with_features=need_features)
    total = 0.0
    if recorder is not None:
        recorder(step_record(0, state.pose, None, res.info["observation"], 0.0, 0.0), state)
    ctx = PolicyContext(state.belief, state.pose, pol_rng, res.features)
    while not state.done:
        ctx.pose = state.pose
        ctx.features = res.features
        action = policy(ctx)
        res = step(state, action, with_features=need_features)
        total += res.reward
        if recorder is not None:
            recorder(step_record(state.step_count, state.pose, action,
                                 res.info["observation"], res.reward, total), state)
    return total


def _run_chunk(args):
    env_config, policy_config, seed, episodes = args
    policy = build_policy(env_config, policy_config)
    return [run_episode(env_config, policy, seed, ep) for ep in episodes]


def run_episodes(env_config: EnvConfig, policy_config: PolicyConfig, seed: int,
                 episodes: int, workers: int = 1) -> list[float]:
    """Per-episode rewards in episode order; identical for any worker count."""
    indices = list(range(episodes))
    if workers <= 1:
        return _run_chunk((env_config, policy_config, seed, indices))
    chunks = [indices[i::workers] for i in range(workers)]
    out = [0.0] * episodes
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk, rewards in zip(chunks, pool.map(
                _run_chunk, [(env_config, policy_config, seed, c) for c in chunks])):
            for ep, r in zip(chunk, rewards):
                out[ep] = r
    return out


@dataclass
class EvalReport:
    policy: str
    rewards: list
    config: dict = field(default_factory=dict)

    @property
    def episodes(self) -> int:
        return len(self.rewards)

    @property
    def mean(self) -> float:
        return float(np.mean(self.rewards))

    @property
    def std(self) -> float:
        """Sample standard deviation over episodes."""
        return float(np.std(self.rewards, ddof=1)) if len(self.rewards) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "episodes": self.episodes,
            "mean": self.mean,
            "std": self.std,
            "rewards": list(map(float, self.rewards)),
            "config": self.config,
        }


def _check_weights(config: RunConfig):
    if config.policy.name == "learned":
        from activemap.neural import load_params

        load_params(config.policy.weights, expect_env=config.env)


def evaluate(config: RunConfig) -> EvalReport:
    _check_weights(config)
    ev = config.evaluation
    rewards = run_episodes(config.env, config.policy, ev.seed, ev.episodes, ev.workers)
    return EvalReport(config.policy.label, rewards, config.to_dict())


@dataclass
class ComparisonReport:
    rows: list
    seed: int
    episodes: int

    def paired(self) -> list[dict]:
        """Mean difference and paired standard error for every pair of rows."""
        out = []
        for i, a in enumerate(self.rows):
            for b in self.rows[i + 1:]:
                d = np.asarray(a.rewards) - np.asarray(b.rewards)
                se = float(np.std(d, ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
                out.append({"a": a.policy, "b": b.policy,
                            "mean_difference": float(d.mean()), "paired_se": se})
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "episodes": self.episodes,
            "rows": [r.to_dict() for r in self.rows],
            "paired": self.paired(),
        }


def compare(config: RunConfig, policies: list[PolicyConfig]) -> ComparisonReport:
    """Evaluate each policy on the same per-episode map, pose and noise streams."""
    if len(policies) < 2:
        raise ConfigError("compare needs at least two policies")
    rows = []
    for pc in policies:
        cfg = RunConfig(config.env, pc, config.evaluation, config.train, config.output)
        report = evaluate(cfg)
        report.policy = pc.spec if pc.name == "learned" else pc.name
        rows.append(report)
    return ComparisonReport(rows, config.evaluation.seed, config.evaluation.episodes)


def format_table(rows: list[EvalReport]) -> str:
    width = max(len("Approach"), *(len(r.policy) for r in rows))
    lines = [f"{'Approach':<{width}}  Performance", "-" * (width + 24)]
    for r in rows:
        lines.append(f"{r.policy:<{width}}  {r.mean:8.2f} +/- {r.std:6.2f}")
    return "\n".join(lines)


def _dumps(record) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def trace(config: RunConfig, episode: int, path, stride: int = 0) -> int:
    """Write one episode as line-delimited JSON; returns the record count.

    The first record is the reset (with the true map and initial belief);
    then one record per step.  With ``stride > 0`` every ``stride``-th step
    record also carries a belief snapshot.
    """
    _check_weights(config)
    policy = build_policy(config.env, config.policy)
    lines = []

    def recorder(record, state):
        if record["step"] == 0:
            record["type"] = "reset"
            record["seed"] = config.evaluation.seed
            record["episode"] = episode
            record["map"] = state.map.occupied.astype(int).tolist()
            record["belief"] = state.belief.prob().tolist()
        else:
            record["type"] = "step"
            if stride and record["step"] % stride == 0:
                record["belief"] = state.belief.prob().tolist()
        lines.append(_dumps(record))

    run_episode(config.env, policy, config.evaluation.seed, episode, recorder)
    parent = os.path.dirname(os.fspath(path))
    if parent and not os.path.isdir(parent):
        raise OSError(f"cannot write trace: directory {parent!r} does not exist")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return len(lines)


def read_trace(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
