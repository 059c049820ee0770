"""Exploration baselines: uniform random, frontier navigation, myopic information gain.

Every policy is a callable ``policy(ctx) -> action`` and may carry
per-episode state; call ``reset()`` before each episode.  Policies see only
the belief and pose, never the true map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from activemap._backend import kernels
from activemap.belief import BeliefGrid, Pose, cell_entropy, logodds_to_prob
from activemap.env import EnvConfig

TIE_TOL = 1e-12


@dataclass
class PolicyContext:
    belief: BeliefGrid
    pose: Pose
    rng: np.random.Generator
    features: np.ndarray | None = None


def _argmax_random_tie(scores: np.ndarray, rng: np.random.Generator) -> int:
    best = np.flatnonzero(scores >= scores.max() - TIE_TOL)
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def expected_gain(belief: BeliefGrid, pose, accuracy: float, offsets) -> float:
    """Expected entropy drop from one reading of the neighborhood at ``pose``.

    Cells are independent, so the sum over 2^k joint outcomes splits into k
    per-cell terms.
    """
    r, c = pose
    n = belief.side
    if not (0 <= r < n and 0 <= c < n):
        raise IndexError(f"pose {tuple(pose)} outside the {n}x{n} grid")
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return kernels.neighborhood_gain(belief.logodds, int(r), int(c), offsets, accuracy)


class Policy:
    name = "policy"

    def reset(self) -> None:
        pass

    def __call__(self, ctx: PolicyContext) -> int:
        raise NotImplementedError


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, n_actions: int = 4):
        self.n_actions = n_actions

    def __call__(self, ctx):
        return int(ctx.rng.integers(self.n_actions))


def random_policy(ctx: PolicyContext, n_actions: int = 4) -> int:
    return int(ctx.rng.integers(n_actions))


class MyopicPolicy(Policy):
    """Greedy one-step expected information gain.

    ``belief-weighted`` motion scores a move as succeeding with the belief's
    probability that the target is free and staying put otherwise;
    ``optimistic`` assumes every in-bounds move succeeds.
    """

    name = "myopic"

    def __init__(self, config: EnvConfig = EnvConfig(), motion: str = "belief-weighted"):
        if motion not in ("belief-weighted", "optimistic"):
            raise ValueError(f"unknown myopic motion model {motion!r}")
        self.config = config
        self.optimistic = motion == "optimistic"

    def scores(self, ctx: PolicyContext) -> np.ndarray:
        cfg = self.config
        return kernels.myopic_scores(
            ctx.belief.logodds, int(ctx.pose[0]), int(ctx.pose[1]),
            cfg.sense_offsets, cfg.move_offsets, cfg.accuracy, self.optimistic,
        )

    def __call__(self, ctx):
        return _argmax_random_tie(self.scores(ctx), ctx.rng)


def myopic_policy(ctx: PolicyContext, accuracy: float, config: EnvConfig = EnvConfig()) -> int:
    if accuracy != config.accuracy:
        config = EnvConfig(**{**config.to_dict(), "accuracy": accuracy})
    return MyopicPolicy(config)(ctx)


UNKNOWN, FREE, OCCUPIED = 0, 1, 2


def classify(belief: BeliefGrid, unknown_entropy: float = 0.6) -> np.ndarray:
    """Maximum-likelihood map with an explicit unknown class."""
    p = logodds_to_prob(belief.logodds)
    h = cell_entropy(p)
    out = np.where(p > 0.5, OCCUPIED, FREE).astype(np.int8)
    out[h > unknown_entropy] = UNKNOWN
    return out


def frontier_cells(classes: np.ndarray) -> np.ndarray:
    """Free cells with at least one 4-adjacent unknown cell."""
    unknown = classes == UNKNOWN
    near = np.zeros_like(unknown)
    near[1:, :] |= unknown[:-1, :]
    near[:-1, :] |= unknown[1:, :]
    near[:, 1:] |= unknown[:, :-1]
    near[:, :-1] |= unknown[:, 1:]
    return (classes == FREE) & near


class FrontierPolicy(Policy):
    """Walk a shortest free-space path to the nearest frontier.

    The plan is recomputed when it runs out, when the next planned cell is
    no longer believed free, when the last move did not take effect, or every
    ``replan_interval`` steps.  With no reachable frontier it moves at random.
    """

    name = "frontier"

    def __init__(self, config: EnvConfig = EnvConfig(), unknown_entropy: float = 0.6,
                 replan_interval: int = 20):
        self.config = config
        self.unknown_entropy = unknown_entropy
        self.replan_interval = replan_interval
        self.reset()

    def reset(self):
        self.plan: list[int] = []
        self.age = 0
        self.expected_pose: Pose | None = None

    def _replan(self, ctx, classes):
        passable = np.ascontiguousarray(classes == FREE, dtype=np.uint8)
        targets = np.ascontiguousarray(frontier_cells(classes), dtype=np.uint8)
        self.plan = kernels.bfs_plan(
            passable, targets, int(ctx.pose[0]), int(ctx.pose[1]), self.config.move_offsets
        )
        self.age = 0

    def __call__(self, ctx):
        classes = classify(ctx.belief, self.unknown_entropy)
        moves = self.config.move_offsets
        stale = (
            not self.plan
            or self.age >= self.replan_interval
            or (self.expected_pose is not None and tuple(ctx.pose) != self.expected_pose)
        )
        if not stale:
            dr, dc = moves[self.plan[0]]
            if classes[ctx.pose[0] + dr, ctx.pose[1] + dc] != FREE:
                stale = True
        if stale:
            self._replan(ctx, classes)
        if not self.plan:
            self.expected_pose = None
            return int(ctx.rng.integers(len(moves)))
        action = self.plan.pop(0)
        self.age += 1
        dr, dc = moves[action]
        self.expected_pose = (int(ctx.pose[0] + dr), int(ctx.pose[1] + dc))
        return action


def frontier_policy(ctx: PolicyContext, unknown_entropy: float = 0.6,
                    replan_interval: int = 20, config: EnvConfig = EnvConfig()) -> int:
    """Stateless single decision; episode runners should keep a FrontierPolicy instead."""
    return FrontierPolicy(config, unknown_entropy, replan_interval)(ctx)


class LearnedPolicy(Policy):
    """Acts from the actor-critic's action distribution on centered features."""

    name = "learned"

    def __init__(self, params, greedy: bool = False):
        self.params = params
        self.greedy = greedy

    def __call__(self, ctx):
        from activemap.belief import centered_features
        from activemap.neural import forward, sample_action

        feats = ctx.features
        if feats is None:
            feats = centered_features(ctx.belief, ctx.pose)
        probs, _, _ = forward(self.params, feats, keep_trace=False)
        if self.greedy:
            return int(np.argmax(probs))
        return sample_action(probs, ctx.rng)


def make_policy(spec: str, config: EnvConfig = EnvConfig(), **options) -> Policy:
    """Build a policy from ``random | frontier | myopic | learned:<weights-path>``."""
    if spec == "random":
        return RandomPolicy(config.n_actions)
    if spec == "myopic":
        return MyopicPolicy(config, motion=options.get("myopic_motion", "belief-weighted"))
    if spec == "frontier":
        return FrontierPolicy(
            config,
            unknown_entropy=options.get("unknown_entropy", 0.6),
            replan_interval=options.get("replan_interval", 20),
        )
    if spec.startswith("learned:"):
        from activemap.neural import load_params

        params = load_params(spec.split(":", 1)[1], expect_env=config)
        return LearnedPolicy(params, greedy=options.get("greedy", False))
    raise ValueError(f"unknown policy {spec!r}; expected random, frontier, myopic or learned:<path>")
