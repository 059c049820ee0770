"""Disaster Mapping environment: a drone maps buildings on a known-pose grid.

The true map is i.i.d. Bernoulli(density).  Each step the robot tries to move
one cell; moves into buildings or off the grid leave it in place.  It then
senses its neighborhood through a symmetric noisy channel, the belief absorbs
the readings, and the reward is the drop in total belief entropy.

Randomness is consumed in a fixed order from the episode stream: the map, the
start pose, then exactly one uniform per neighborhood offset per sense (even
for offsets that fall off the grid).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from functools import cached_property

import numpy as np

from activemap.belief import (
    LN2,
    BeliefGrid,
    Observation,
    Pose,
    apply_observation,
    centered_features,
    total_entropy,
)

MOORE = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
VON_NEUMANN = ((-1, 0), (1, 0), (0, -1), (0, 1))

# Up, Down, Left, Right, then diagonals when 8-connected motion is enabled.
MOVES_4 = VON_NEUMANN
MOVES_8 = VON_NEUMANN + ((-1, -1), (-1, 1), (1, -1), (1, 1))
ACTION_NAMES = ("up", "down", "left", "right", "up-left", "up-right", "down-left", "down-right")

_NEIGHBORHOODS = {"moore": MOORE, "von_neumann": VON_NEUMANN}
_MOVESETS = {"von_neumann": MOVES_4, "moore": MOVES_8}


@dataclass(frozen=True)
class EnvConfig:
    side: int = 25
    density: float = 0.1
    accuracy: float = 0.8
    horizon: int = 300
    sense_neighborhood: str = "moore"
    move_neighborhood: str = "von_neumann"

    def __post_init__(self):
        if self.side < 1:
            raise ValueError(f"side must be positive, got {self.side}")
        if not 0.0 <= self.density < 1.0:
            raise ValueError(f"density must lie in [0, 1), got {self.density}")
        if not 0.0 < self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in (0, 1], got {self.accuracy}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.sense_neighborhood not in _NEIGHBORHOODS:
            raise ValueError(f"unknown sense_neighborhood {self.sense_neighborhood!r}")
        if self.move_neighborhood not in _MOVESETS:
            raise ValueError(f"unknown move_neighborhood {self.move_neighborhood!r}")

    @cached_property
    def sense_offsets(self) -> np.ndarray:
        return np.array(_NEIGHBORHOODS[self.sense_neighborhood], dtype=np.int64)

    @cached_property
    def move_offsets(self) -> np.ndarray:
        return np.array(_MOVESETS[self.move_neighborhood], dtype=np.int64)

    @property
    def n_actions(self) -> int:
        return len(_MOVESETS[self.move_neighborhood])

    @property
    def max_entropy(self) -> float:
        return self.side * self.side * LN2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown environment keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class GridMap:
    """True occupancy; ``True`` marks a building."""

    occupied: np.ndarray

    @property
    def side(self) -> int:
        return self.occupied.shape[0]

    def is_free(self, r: int, c: int) -> bool:
        n = self.side
        return 0 <= r < n and 0 <= c < n and not self.occupied[r, c]


def sample_map(rng: np.random.Generator, side: int, density: float) -> GridMap:
    if not 0.0 <= density < 1.0:
        raise ValueError(f"density must lie in [0, 1), got {density}")
    return GridMap(rng.random((side, side)) < density)


def sample_pose(rng: np.random.Generator, grid: GridMap) -> Pose:
    """Uniform over the free cells of ``grid``."""
    free = np.flatnonzero(~grid.occupied)
    if free.size == 0:
        raise ValueError("map has no free cell to start from")
    r, c = divmod(int(free[rng.integers(free.size)]), grid.side)
    return Pose(r, c)


def sense(grid: GridMap, pose, accuracy: float, rng: np.random.Generator,
          offsets=MOORE) -> Observation:
    """Noisy readings of the in-bounds cells around ``pose``.

    Each reading is the true bit flipped with probability ``1 - accuracy``.
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    u = rng.random(len(offsets))
    rows = pose[0] + offsets[:, 0]
    cols = pose[1] + offsets[:, 1]
    n = grid.side
    keep = (rows >= 0) & (rows < n) & (cols >= 0) & (cols < n)
    rows, cols, u = rows[keep], cols[keep], u[keep]
    truth = grid.occupied[rows, cols]
    flip = u < (1.0 - accuracy)
    return Observation(rows, cols, (truth ^ flip).astype(np.int8))


@dataclass
class StepResult:
    features: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


@dataclass
class EnvState:
    config: EnvConfig
    map: GridMap
    pose: Pose
    belief: BeliefGrid
    rng: np.random.Generator
    step_count: int = 0
    entropy: float = 0.0
    initial_entropy: float = 0.0

    @property
    def done(self) -> bool:
        return self.step_count >= self.config.horizon


def reset(rng: np.random.Generator, config: EnvConfig = EnvConfig(), *,
          with_features: bool = True) -> tuple[EnvState, StepResult]:
    """Sample a map and start pose, then take the initial reading."""
    grid = sample_map(rng, config.side, config.density)
    if not (~grid.occupied).any():
        # Only reachable at extreme densities; free one cell for the start.
        r, c = divmod(int(rng.integers(config.side * config.side)), config.side)
        grid.occupied[r, c] = False
    pose = sample_pose(rng, grid)
    belief = BeliefGrid.uniform(config.side)
    obs = sense(grid, pose, config.accuracy, rng, config.sense_offsets)
    apply_observation(belief, obs, config.accuracy)
    h0 = total_entropy(belief)
    state = EnvState(config, grid, pose, belief, rng, 0, h0, h0)
    feats = centered_features(belief, pose) if with_features else None
    return state, StepResult(feats, 0.0, False, {"pose": pose, "observation": obs})


def step(state: EnvState, action: int, *, with_features: bool = True) -> StepResult:
    """Advance one transition in place.  Blocked moves still sense."""
    if state.done:
        raise RuntimeError("episode finished; call reset() before stepping again")
    cfg = state.config
    moves = cfg.move_offsets
    if not 0 <= action < len(moves):
        raise ValueError(f"action {action} outside [0, {len(moves)})")
    dr, dc = moves[action]
    r, c = state.pose.row + int(dr), state.pose.col + int(dc)
    blocked = not state.map.is_free(r, c)
    if not blocked:
        state.pose = Pose(r, c)
    obs = sense(state.map, state.pose, cfg.accuracy, state.rng, cfg.sense_offsets)
    apply_observation(state.belief, obs, cfg.accuracy)
    before = state.entropy
    state.entropy = total_entropy(state.belief)
    state.step_count += 1
    feats = centered_features(state.belief, state.pose) if with_features else None
    return StepResult(
        feats,
        before - state.entropy,
        state.done,
        {"pose": state.pose, "observation": obs, "action": int(action), "blocked": blocked},
    )


TRAIN_STREAM, EVAL_STREAM = 0, 1


def episode_streams(master_seed: int, episode: int, purpose: int = EVAL_STREAM
                    ) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (environment, policy) generators for one episode index.

    ``purpose`` separates training maps from evaluation maps drawn with the
    same master seed.
    """
    env_ss, pol_ss = np.random.SeedSequence([master_seed, episode, purpose]).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(pol_ss)


def step_record(index: int, pose, action, obs: Observation, reward: float,
                cumulative: float) -> dict:
    """One line of the episode trace stream."""
    return {
        "step": index,
        "pose": [int(pose[0]), int(pose[1])],
        "action": None if action is None else int(action),
        "observation": obs.to_list(),
        "reward": float(reward),
        "cumulative_reward": float(cumulative),
    }

