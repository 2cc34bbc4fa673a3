"""Tabular Q-learning: the Q-table, epsilon-greedy sampling, the iterative
value update, and experience replay over previously evaluated networks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .space import (
    MAX_DEPTH_DEFAULT,
    N_ACTIONS,
    N_CURRENT,
    State,
    Trajectory,
    make_trajectory,
)

Q0_DEFAULT = 0.5


@dataclass(frozen=True)
class LearningParams:
    """Update hyperparameters; defaults value long-term reward fully."""

    alpha: float = 0.01
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")


# (epsilon, unique models to train at that epsilon)
DEFAULT_SCHEDULE = (
    (1.0, 50),
    (0.9, 7),
    (0.8, 7),
    (0.7, 7),
    (0.6, 10),
    (0.5, 15),
    (0.4, 15),
    (0.3, 15),
    (0.2, 15),
    (0.1, 20),
)


@dataclass(frozen=True)
class EpsilonSchedule:
    stages: tuple[tuple[float, int], ...] = DEFAULT_SCHEDULE

    def __post_init__(self):
        eps = [e for e, _ in self.stages]
        if any(not 0.0 <= e <= 1.0 for e in eps):
            raise ValueError("epsilons must lie in [0, 1]")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if any(n < 0 for _, n in self.stages):
            raise ValueError("stage quotas must be non-negative")

    @property
    def total_models(self) -> int:
        return sum(n for _, n in self.stages)


class QTable:
    """Dense state-action value table over (depth, current, action).

    Unvisited cells hold ``q0``; lookups never mutate the table.
    """

    def __init__(self, max_depth: int = MAX_DEPTH_DEFAULT, q0: float = Q0_DEFAULT):
        self.max_depth = max_depth
        self.q0 = q0
        self.values = np.full((max_depth + 1, N_CURRENT, N_ACTIONS), q0, dtype=np.float64)

    def lookup(self, s: State, a: int) -> float:
        return float(self.values[s.depth, s.current, a])

    def set(self, s: State, a: int, v: float) -> None:
        self.values[s.depth, s.current, a] = v

    def copy(self) -> "QTable":
        out = QTable(self.max_depth, self.q0)
        out.values[:] = self.values
        return out

    def snapshot_hash(self) -> str:
        import hashlib

        return hashlib.sha256(self.values.tobytes()).hexdigest()[:12]

    # --- lossless text round-trip (cells differing from q0 only) ---

    def dump_cells(self) -> list[str]:
        lines = []
        base = self.q0
        it = np.argwhere(self.values != base)
        for d, c, a in it:
            lines.append(f"q {d} {c} {a} {float(self.values[d, c, a])!r}")
        return lines

    def load_cell(self, line: str) -> None:
        _, d, c, a, v = line.split()
        self.values[int(d), int(c), int(a)] = float(v)


def _draw_uniforms(rng: np.random.Generator, max_depth: int) -> np.ndarray:
    # fixed-size draw per sample keeps RNG consumption independent of the
    # sampled trajectory, which checkpoint/resume relies on
    return rng.random(2 * (max_depth + 2))


def sample_trajectory(
    q: QTable,
    epsilon: float,
    rng: np.random.Generator,
    max_depth: int | None = None,
) -> Trajectory:
    """Epsilon-greedy draw: random legal action with probability epsilon,
    otherwise the argmax-Q action (ties to lowest code, GAP before SM)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    md = q.max_depth if max_depth is None else max_depth
    if md > q.max_depth:
        raise ValueError(f"max_depth {md} exceeds table depth {q.max_depth}")
    uniforms = _draw_uniforms(rng, md)
    out = np.empty(md + 2, dtype=np.int64)
    n = kernels.rollout(q.values, md, epsilon, uniforms, out)
    return make_trajectory(out[:n])


def greedy_trajectory(q: QTable, max_depth: int | None = None) -> Trajectory:
    """Pure exploitation: sample_trajectory with epsilon 0 (no randomness)."""
    md = q.max_depth if max_depth is None else max_depth
    uniforms = np.zeros(2 * (md + 2))
    out = np.empty(md + 2, dtype=np.int64)
    n = kernels.rollout(q.values, md, 0.0, uniforms, out)
    return make_trajectory(out[:n])


def q_update(
    q: QTable,
    t: Trajectory,
    reward: float,
    params: LearningParams = LearningParams(),
) -> QTable:
    """Apply the iterative value update along ``t``, terminal transition
    first, with the whole trajectory reward observed at the terminal step and
    zero observed elsewhere. Mutates and returns ``q``."""
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"reward must be in [0, 1], got {reward}")
    actions = np.asarray(t.blocks, dtype=np.int64)
    kernels.bellman_sweep(
        q.values, actions, len(actions), reward, params.alpha, params.gamma, q.max_depth
    )
    return q


@dataclass(frozen=True)
class ReplayEntry:
    """One evaluated network: its block sequence and the reward it earned."""

    blocks: tuple[int, ...]
    net_string: str
    accuracy: float
    iteration: int
    epsilon: float
    param_count: int
    wall_time: float
    status: str = "ok"

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {self.accuracy}")


class ReplayMemory:
    """Append-only store of unique evaluated networks.

    Keeps a dedupe index by block sequence plus padded action arrays so the
    replay kernel can sweep entries without re-encoding.
    """

    def __init__(self, max_depth: int = MAX_DEPTH_DEFAULT):
        self.max_depth = max_depth
        self.entries: list[ReplayEntry] = []
        self._index: dict[tuple[int, ...], int] = {}
        self._cap = 64
        self._actions = np.zeros((self._cap, max_depth + 2), dtype=np.int64)
        self._lengths = np.zeros(self._cap, dtype=np.int64)
        self._rewards = np.zeros(self._cap, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, blocks) -> bool:
        return tuple(blocks) in self._index

    def get(self, blocks) -> ReplayEntry | None:
        i = self._index.get(tuple(blocks))
        return None if i is None else self.entries[i]

    def add(self, entry: ReplayEntry) -> None:
        key = tuple(entry.blocks)
        if key in self._index:
            raise ValueError(f"duplicate block sequence {entry.net_string}")
        n = len(self.entries)
        if n == self._cap:
            self._cap *= 2
            for name in ("_actions", "_lengths", "_rewards"):
                old = getattr(self, name)
                grown = np.zeros((self._cap,) + old.shape[1:], dtype=old.dtype)
                grown[:n] = old
                setattr(self, name, grown)
        self._index[key] = n
        self.entries.append(entry)
        self._actions[n, : len(key)] = key
        self._lengths[n] = len(key)
        self._rewards[n] = entry.accuracy

    def arrays(self):
        n = len(self.entries)
        return self._actions[:n], self._lengths[:n], self._rewards[:n]


def replay_update(
    q: QTable,
    mem: ReplayMemory,
    n_samples: int,
    rng: np.random.Generator,
    params: LearningParams = LearningParams(),
) -> QTable:
    """Re-apply the value update for ``n_samples`` entries drawn uniformly
    with replacement from ``mem``, in draw order. Mutates and returns ``q``."""
    if len(mem) == 0:
        raise ValueError("replay memory is empty")
    order = rng.integers(0, len(mem), size=n_samples)
    if n_samples == 0:
        return q
    actions, lengths, rewards = mem.arrays()
    kernels.replay_sweep(
        q.values, actions, lengths, rewards, order, params.alpha, params.gamma, q.max_depth
    )
    return q
