"""Windy gridworlds, SARSA experts, expert measures and success-rate evaluation.

Cells are indexed row-major (``state = row * cols + col``) with row 0 at the
top; wind pushes toward row 0. The goal cell is absorbing, which embeds the
episodic navigation task in the discounted MDP the LPs need.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .mdp import Mdp, empirical_occupation_batch, rollout_batch

log = logging.getLogger(__name__)

ACTIONS = ("left", "right", "up", "down")
ACTION_OFFSETS = np.array([(0, -1), (0, 1), (-1, 0), (1, 0)])

BENCHMARK_WINDS = (
    (0, 0, 0, 1, 1, 1, 2, 2, 1, 0),
    (1, 1, 0, 0, 0, 2, 0, 0, 1, 0),
    (0, 1, 0, 1, 2, 0, 1, 1, 1, 0),
    (0, 0, 1, 1, 2, 2, 0, 0, 1, 0),
)
BENCHMARK_GOAL = (3, 7)


class ExpertQualityError(RuntimeError):
    def __init__(self, message: str, training_log=None):
        super().__init__(message)
        self.training_log = training_log


@dataclass(frozen=True)
class WindyGridworld:
    wind: tuple[int, ...]
    goal: tuple[int, int] = BENCHMARK_GOAL
    rows: int = 7
    cols: int = 10

    def __post_init__(self):
        object.__setattr__(self, "wind", tuple(int(w) for w in self.wind))
        object.__setattr__(self, "goal", tuple(int(g) for g in self.goal))
        if len(self.wind) != self.cols:
            raise ValueError(f"wind has {len(self.wind)} entries, grid has {self.cols} columns")
        if any(w < 0 for w in self.wind):
            raise ValueError("wind magnitudes must be nonnegative")
        r, c = self.goal
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise ValueError(f"goal {self.goal} lies outside the {self.rows}x{self.cols} grid")

    @property
    def n_states(self) -> int:
        return self.rows * self.cols

    @property
    def goal_state(self) -> int:
        return self.goal[0] * self.cols + self.goal[1]

    def state(self, row: int, col: int) -> int:
        return row * self.cols + col

    def cell(self, state: int) -> tuple[int, int]:
        return divmod(int(state), self.cols)

    def step(self, row: int, col: int, action: int) -> tuple[int, int]:
        """Deterministic move: action offset plus upward wind, clamped per axis."""
        if (row, col) == self.goal:
            return row, col
        dr, dc = ACTION_OFFSETS[action]
        nr = min(max(row + dr - self.wind[col], 0), self.rows - 1)
        nc = min(max(col + dc, 0), self.cols - 1)
        return int(nr), int(nc)

    def next_state_table(self) -> np.ndarray:
        """``table[s, a]`` = successor state index."""
        table = np.empty((self.n_states, len(ACTIONS)), dtype=np.int64)
        for s in range(self.n_states):
            r, c = self.cell(s)
            for a in range(len(ACTIONS)):
                table[s, a] = self.state(*self.step(r, c, a))
        return table

    def start_dist(self) -> np.ndarray:
        """Uniform over non-goal cells."""
        d = np.ones(self.n_states)
        d[self.goal_state] = 0.0
        return d / d.sum()

    def to_mdp(self, discount: float) -> Mdp:
        nxt = self.next_state_table()
        P = np.zeros((self.n_states, len(ACTIONS), self.n_states))
        np.put_along_axis(P, nxt[..., None], 1.0, axis=2)
        return Mdp(P, discount, self.start_dist())

    def to_dict(self) -> dict:
        return {"wind": list(self.wind), "goal": list(self.goal), "rows": self.rows, "cols": self.cols}


def make_windy_gridworld(wind, goal=BENCHMARK_GOAL, discount: float = 0.9, rows: int = 7,
                         cols: int = 10) -> Mdp:
    return WindyGridworld(tuple(wind), tuple(goal), rows, cols).to_mdp(discount)


def benchmark_worlds() -> list[WindyGridworld]:
    """The four 7x10 benchmark worlds, all with goal cell (3, 7)."""
    return [WindyGridworld(w, BENCHMARK_GOAL) for w in BENCHMARK_WINDS]


@dataclass(frozen=True)
class SarsaConfig:
    learning_rate: float = 0.5
    exploration: float = 0.1
    episodes: int = 8000
    max_steps: int = 1000
    gate_steps: int = 20
    gate_fraction: float = 0.95


@dataclass(eq=False)
class ExpertArtifacts:
    policy: np.ndarray
    measure: np.ndarray | None
    training_log: np.ndarray
    q: np.ndarray = field(default=None, repr=False)


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """One-hot argmax policy; ties go to the lowest action index."""
    pi = np.zeros_like(q)
    pi[np.arange(len(q)), np.argmax(q, axis=1)] = 1.0
    return pi


def steps_to_goal(world: WindyGridworld, policy: np.ndarray, max_steps: int) -> np.ndarray:
    """For a deterministic policy, steps needed from every cell (``max_steps + 1`` if never)."""
    nxt = world.next_state_table()
    actions = np.argmax(policy, axis=1)
    out = np.full(world.n_states, max_steps + 1)
    for s0 in range(world.n_states):
        s = s0
        for t in range(max_steps + 1):
            if s == world.goal_state:
                out[s0] = t
                break
            s = nxt[s, actions[s]]
    return out


def train_sarsa(world: WindyGridworld, config: SarsaConfig = SarsaConfig(), seed=None) -> ExpertArtifacts:
    """Tabular on-policy SARSA with epsilon-greedy exploration.

    Reward is -1 per step until the goal; episodes start at uniformly random
    non-goal cells so the greedy policy is trained everywhere. Raises
    :class:`ExpertQualityError` if the greedy policy reaches the goal within
    ``gate_steps`` from fewer than ``gate_fraction`` of start cells.
    """
    rng = np.random.default_rng(seed)
    nxt = world.next_state_table()
    n_states, n_actions = nxt.shape
    goal = world.goal_state
    starts = np.flatnonzero(np.arange(n_states) != goal)
    q = np.zeros((n_states, n_actions))
    lr, explore = config.learning_rate, config.exploration
    lengths = np.empty(config.episodes, dtype=np.int64)

    def act(s):
        if rng.random() < explore:
            return int(rng.integers(n_actions))
        row = q[s]
        best = np.flatnonzero(row == row.max())
        return int(best[rng.integers(len(best))])

    for ep in range(config.episodes):
        s = int(rng.choice(starts))
        a = act(s)
        t = 0
        while s != goal and t < config.max_steps:
            s2 = int(nxt[s, a])
            if s2 == goal:
                q[s, a] += lr * (-1.0 - q[s, a])
                s = s2
            else:
                a2 = act(s2)
                q[s, a] += lr * (-1.0 + q[s2, a2] - q[s, a])
                s, a = s2, a2
            t += 1
        lengths[ep] = t

    policy = greedy_policy(q)
    reach = steps_to_goal(world, policy, config.gate_steps)
    frac = float(np.mean(reach[starts] <= config.gate_steps))
    log.info("SARSA on wind %s: greedy policy reaches goal from %.1f%% of cells", world.wind, 100 * frac)
    if frac < config.gate_fraction:
        raise ExpertQualityError(
            f"greedy SARSA policy reaches the goal within {config.gate_steps} steps from only "
            f"{frac:.1%} of cells (need {config.gate_fraction:.0%})", lengths)
    return ExpertArtifacts(policy, None, lengths, q)


def expert_measure(mdp: Mdp, policy, n_traj: int = 200, horizon: int = 100, seed=None) -> np.ndarray:
    """Empirical discounted occupation measure from ``n_traj`` rollouts of ``horizon`` steps."""
    if n_traj < 1 or horizon < 1:
        raise ValueError("n_traj and horizon must be >= 1")
    states, actions = rollout_batch(mdp, policy, n_traj, horizon, seed)
    return empirical_occupation_batch(states, actions, mdp.n_states, mdp.n_actions, mdp.discount)


def evaluate_success(mdp: Mdp, policy, n_traj: int = 200, max_steps: int = 20, seed=None,
                     goal_state: int | None = None) -> int:
    """Number of rollouts from random non-goal starts that hit the goal within ``max_steps`` moves.

    ``goal_state`` defaults to the MDP's only absorbing state with zero initial probability.
    """
    if goal_state is None:
        goal_state = _find_goal(mdp)
    start = np.where(np.arange(mdp.n_states) == goal_state, 0.0, 1.0)
    start /= start.sum()
    states, _ = rollout_batch(mdp, policy, n_traj, max_steps + 1, seed, start_dist=start)
    return int(np.any(states == goal_state, axis=1).sum())


def _find_goal(mdp: Mdp) -> int:
    P = mdp.transition
    idx = np.arange(mdp.n_states)
    absorbing = np.all(P[idx, :, idx] == 1.0, axis=1)
    cands = np.flatnonzero(absorbing & (mdp.initial_dist == 0))
    if len(cands) != 1:
        raise ValueError("cannot infer a unique goal state; pass goal_state explicitly")
    return int(cands[0])


def sarsa_config_dict(config: SarsaConfig) -> dict:
    return asdict(config)
