"""Benchmark environment builders: gridworld, objectworld, pendulum.

Each builder compiles a declarative spec into a vector-reward TabularMDP plus
one feature vector per state (the GP input layout for that environment).
Builders are pure functions of (spec, seed) and safe to call concurrently.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .mdp import MDPError, ScalarizedMDP, TabularMDP

# Action order for the grid tasks: up, right, down, left.
GRID_MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


# ---------------------------------------------------------------------------
# Gridworld
# ---------------------------------------------------------------------------

@dataclass
class GridworldSpec:
    """N x N grid, four slippery actions, one wall, two terminal cells.

    Reward objectives are indicators: (living cell, positive terminal,
    negative terminal), so the weight vector (l, p, n) recovers the usual
    living/terminal rewards.
    """

    n: int = 5
    wall_cells: tuple = ((2, 2),)
    pos_terminal: tuple = (0, 4)
    neg_terminal: tuple = (1, 4)
    start: tuple = (4, 0)
    living_reward: float = -0.02
    pos_reward: float = 1.0
    neg_reward: float = -1.0
    slip_prob: float = 0.1
    gamma: float = 0.9

    def default_weights(self) -> np.ndarray:
        return np.array([self.living_reward, self.pos_reward, self.neg_reward])

    def validate(self) -> None:
        if self.n < 2:
            raise MDPError(f"grid side must be >= 2, got {self.n}")
        if not (0.0 <= self.slip_prob < 1.0):
            raise MDPError(f"slip_prob must lie in [0, 1), got {self.slip_prob}")
        cells = set(map(tuple, self.wall_cells))
        for name, cell in (("pos_terminal", self.pos_terminal),
                           ("neg_terminal", self.neg_terminal),
                           ("start", self.start)):
            r, c = cell
            if not (0 <= r < self.n and 0 <= c < self.n):
                raise MDPError(f"{name} {cell} outside the {self.n}x{self.n} grid")
            if tuple(cell) in cells:
                raise MDPError(f"{name} {cell} overlaps a wall cell")
        if tuple(self.pos_terminal) == tuple(self.neg_terminal):
            raise MDPError("terminal cells must be distinct")
        for cell in self.wall_cells:
            r, c = cell
            if not (0 <= r < self.n and 0 <= c < self.n):
                raise MDPError(f"wall cell {cell} outside the grid")


def build_gridworld(spec: GridworldSpec) -> tuple[TabularMDP, np.ndarray]:
    """Compile the gridworld spec. Features are (row, col) per state."""
    spec.validate()
    walls = set(map(tuple, spec.wall_cells))
    cells = [(r, c) for r in range(spec.n) for c in range(spec.n)
             if (r, c) not in walls]
    index = {cell: i for i, cell in enumerate(cells)}
    s_n, a_n, k_n = len(cells), 4, 4

    next_state = np.zeros((s_n, a_n, k_n), dtype=np.int64)
    prob = np.zeros((s_n, a_n, k_n))
    terminal = np.zeros(s_n, dtype=bool)
    terminal[index[tuple(spec.pos_terminal)]] = True
    terminal[index[tuple(spec.neg_terminal)]] = True

    def dest(cell, move):
        r, c = cell[0] + move[0], cell[1] + move[1]
        if not (0 <= r < spec.n and 0 <= c < spec.n) or (r, c) in walls:
            return cell  # blocked: stay in place
        return (r, c)

    for s, cell in enumerate(cells):
        if terminal[s]:
            continue
        for a in range(a_n):
            acc: dict[int, float] = {}
            for a_actual in range(a_n):
                p = 1.0 - spec.slip_prob if a_actual == a else spec.slip_prob / 3.0
                if p == 0.0:
                    continue
                j = index[dest(cell, GRID_MOVES[a_actual])]
                acc[j] = acc.get(j, 0.0) + p
            for k, (j, p) in enumerate(sorted(acc.items())):
                next_state[s, a, k] = j
                prob[s, a, k] = p

    rewards = np.zeros((3, s_n, a_n, k_n))
    rewards[0] = np.where(prob > 0, 1.0, 0.0)  # living indicator
    terminal_rewards = np.zeros((3, s_n))
    terminal_rewards[1, index[tuple(spec.pos_terminal)]] = 1.0
    terminal_rewards[2, index[tuple(spec.neg_terminal)]] = 1.0

    mdp = TabularMDP(next_state, prob, rewards, terminal_rewards, terminal,
                     gamma=spec.gamma)
    features = np.array(cells, dtype=np.float64)
    return mdp, features


def gridworld_state_index(spec: GridworldSpec, cell) -> int:
    """State index of a (row, col) cell under the builder's ordering."""
    walls = set(map(tuple, spec.wall_cells))
    cells = [(r, c) for r in range(spec.n) for c in range(spec.n)
             if (r, c) not in walls]
    return cells.index(tuple(cell))


def value_grid(spec: GridworldSpec, values: np.ndarray) -> np.ndarray:
    """Arrange per-state values on the n x n grid; wall cells become NaN."""
    walls = set(map(tuple, spec.wall_cells))
    grid = np.full((spec.n, spec.n), np.nan)
    i = 0
    for r in range(spec.n):
        for c in range(spec.n):
            if (r, c) in walls:
                continue
            grid[r, c] = values[i]
            i += 1
    return grid


# ---------------------------------------------------------------------------
# Objectworld
# ---------------------------------------------------------------------------

@dataclass
class ObjectworldSpec:
    """Grid with randomly placed colored objects.

    Reward objectives are state indicators: (positive region, negative
    region). The positive region is within 3 cells of an outer-color-0 object
    and within 2 cells of an outer-color-1 object; the negative region is
    within 3 cells of outer color 0 otherwise; everything else is zero.
    """

    n: int = 10
    n_objects: int = 15
    n_colors: int = 2
    seed: int = 0
    positive_reward: float = 1.0
    negative_reward: float = -1.0
    slip_prob: float = 0.1
    gamma: float = 0.9

    def default_weights(self) -> np.ndarray:
        return np.array([self.positive_reward, self.negative_reward])

    def validate(self) -> None:
        if self.n_colors < 2:
            raise MDPError("objectworld needs at least 2 colors")
        if self.n_objects > self.n * self.n:
            raise MDPError(
                f"{self.n_objects} objects do not fit in {self.n * self.n} cells"
            )
        if not (0.0 <= self.slip_prob < 1.0):
            raise MDPError(f"slip_prob must lie in [0, 1), got {self.slip_prob}")


def objectworld_layout(spec: ObjectworldSpec) -> dict:
    """Seeded object placement: cells plus inner/outer color assignments."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    flat = rng.choice(spec.n * spec.n, size=spec.n_objects, replace=False)
    cells = [(int(f // spec.n), int(f % spec.n)) for f in flat]
    outer = rng.integers(0, spec.n_colors, size=spec.n_objects)
    inner = rng.integers(0, spec.n_colors, size=spec.n_objects)
    return {
        "cells": cells,
        "outer_color": [int(c) for c in outer],
        "inner_color": [int(c) for c in inner],
    }


def _object_distances(spec: ObjectworldSpec, layout: dict) -> tuple[np.ndarray, np.ndarray]:
    """Per-state Euclidean distance to the nearest object of each outer and
    inner color, shape (S, C) each. Missing colors map to the grid diagonal."""
    coords = np.array(
        [(r, c) for r in range(spec.n) for c in range(spec.n)], dtype=np.float64
    )
    far = spec.n * np.sqrt(2.0)
    d_outer = np.full((len(coords), spec.n_colors), far)
    d_inner = np.full((len(coords), spec.n_colors), far)
    obj = np.array(layout["cells"], dtype=np.float64)
    dists = np.sqrt(((coords[:, None, :] - obj[None, :, :]) ** 2).sum(axis=2))
    for color in range(spec.n_colors):
        for which, d_arr in (("outer_color", d_outer), ("inner_color", d_inner)):
            mask = np.array(layout[which]) == color
            if mask.any():
                d_arr[:, color] = dists[:, mask].min(axis=1)
    return d_outer, d_inner


def build_objectworld(spec: ObjectworldSpec) -> tuple[TabularMDP, np.ndarray]:
    """Compile the objectworld spec.

    Features per state: Euclidean distances to the nearest object of each
    outer color followed by each inner color (length 2 * n_colors).
    """
    spec.validate()
    layout = objectworld_layout(spec)
    d_outer, d_inner = _object_distances(spec, layout)

    positive = (d_outer[:, 0] <= 3.0) & (d_outer[:, 1] <= 2.0)
    negative = (d_outer[:, 0] <= 3.0) & ~positive

    s_n, a_n, k_n = spec.n * spec.n, 4, 4
    next_state = np.zeros((s_n, a_n, k_n), dtype=np.int64)
    prob = np.zeros((s_n, a_n, k_n))

    def dest(r, c, move):
        rr, cc = r + move[0], c + move[1]
        if not (0 <= rr < spec.n and 0 <= cc < spec.n):
            return r * spec.n + c
        return rr * spec.n + cc

    for s in range(s_n):
        r, c = divmod(s, spec.n)
        for a in range(a_n):
            acc: dict[int, float] = {}
            for a_actual in range(a_n):
                p = 1.0 - spec.slip_prob if a_actual == a else spec.slip_prob / 3.0
                if p == 0.0:
                    continue
                j = dest(r, c, GRID_MOVES[a_actual])
                acc[j] = acc.get(j, 0.0) + p
            for k, (j, p) in enumerate(sorted(acc.items())):
                next_state[s, a, k] = j
                prob[s, a, k] = p

    # State-based indicators, constant over actions and successors.
    rewards = np.zeros((2, s_n, a_n, k_n))
    rewards[0] = np.where(prob > 0, positive[:, None, None], 0.0)
    rewards[1] = np.where(prob > 0, negative[:, None, None], 0.0)

    mdp = TabularMDP(
        next_state, prob, rewards,
        terminal_rewards=np.zeros((2, s_n)),
        terminal=np.zeros(s_n, dtype=bool),
        gamma=spec.gamma,
    )
    features = np.concatenate([d_outer, d_inner], axis=1)
    return mdp, features


def objectworld_regions(spec: ObjectworldSpec) -> tuple[np.ndarray, np.ndarray]:
    """(positive mask, negative mask) over the flat state ordering."""
    layout = objectworld_layout(spec)
    d_outer, _ = _object_distances(spec, layout)
    positive = (d_outer[:, 0] <= 3.0) & (d_outer[:, 1] <= 2.0)
    negative = (d_outer[:, 0] <= 3.0) & ~positive
    return positive, negative


# ---------------------------------------------------------------------------
# Pendulum
# ---------------------------------------------------------------------------

@dataclass
class PendulumSpec:
    """Torque-limited pendulum swing-up discretized on a (theta, thetadot) grid.

    Reward objectives are (-theta^2, -thetadot^2, -torque^2); scalarizing with
    (w1, w2, w3) recovers the usual quadratic cost. One semi-implicit Euler
    step per action; the continuous successor is spread over the surrounding
    grid nodes with bilinear weights (periodic in theta, clamped in thetadot).
    """

    theta_bins: int = 51
    thetadot_bins: int = 51
    dt: float = 0.05
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    max_speed: float = 8.0
    max_torque: float = 2.0
    n_torques: int = 5
    episode_limit: int = 1000
    weights: tuple = (1.0, 0.1, 0.001)
    gamma: float = 0.9

    def validate(self) -> None:
        if self.theta_bins < 3 or self.thetadot_bins < 3:
            raise MDPError("both bin counts must be >= 3")
        if self.n_torques < 2:
            raise MDPError("need at least 2 torque levels")
        if self.dt <= 0 or self.max_speed <= 0:
            raise MDPError("dt and max_speed must be positive")

    def theta_values(self) -> np.ndarray:
        # Periodic grid with node j at wrap(2*pi*j/B), so the upright
        # equilibrium theta = 0 is always an exact node.
        b = self.theta_bins
        return _wrap_angle(2.0 * np.pi * np.arange(b) / b)

    def thetadot_values(self) -> np.ndarray:
        return np.linspace(-self.max_speed, self.max_speed, self.thetadot_bins)

    def torque_values(self) -> np.ndarray:
        return np.linspace(-self.max_torque, self.max_torque, self.n_torques)

    def default_weights(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def _wrap_angle(theta: np.ndarray) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def build_pendulum(spec: PendulumSpec) -> tuple[TabularMDP, np.ndarray]:
    """Compile the pendulum spec. Features are (cos theta, sin theta, thetadot)."""
    spec.validate()
    thetas = spec.theta_values()
    thetadots = spec.thetadot_values()
    torques = spec.torque_values()
    b, m, a_n = spec.theta_bins, spec.thetadot_bins, spec.n_torques
    s_n, k_n = b * m, 4

    th = np.repeat(thetas, m)        # (S,)
    thd = np.tile(thetadots, b)      # (S,)

    g, mass, ln, dt = spec.gravity, spec.mass, spec.length, spec.dt
    u = torques[None, :]             # (1, A)
    thd_new = thd[:, None] + (
        1.5 * g / ln * np.sin(th)[:, None] + 3.0 / (mass * ln**2) * u
    ) * dt
    thd_new = np.clip(thd_new, -spec.max_speed, spec.max_speed)
    th_new = th[:, None] + thd_new * dt

    d_theta = 2.0 * np.pi / b
    f_th = np.mod(th_new / d_theta, b)
    i0 = np.floor(f_th).astype(np.int64) % b
    w_th = f_th - np.floor(f_th)
    i1 = (i0 + 1) % b

    d_thd = 2.0 * spec.max_speed / (m - 1)
    f_thd = np.clip((thd_new + spec.max_speed) / d_thd, 0.0, m - 1 - 1e-12)
    j0 = np.floor(f_thd).astype(np.int64)
    w_thd = f_thd - j0
    j1 = j0 + 1

    next_state = np.stack(
        [i0 * m + j0, i0 * m + j1, i1 * m + j0, i1 * m + j1], axis=2
    )
    prob = np.stack(
        [
            (1 - w_th) * (1 - w_thd),
            (1 - w_th) * w_thd,
            w_th * (1 - w_thd),
            w_th * w_thd,
        ],
        axis=2,
    )
    # Renormalize away accumulated rounding so each row sums to 1 exactly.
    prob = prob / prob.sum(axis=2, keepdims=True)

    rewards = np.zeros((3, s_n, a_n, k_n))
    rewards[0] = np.where(prob > 0, -(_wrap_angle(th) ** 2)[:, None, None], 0.0)
    rewards[1] = np.where(prob > 0, -(thd**2)[:, None, None], 0.0)
    rewards[2] = np.where(prob > 0, -(torques**2)[None, :, None], 0.0)

    mdp = TabularMDP(
        next_state, prob, rewards,
        terminal_rewards=np.zeros((3, s_n)),
        terminal=np.zeros(s_n, dtype=bool),
        gamma=spec.gamma,
    )
    features = np.stack([np.cos(th), np.sin(th), thd], axis=1)
    return mdp, features


def pendulum_state_index(spec: PendulumSpec, theta: float, thetadot: float) -> int:
    """Nearest grid state to a continuous (theta, thetadot)."""
    b, m = spec.theta_bins, spec.thetadot_bins
    d_theta = 2.0 * np.pi / b
    i = int(np.rint(theta / d_theta)) % b
    d_thd = 2.0 * spec.max_speed / (m - 1)
    j = int(np.clip(np.rint((thetadot + spec.max_speed) / d_thd), 0, m - 1))
    return i * m + j


# ---------------------------------------------------------------------------
# Rollouts
# ---------------------------------------------------------------------------

def rollout(
    smdp: ScalarizedMDP,
    policy_or_q: np.ndarray,
    start_state: int,
    horizon: int = 1000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample a trajectory under a fixed policy (or greedy on a Q table).

    Returns (states, actions, rewards) arrays. Terminates at a terminal state
    or the horizon; deterministic given the seed.
    """
    if not (0 <= start_state < smdp.n_states):
        raise MDPError(f"start state {start_state} out of range")
    arr = np.asarray(policy_or_q)
    if arr.ndim == 2:
        from .mdp import greedy_policy

        policy = greedy_policy(arr)
    else:
        policy = arr.astype(np.int64)
    rng = np.random.default_rng(seed)
    k_n = smdp.prob.shape[2]
    states, actions, rewards = [], [], []
    s = int(start_state)
    for _ in range(horizon):
        if smdp.terminal[s]:
            break
        a = int(policy[s])
        k = rng.choice(k_n, p=smdp.prob[s, a])
        states.append(s)
        actions.append(a)
        rewards.append(smdp.reward[s, a, k])
        s = int(smdp.next_state[s, a, k])
    return (
        np.array(states, dtype=np.int64),
        np.array(actions, dtype=np.int64),
        np.array(rewards, dtype=np.float64),
    )
