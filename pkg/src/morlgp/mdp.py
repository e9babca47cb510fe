"""Vector-reward tabular MDPs: scalarization, exact solvers, weight-difference bounds.

Transitions are stored in a padded sparse layout: for every (state, action)
there are up to K successor slots, each a (next_state, probability) pair.
Unused slots carry probability 0 and reward 0. Terminal states have no
outgoing probability mass; their value is pinned to the scalarized terminal
reward and entering one ends an episode.

All containers are treated as immutable after construction; every solver is a
pure function of its inputs, so concurrent solves are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

PROB_ATOL = 1e-12


class MDPError(ValueError):
    """Raised on malformed MDP inputs (dimension mismatches, bad probabilities)."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative or direct solve cannot produce a solution."""


@dataclass
class TabularMDP:
    """Finite MDP with one reward table per objective.

    next_state       : int array (S, A, K) -- successor indices
    prob             : float array (S, A, K) -- transition probabilities
    rewards          : float array (O, S, A, K) -- per-objective transition rewards
    terminal_rewards : float array (O, S) -- per-objective terminal values
    terminal         : bool array (S,)
    gamma            : discount in [0, 1)
    """

    next_state: np.ndarray
    prob: np.ndarray
    rewards: np.ndarray
    terminal_rewards: np.ndarray
    terminal: np.ndarray
    gamma: float = 0.9

    def __post_init__(self):
        self.next_state = np.asarray(self.next_state, dtype=np.int64)
        self.prob = np.asarray(self.prob, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.terminal_rewards = np.asarray(self.terminal_rewards, dtype=np.float64)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        if self.next_state.ndim != 3 or self.prob.shape != self.next_state.shape:
            raise MDPError("next_state and prob must both have shape (S, A, K)")
        s, a, k = self.next_state.shape
        if self.rewards.ndim != 4 or self.rewards.shape[1:] != (s, a, k):
            raise MDPError(
                f"rewards must have shape (O, {s}, {a}, {k}), got {self.rewards.shape}"
            )
        o = self.rewards.shape[0]
        if self.terminal_rewards.shape != (o, s):
            raise MDPError(
                f"terminal_rewards must have shape ({o}, {s}), "
                f"got {self.terminal_rewards.shape}"
            )
        if self.terminal.shape != (s,):
            raise MDPError(f"terminal mask must have shape ({s},)")
        if not (0.0 <= self.gamma <= 1.0):
            raise MDPError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not np.isfinite(self.rewards).all():
            raise MDPError("all reward component entries must be finite")
        if not np.isfinite(self.terminal_rewards).all():
            raise MDPError("all terminal reward entries must be finite")
        if (self.prob < 0).any():
            raise MDPError("transition probabilities must be non-negative")
        row_sums = self.prob.sum(axis=2)
        nonterm = ~self.terminal
        if not np.allclose(row_sums[nonterm], 1.0, rtol=0, atol=PROB_ATOL):
            bad = np.argwhere(np.abs(row_sums - 1.0) > PROB_ATOL)
            raise MDPError(
                f"transition probabilities for non-terminal (s, a) must sum to 1; "
                f"first offender (s, a) = {tuple(bad[0])}"
            )
        if not (row_sums[self.terminal] == 0.0).all():
            raise MDPError("terminal states must have no outgoing transitions")
        if (self.next_state < 0).any() or (self.next_state >= s).any():
            raise MDPError("next_state indices out of range")

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_actions(self) -> int:
        return self.next_state.shape[1]

    @property
    def n_successors(self) -> int:
        return self.next_state.shape[2]

    @property
    def n_objectives(self) -> int:
        return self.rewards.shape[0]


@dataclass
class ScalarizedMDP:
    """Single-reward view of a TabularMDP for one weight vector."""

    next_state: np.ndarray
    prob: np.ndarray
    reward: np.ndarray          # (S, A, K)
    terminal_values: np.ndarray  # (S,)
    terminal: np.ndarray
    gamma: float

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_actions(self) -> int:
        return self.next_state.shape[1]


@dataclass
class ShapingSpec:
    """Goal-proximity shaping: `bonus` whenever the step strictly reduces
    `distance` to `goal_state`."""

    goal_state: int
    distance: Callable[[int, int], float]
    bonus: float


def scalarize(mdp: TabularMDP, w) -> ScalarizedMDP:
    """Collapse the objective rewards into one table R = sum_i w_i r_i.

    Summation runs in objective-index order (fixed fp association). The input
    MDP is not modified.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != mdp.n_objectives:
        raise MDPError(
            f"weight vector has length {w.size} but the MDP has "
            f"{mdp.n_objectives} objectives"
        )
    if not np.isfinite(w).all():
        raise MDPError("weight vector entries must be finite")
    reward = w[0] * mdp.rewards[0]
    terminal_values = w[0] * mdp.terminal_rewards[0]
    for i in range(1, mdp.n_objectives):
        reward = reward + w[i] * mdp.rewards[i]
        terminal_values = terminal_values + w[i] * mdp.terminal_rewards[i]
    return ScalarizedMDP(
        next_state=mdp.next_state,
        prob=mdp.prob,
        reward=reward,
        terminal_values=terminal_values,
        terminal=mdp.terminal,
        gamma=mdp.gamma,
    )


def _backup(smdp: ScalarizedMDP, v: np.ndarray) -> np.ndarray:
    """One-step Bellman backup Q(s,a) = sum_k p * (r + gamma * v[next])."""
    return np.einsum(
        "sak,sak->sa",
        smdp.prob,
        smdp.reward + smdp.gamma * v[smdp.next_state],
    )


def value_iteration(
    smdp: ScalarizedMDP, tol: float = 1e-9, max_iter: int = 100_000
) -> tuple[np.ndarray, int]:
    """Synchronous value iteration to a sup-norm residual of `tol`.

    Returns (V, iterations). Deterministic given inputs: full synchronous
    sweeps in fixed state order.
    """
    if tol <= 0:
        raise MDPError(f"tol must be positive, got {tol}")
    term = smdp.terminal
    v = np.zeros(smdp.n_states)
    v[term] = smdp.terminal_values[term]
    for it in range(1, max_iter + 1):
        q = _backup(smdp, v)
        v_new = q.max(axis=1)
        v_new[term] = smdp.terminal_values[term]
        residual = float(np.max(np.abs(v_new - v))) if v.size else 0.0
        v = v_new
        if residual <= tol:
            return v, it
    raise ConvergenceError(
        f"value iteration did not converge in {max_iter} sweeps "
        f"(final residual {residual:.3e}, tol {tol:.3e})"
    )


def q_from_value(smdp: ScalarizedMDP, v: np.ndarray) -> np.ndarray:
    """One-step backup of a (near-)fixed-point V into Q(s,a).

    Terminal rows are pinned to the terminal value for every action.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (smdp.n_states,):
        raise MDPError(f"V must have shape ({smdp.n_states},), got {v.shape}")
    q = _backup(smdp, v)
    q[smdp.terminal, :] = smdp.terminal_values[smdp.terminal, None]
    return q


def greedy_policy(q: np.ndarray, tie_eps: float = 1e-9) -> np.ndarray:
    """Lowest-index action within tie_eps of the per-state maximum."""
    q = np.asarray(q, dtype=np.float64)
    if not np.isfinite(q).all():
        raise MDPError("Q must be finite")
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tie_eps, axis=1)


def policy_evaluation(smdp: ScalarizedMDP, policy: np.ndarray) -> np.ndarray:
    """Exact V_pi by direct solve of the linear Bellman system."""
    policy = np.asarray(policy, dtype=np.int64)
    s_n = smdp.n_states
    if policy.shape != (s_n,):
        raise MDPError(f"policy must have shape ({s_n},), got {policy.shape}")
    if (policy < 0).any() or (policy >= smdp.n_actions).any():
        raise MDPError("policy contains invalid action indices")
    rows = np.arange(s_n)
    p = smdp.prob[rows, policy]            # (S, K)
    nxt = smdp.next_state[rows, policy]    # (S, K)
    r_pi = np.sum(p * smdp.reward[rows, policy], axis=1)
    mat = np.eye(s_n)
    np.add.at(mat, (np.repeat(rows, p.shape[1]), nxt.ravel()),
              -smdp.gamma * p.ravel())
    term = smdp.terminal
    mat[term, :] = 0.0
    mat[term, np.flatnonzero(term)] = 1.0
    rhs = r_pi
    rhs[term] = smdp.terminal_values[term]
    try:
        v = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            f"policy-evaluation system is singular (gamma={smdp.gamma}): {exc}"
        ) from exc
    return v


def shape_reward(mdp: TabularMDP, spec: ShapingSpec) -> TabularMDP:
    """Append a weight-independent goal-proximity reward component.

    The new component equals spec.bonus on transitions that strictly reduce
    the distance to the goal state, and 0 elsewhere.
    """
    if not (0 <= spec.goal_state < mdp.n_states):
        raise MDPError(f"goal state {spec.goal_state} out of range")
    if not np.isfinite(spec.bonus):
        raise MDPError("shaping bonus must be finite")
    d = np.array([spec.distance(s, spec.goal_state) for s in range(mdp.n_states)])
    if (d < 0).any():
        raise MDPError("distance function must be non-negative")
    if d[spec.goal_state] != 0.0:
        raise MDPError("distance(goal, goal) must be 0")
    closer = d[mdp.next_state] < d[:, None, None]       # (S, A, K)
    component = np.where((mdp.prob > 0) & closer, spec.bonus, 0.0)
    rewards = np.concatenate([mdp.rewards, component[None]], axis=0)
    terminal_rewards = np.concatenate(
        [mdp.terminal_rewards, np.zeros((1, mdp.n_states))], axis=0
    )
    return replace(mdp, rewards=rewards, terminal_rewards=terminal_rewards)


def _reward_sup(mdp: TabularMDP) -> np.ndarray:
    """Per-objective sup of |reward| over realizable transitions and terminals."""
    trans_max = np.abs(mdp.rewards * (mdp.prob > 0)).max(axis=(1, 2, 3))
    term_max = (
        np.abs(mdp.terminal_rewards).max(axis=1)
        if mdp.n_states
        else np.zeros(mdp.n_objectives)
    )
    return np.maximum(trans_max, term_max)


def value_diff_bound(mdp: TabularMDP, w, w_prime) -> float:
    """Closed-form upper bound on max_s |V*(s|w') - V*(s|w)|:
    sum_i |dw_i| * sup|r_i| / (1 - gamma)."""
    w = np.asarray(w, dtype=np.float64)
    w_prime = np.asarray(w_prime, dtype=np.float64)
    if w.shape != w_prime.shape or w.shape != (mdp.n_objectives,):
        raise MDPError(
            f"weight vectors must both have length {mdp.n_objectives}, "
            f"got {w.size} and {w_prime.size}"
        )
    if mdp.gamma >= 1.0:
        raise MDPError("value-difference bound is unbounded at gamma = 1")
    dw = np.abs(w_prime - w)
    return float(np.dot(dw, _reward_sup(mdp)) / (1.0 - mdp.gamma))


def q_diff_bound(mdp: TabularMDP, w, w_prime) -> float:
    """Upper bound on max_{s,a} |Q*(s,a|w') - Q*(s,a|w)|:
    sum_i |dw_i| * sup|r_i| + gamma * value_diff_bound."""
    b_v = value_diff_bound(mdp, w, w_prime)
    dw = np.abs(np.asarray(w_prime, dtype=np.float64) - np.asarray(w, dtype=np.float64))
    immediate = float(np.dot(dw, _reward_sup(mdp)))
    return immediate + mdp.gamma * b_v


def solve(mdp: TabularMDP, w, tol: float = 1e-9, max_iter: int = 100_000):
    """Convenience: scalarize and solve, returning (V, Q, policy)."""
    smdp = scalarize(mdp, w)
    v, _ = value_iteration(smdp, tol=tol, max_iter=max_iter)
    q = q_from_value(smdp, v)
    return v, q, greedy_policy(q)
