import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morlgp.envs import GridworldSpec, build_gridworld, gridworld_state_index
from morlgp.mdp import (
    ConvergenceError,
    MDPError,
    ScalarizedMDP,
    ShapingSpec,
    TabularMDP,
    greedy_policy,
    policy_evaluation,
    q_diff_bound,
    q_from_value,
    scalarize,
    shape_reward,
    solve,
    value_diff_bound,
    value_iteration,
)

from oracles import enumerate_optimal_values


def make_self_loop(reward=1.0, gamma=0.9, n_objectives=1):
    """One non-terminal state looping onto itself."""
    next_state = np.zeros((1, 1, 1), dtype=np.int64)
    prob = np.ones((1, 1, 1))
    rewards = np.full((n_objectives, 1, 1, 1), reward)
    return TabularMDP(next_state, prob, rewards,
                      terminal_rewards=np.zeros((n_objectives, 1)),
                      terminal=np.array([False]), gamma=gamma)


def make_chain(gamma=0.9):
    """Two states: 0 steps to 1 (reward 2), 1 is terminal with value 5."""
    next_state = np.zeros((2, 1, 1), dtype=np.int64)
    next_state[0, 0, 0] = 1
    prob = np.zeros((2, 1, 1))
    prob[0, 0, 0] = 1.0
    rewards = np.zeros((1, 2, 1, 1))
    rewards[0, 0, 0, 0] = 2.0
    terminal_rewards = np.array([[0.0, 5.0]])
    return TabularMDP(next_state, prob, rewards, terminal_rewards,
                      terminal=np.array([False, True]), gamma=gamma)


@pytest.fixture(scope="module")
def gridworld():
    spec = GridworldSpec()
    mdp, features = build_gridworld(spec)
    return spec, mdp, features


class TestScalarize:
    def test_unit_vector_recovers_component(self, gridworld):
        _, mdp, _ = gridworld
        for i in range(mdp.n_objectives):
            w = np.zeros(mdp.n_objectives)
            w[i] = 1.0
            smdp = scalarize(mdp, w)
            assert np.array_equal(smdp.reward, mdp.rewards[i])
            assert np.array_equal(smdp.terminal_values, mdp.terminal_rewards[i])

    def test_zero_weights_zero_reward(self, gridworld):
        _, mdp, _ = gridworld
        smdp = scalarize(mdp, np.zeros(mdp.n_objectives))
        assert not smdp.reward.any()
        assert not smdp.terminal_values.any()

    def test_gridworld_default_weights(self, gridworld):
        spec, mdp, _ = gridworld
        smdp = scalarize(mdp, (-0.02, 1.0, -1.0))
        nonterm = ~mdp.terminal
        realized = smdp.reward[nonterm][mdp.prob[nonterm] > 0]
        assert np.all(realized == -0.02)
        pos = gridworld_state_index(spec, spec.pos_terminal)
        neg = gridworld_state_index(spec, spec.neg_terminal)
        assert smdp.terminal_values[pos] == 1.0
        assert smdp.terminal_values[neg] == -1.0

    def test_dimension_mismatch_names_both_lengths(self, gridworld):
        _, mdp, _ = gridworld
        with pytest.raises(MDPError, match="length 2.*3 objectives"):
            scalarize(mdp, [0.1, 0.2])

    def test_leaves_input_unmodified(self, gridworld):
        _, mdp, _ = gridworld
        before = mdp.rewards.copy()
        scalarize(mdp, (-0.5, 2.0, -3.0))
        assert np.array_equal(mdp.rewards, before)

    # Weights drawn from a dyadic grid so every partial sum is exactly
    # representable and the linearity identity holds with no rounding.
    @given(st.lists(st.integers(-64, 64), min_size=3, max_size=3),
           st.lists(st.integers(-64, 64), min_size=3, max_size=3),
           st.integers(-8, 8), st.integers(-8, 8))
    @settings(max_examples=25, deadline=None)
    def test_linearity_on_dyadic_weights(self, wi, wj, a, b):
        spec = GridworldSpec()
        mdp, _ = build_gridworld(spec)
        w = np.array(wi) / 64.0
        w_prime = np.array(wj) / 64.0
        combo = scalarize(mdp, a * w + b * w_prime)
        left = a * scalarize(mdp, w).reward + b * scalarize(mdp, w_prime).reward
        assert np.allclose(combo.reward, left, rtol=1e-12, atol=1e-12)


class TestValueIteration:
    def test_geometric_series(self):
        mdp = make_self_loop(reward=1.0, gamma=0.9)
        v, _ = value_iteration(scalarize(mdp, [1.0]), tol=1e-12)
        assert v[0] == pytest.approx(10.0, abs=1e-9)

    def test_zero_rewards(self, gridworld):
        _, mdp, _ = gridworld
        v, _ = value_iteration(scalarize(mdp, np.zeros(3)))
        assert np.allclose(v, 0.0, atol=1e-9)

    def test_terminal_convention(self):
        mdp = make_chain()
        v, _ = value_iteration(scalarize(mdp, [1.0]))
        assert v[1] == 5.0
        assert v[0] == pytest.approx(2.0 + 0.9 * 5.0, abs=1e-8)

    def test_matches_policy_enumeration_oracle(self):
        spec = GridworldSpec(n=3, wall_cells=(), pos_terminal=(0, 2),
                             neg_terminal=(1, 2), start=(2, 0))
        mdp, _ = build_gridworld(spec)
        smdp = scalarize(mdp, (-0.02, 1.0, -1.0))
        v, _ = value_iteration(smdp, tol=1e-12)
        oracle = enumerate_optimal_values(smdp)
        assert np.max(np.abs(v - oracle)) < 1e-8

    def test_nonconvergence_reports_residual(self):
        mdp = make_self_loop(reward=1.0, gamma=0.9)
        with pytest.raises(ConvergenceError, match="residual"):
            value_iteration(scalarize(mdp, [1.0]), tol=1e-12, max_iter=3)

    def test_contraction(self, gridworld):
        _, mdp, _ = gridworld
        smdp = scalarize(mdp, (-0.3, 2.0, -1.0))
        from morlgp.mdp import _backup

        v = np.zeros(mdp.n_states)
        v[mdp.terminal] = smdp.terminal_values[mdp.terminal]
        diffs = []
        for _ in range(30):
            v_new = _backup(smdp, v).max(axis=1)
            v_new[mdp.terminal] = smdp.terminal_values[mdp.terminal]
            diffs.append(np.max(np.abs(v_new - v)))
            v = v_new
        for prev, cur in zip(diffs[1:], diffs[2:]):
            assert cur <= mdp.gamma * prev + 1e-12

    def test_midpoint_convexity_in_weights(self, gridworld):
        _, mdp, _ = gridworld
        rng = np.random.default_rng(3)
        for _ in range(10):
            w = rng.uniform(-2, 2, 3)
            w_prime = rng.uniform(-2, 2, 3)
            v_a, _ = value_iteration(scalarize(mdp, w))
            v_b, _ = value_iteration(scalarize(mdp, w_prime))
            v_mid, _ = value_iteration(scalarize(mdp, (w + w_prime) / 2))
            assert np.all(v_mid <= 0.5 * (v_a + v_b) + 2e-9)


class TestQFromValue:
    def test_terminal_rows_pinned(self):
        mdp = make_chain()
        smdp = scalarize(mdp, [1.0])
        v, _ = value_iteration(smdp)
        q = q_from_value(smdp, v)
        assert np.all(q[1, :] == 5.0)

    def test_myopic_at_gamma_zero(self):
        mdp = make_self_loop(reward=3.0, gamma=0.0)
        smdp = scalarize(mdp, [1.0])
        v, _ = value_iteration(smdp)
        q = q_from_value(smdp, v)
        assert q[0, 0] == pytest.approx(3.0)

    def test_hand_computed_backup(self):
        mdp = make_chain()
        smdp = scalarize(mdp, [1.0])
        q = q_from_value(smdp, np.array([6.5, 5.0]))
        assert q[0, 0] == pytest.approx(2.0 + 0.9 * 5.0)

    def test_consistent_with_value(self, gridworld):
        _, mdp, _ = gridworld
        smdp = scalarize(mdp, (-0.04, 1.0, -2.0))
        v, _ = value_iteration(smdp, tol=1e-9)
        q = q_from_value(smdp, v)
        assert np.max(np.abs(q.max(axis=1) - v)) <= 2e-9


class TestGreedyPolicy:
    def test_tie_breaks_to_lowest_index(self):
        q = np.array([[0.1, 0.9, 0.9]])
        assert greedy_policy(q, tie_eps=1e-9)[0] == 1

    def test_strictly_dominant_action(self):
        q = np.array([[0.0, 2.0, 1.0], [3.0, -1.0, 0.0]])
        assert list(greedy_policy(q)) == [1, 0]

    def test_living_reward_changes_policy(self, gridworld):
        _, mdp, _ = gridworld
        _, _, pol_free = solve(mdp, (0.0, 1.0, -1.0))
        _, _, pol_rush = solve(mdp, (-0.5, 1.0, -1.0))
        assert np.any(pol_free != pol_rush)


class TestPolicyEvaluation:
    def test_optimal_policy_recovers_v_star(self, gridworld):
        _, mdp, _ = gridworld
        smdp = scalarize(mdp, (-0.02, 1.0, -1.0))
        v, _ = value_iteration(smdp, tol=1e-9)
        policy = greedy_policy(q_from_value(smdp, v))
        v_pi = policy_evaluation(smdp, policy)
        assert np.max(np.abs(v_pi - v)) <= 2e-9

    def test_single_action_equals_value_iteration(self):
        mdp = make_chain()
        smdp = scalarize(mdp, [1.0])
        v, _ = value_iteration(smdp, tol=1e-12)
        v_pi = policy_evaluation(smdp, np.zeros(2, dtype=int))
        assert np.allclose(v, v_pi, atol=1e-9)

    def test_closed_form_chain(self):
        # Self-loop with reward 2 at gamma 0.5: V = 2 / (1 - 0.5) = 4.
        mdp = make_self_loop(reward=2.0, gamma=0.5)
        v_pi = policy_evaluation(scalarize(mdp, [1.0]), np.array([0]))
        assert v_pi[0] == pytest.approx(4.0)

    def test_singular_system_reported(self):
        mdp = make_self_loop(reward=1.0, gamma=1.0)
        with pytest.raises(ConvergenceError, match="singular"):
            policy_evaluation(scalarize(mdp, [1.0]), np.array([0]))

    def test_invalid_policy_rejected(self):
        mdp = make_chain()
        with pytest.raises(MDPError, match="invalid action"):
            policy_evaluation(scalarize(mdp, [1.0]), np.array([5, 0]))


def manhattan(features):
    def dist(s, t):
        return float(np.abs(features[s] - features[t]).sum())

    return dist


class TestShapeReward:
    def test_zero_bonus_identity(self, gridworld):
        spec, mdp, features = gridworld
        goal = gridworld_state_index(spec, spec.pos_terminal)
        shaped = shape_reward(mdp, ShapingSpec(goal, manhattan(features), 0.0))
        assert shaped.n_objectives == mdp.n_objectives + 1
        assert not shaped.rewards[-1].any()

    def test_step_toward_goal_earns_bonus(self, gridworld):
        spec, mdp, features = gridworld
        goal = gridworld_state_index(spec, spec.pos_terminal)
        shaped = shape_reward(mdp, ShapingSpec(goal, manhattan(features), 0.25))
        comp = shaped.rewards[-1]
        d = np.abs(features - features[goal]).sum(axis=1)
        closer = d[mdp.next_state] < d[:, None, None]
        assert np.array_equal(comp == 0.25, closer & (mdp.prob > 0))

    def test_shaping_difference_constant_across_weights(self):
        spec = GridworldSpec(n=4, wall_cells=(), pos_terminal=(0, 3),
                             neg_terminal=(1, 3), start=(3, 0))
        mdp, features = build_gridworld(spec)
        goal = gridworld_state_index(spec, spec.pos_terminal)
        shaped = shape_reward(mdp, ShapingSpec(goal, manhattan(features), 0.5))
        rng = np.random.default_rng(11)
        diffs = []
        for _ in range(4):
            w = rng.integers(-16, 16, size=3) / 16.0  # dyadic: exact sums
            r_base = scalarize(mdp, w).reward
            r_shaped = scalarize(shaped, np.append(w, 1.0)).reward
            diffs.append(r_shaped - r_base)
        for d in diffs[1:]:
            assert np.array_equal(d, diffs[0])

    def test_bad_goal_rejected(self, gridworld):
        _, mdp, features = gridworld
        with pytest.raises(MDPError, match="out of range"):
            shape_reward(mdp, ShapingSpec(999, manhattan(features), 1.0))


class TestWeightDiffBounds:
    def test_zero_delta(self, gridworld):
        _, mdp, _ = gridworld
        w = np.array([-0.02, 1.0, -1.0])
        assert value_diff_bound(mdp, w, w) == 0.0
        assert q_diff_bound(mdp, w, w) == 0.0

    def test_closed_form_single_objective(self):
        mdp = make_self_loop(reward=1.0, gamma=0.9)
        assert value_diff_bound(mdp, [1.0], [1.1]) == pytest.approx(1.0)

    def test_q_bound_myopic_reduction(self):
        mdp = make_self_loop(reward=1.0, gamma=0.0)
        assert q_diff_bound(mdp, [1.0], [1.3]) == pytest.approx(0.3)

    def test_bounds_hold_on_gridworld_living_change(self, gridworld):
        _, mdp, _ = gridworld
        w = np.array([-0.2, 1.0, -1.0])
        w_prime = np.array([-0.3, 1.0, -1.0])
        v_a, q_a, _ = solve(mdp, w)
        v_b, q_b, _ = solve(mdp, w_prime)
        assert np.max(np.abs(v_b - v_a)) <= value_diff_bound(mdp, w, w_prime) + 1e-8
        assert np.max(np.abs(q_b - q_a)) <= q_diff_bound(mdp, w, w_prime) + 1e-8

    def test_bounds_hold_on_negative_terminal_change(self, gridworld):
        _, mdp, _ = gridworld
        w = np.array([-0.02, 1.0, -2.0])
        w_prime = np.array([-0.02, 1.0, -3.0])
        _, q_a, _ = solve(mdp, w)
        _, q_b, _ = solve(mdp, w_prime)
        assert np.max(np.abs(q_b - q_a)) <= q_diff_bound(mdp, w, w_prime) + 1e-8

    def test_unbounded_at_gamma_one(self):
        mdp = make_self_loop(reward=1.0, gamma=1.0)
        with pytest.raises(MDPError, match="unbounded"):
            value_diff_bound(mdp, [1.0], [2.0])


class TestValidation:
    def test_bad_probabilities_rejected(self):
        next_state = np.zeros((1, 1, 1), dtype=np.int64)
        prob = np.full((1, 1, 1), 0.7)
        with pytest.raises(MDPError, match="sum to 1"):
            TabularMDP(next_state, prob, np.zeros((1, 1, 1, 1)),
                       np.zeros((1, 1)), np.array([False]))

    def test_nonfinite_reward_rejected(self):
        next_state = np.zeros((1, 1, 1), dtype=np.int64)
        prob = np.ones((1, 1, 1))
        with pytest.raises(MDPError, match="finite"):
            TabularMDP(next_state, prob, np.full((1, 1, 1, 1), np.inf),
                       np.zeros((1, 1)), np.array([False]))
