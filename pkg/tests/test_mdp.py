"""Exact-solver and rollout tests on hand-solvable MDPs."""
import numpy as np
import pytest

from oversight_game import (
    BasePolicy,
    Mdp,
    evaluate_policy,
    rollout,
    value_iteration,
)
from oversight_game.mdp import deterministic_next


def chain3(gamma=0.9):
    """0 -> 1 -> 2 (terminal), rewards 1 and 2 on the way, zero at the end."""
    kernel = np.zeros((3, 1, 3))
    kernel[0, 0, 1] = 1.0
    kernel[1, 0, 2] = 1.0
    kernel[2, 0, 2] = 1.0
    reward = np.array([[1.0], [2.0], [0.0]])
    return Mdp(kernel=kernel, reward=reward, gamma=gamma, start=0, terminals={2})


def coin_flip(gamma=0.8):
    """State 0 pays 1 and moves to the terminal with probability 1/2."""
    kernel = np.zeros((2, 1, 2))
    kernel[0, 0, 0] = 0.5
    kernel[0, 0, 1] = 0.5
    kernel[1, 0, 1] = 1.0
    reward = np.array([[1.0], [0.0]])
    return Mdp(kernel=kernel, reward=reward, gamma=gamma, start=0, terminals={1})


def test_evaluate_policy_chain_hand_values():
    mdp = chain3()
    pol = BasePolicy.deterministic([0, 0, 0], 1)
    vals = evaluate_policy(mdp, pol)
    # V(1) = 2, V(0) = 1 + 0.9 * 2 = 2.8, worked by hand
    np.testing.assert_allclose(vals.v, [2.8, 2.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(vals.q[:, 0], [2.8, 2.0, 0.0], atol=1e-12)


def test_evaluate_policy_stochastic_fixed_point():
    # V(0) = 1 + 0.8 * 0.5 * V(0), so V(0) = 1 / 0.6 = 5/3
    vals = evaluate_policy(coin_flip(), BasePolicy.deterministic([0, 0], 1))
    np.testing.assert_allclose(vals.v[0], 5.0 / 3.0, atol=1e-12)


def test_evaluate_policy_iterative_matches_direct():
    mdp = coin_flip()
    pol = BasePolicy.deterministic([0, 0], 1)
    direct = evaluate_policy(mdp, pol)
    iterated = evaluate_policy(mdp, pol, tol=1e-10, direct_cap=0)
    np.testing.assert_allclose(iterated.v, direct.v, atol=1e-9)
    np.testing.assert_allclose(iterated.q, direct.q, atol=1e-9)


def test_value_iteration_prefers_delayed_reward():
    # a0: exit now for 1; a1: one more step, then 10. gamma 0.9 favors waiting.
    kernel = np.zeros((3, 2, 3))
    kernel[0, 0, 2] = 1.0
    kernel[0, 1, 1] = 1.0
    kernel[1, :, 2] = 1.0
    kernel[2, :, 2] = 1.0
    reward = np.array([[1.0, 0.0], [10.0, 10.0], [0.0, 0.0]])
    mdp = Mdp(kernel=kernel, reward=reward, gamma=0.9, start=0, terminals={2})
    v, q = value_iteration(mdp)
    np.testing.assert_allclose(v[0], 9.0, atol=1e-9)
    assert q[0, 1] > q[0, 0]


def test_kernel_row_validation():
    kernel = np.zeros((2, 1, 2))
    kernel[0, 0, 0] = 0.7  # row sums to 0.7
    kernel[1, 0, 1] = 1.0
    with pytest.raises(ValueError, match="does not sum to 1"):
        Mdp(kernel=kernel, reward=np.zeros((2, 1)), gamma=0.9, start=0)


def test_terminal_must_be_absorbing_and_unpaid():
    kernel = np.zeros((2, 1, 2))
    kernel[0, 0, 1] = 1.0
    kernel[1, 0, 0] = 1.0
    with pytest.raises(ValueError, match="not absorbing"):
        Mdp(kernel=kernel, reward=np.zeros((2, 1)), gamma=0.9, start=0, terminals={1})
    kernel[1, 0, 0] = 0.0
    kernel[1, 0, 1] = 1.0
    reward = np.array([[0.0], [1.0]])
    with pytest.raises(ValueError, match="nonzero reward"):
        Mdp(kernel=kernel, reward=reward, gamma=0.9, start=0, terminals={1})


def test_gamma_range_enforced():
    kernel = np.ones((1, 1, 1))
    with pytest.raises(ValueError, match="gamma"):
        Mdp(kernel=kernel, reward=np.zeros((1, 1)), gamma=1.0, start=0)


def test_mode_actions_break_ties_low():
    pol = BasePolicy(np.array([[0.5, 0.5], [0.2, 0.8]]))
    assert pol.mode_actions().tolist() == [0, 1]
    assert not pol.is_deterministic()


def test_deterministic_next_detects_point_mass():
    mdp = chain3()
    table = deterministic_next(mdp.kernel)
    assert table is not None
    assert table[:, 0].tolist() == [1, 2, 2]
    assert deterministic_next(coin_flip().kernel) is None


def test_rollout_deterministic_chain():
    mdp = chain3()
    traj = rollout(mdp, BasePolicy.deterministic([0, 0, 0], 1), 0, max_steps=10)
    assert traj.reason == "goal"
    assert traj.states.tolist() == [0, 1]
    assert traj.next_states.tolist() == [1, 2]
    np.testing.assert_allclose(traj.discounted_return(0.9), 2.8, atol=1e-12)


def test_rollout_step_limit_on_cycle():
    kernel = np.zeros((2, 1, 2))
    kernel[0, 0, 1] = 1.0
    kernel[1, 0, 0] = 1.0
    mdp = Mdp(kernel=kernel, reward=np.ones((2, 1)), gamma=0.9, start=0)
    traj = rollout(mdp, BasePolicy.deterministic([0, 0], 1), 0, max_steps=7)
    assert traj.reason == "step-limit"
    assert len(traj) == 7


def test_rollout_goal_exactly_at_step_limit():
    # terminal is entered on the final permitted transition
    mdp = chain3()
    traj = rollout(mdp, BasePolicy.deterministic([0, 0, 0], 1), 0, max_steps=2)
    assert traj.reason == "goal"
    assert len(traj) == 2


def test_rollout_from_terminal_start_is_empty():
    mdp = chain3()
    shifted = Mdp(kernel=mdp.kernel, reward=mdp.reward, gamma=0.9, start=2, terminals={2})
    traj = rollout(shifted, BasePolicy.deterministic([0, 0, 0], 1), 0, max_steps=5)
    assert traj.reason == "goal"
    assert len(traj) == 0
    assert traj.discounted_return(0.9) == 0.0


def test_monte_carlo_return_matches_exact_value():
    """Sampled discounted returns agree with the linear solve within 3 SE."""
    mdp = coin_flip()
    pol = BasePolicy.deterministic([0, 0], 1)
    exact = evaluate_policy(mdp, pol).v[0]
    rng = np.random.default_rng(7)
    returns = [rollout(mdp, pol, rng, max_steps=400).discounted_return(mdp.gamma)
               for _ in range(4000)]
    returns = np.array(returns)
    se = returns.std(ddof=1) / np.sqrt(returns.size)
    assert abs(returns.mean() - exact) < 3.0 * se + 1e-6
