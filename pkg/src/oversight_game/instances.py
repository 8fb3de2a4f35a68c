"""Small canonical instances for the theorem checks and demos.

Each builder returns a fully assembled wrapper game. Sizes are kept within
the exhaustive-enumeration caps of the analysis module so every check here
can run exactly.
"""
from __future__ import annotations

import numpy as np

from .mdp import Mdp, BasePolicy, evaluate_policy
from .game import (RewardConfig, SharedRewardModel, StrictShutdownConfig,
                   ExplicitRewards, perturb_rewards, make_over_operator,
                   build_oversight_game, OversightGame)


def _chain_mdp(n_states: int, gamma: float, goal_reward: float = 1.0) -> Mdp:
    """Forward/stay chain; the last state is terminal and entering it pays."""
    kernel = np.zeros((n_states, 2, n_states))
    reward = np.zeros((n_states, 2))
    for s in range(n_states - 1):
        kernel[s, 0, s + 1] = 1.0
        kernel[s, 1, s] = 1.0
        if s + 1 == n_states - 1:
            reward[s, 0] = goal_reward
    kernel[n_states - 1, :, n_states - 1] = 1.0
    return Mdp(kernel=kernel, reward=reward, gamma=gamma, start=0,
               terminals=frozenset({n_states - 1}))


def chain_game(n_states: int = 6, unsafe_at=(2,), gamma: float = 0.9,
               lambda_viol: float = 50.0, operator_seed: int = 0) -> OversightGame:
    """Shared-reward chain: moving forward is unsafe at the listed states,
    where the operator's only safe substitute is staying put."""
    mdp = _chain_mdp(n_states, gamma)
    sigma = BasePolicy.deterministic(np.zeros(n_states, dtype=int), 2)
    unsafe = np.zeros((n_states, 2), dtype=bool)
    for s in unsafe_at:
        unsafe[s, 0] = True
    operator = make_over_operator("random_safe", unsafe=unsafe, seed=operator_seed)
    cfg = RewardConfig(lambda_viol=lambda_viol, c_ask=0.1, c_over=0.05,
                       step_penalty=0.01, gamma=gamma)
    return build_oversight_game(mdp, sigma, unsafe, operator, SharedRewardModel(cfg))


def branch_game(gamma: float = 0.92) -> OversightGame:
    """Seven-state team game with two routes to the goal and unsafe actions
    on both, so oversight decisions differ across branches."""
    n = 7
    kernel = np.zeros((n, 2, n))
    nxt = {0: (1, 2), 1: (3, 3), 2: (4, 4), 3: (5, 5), 4: (5, 5), 5: (6, 6)}
    for s, (t0, t1) in nxt.items():
        kernel[s, 0, t0] = 1.0
        kernel[s, 1, t1] = 1.0
    kernel[6, :, 6] = 1.0
    reward = np.zeros((n, 2))
    reward[5, :] = 1.0
    mdp = Mdp(kernel=kernel, reward=reward, gamma=gamma, start=0,
              terminals=frozenset({6}))
    sigma = BasePolicy.deterministic(np.zeros(n, dtype=int), 2)
    unsafe = np.zeros((n, 2), dtype=bool)
    unsafe[1, 0] = True
    unsafe[4, 1] = True
    unsafe[3, 1] = True
    operator = make_over_operator("random_safe", unsafe=unsafe, seed=0)
    cfg = RewardConfig(lambda_viol=50.0, c_ask=0.1, c_over=0.05,
                       step_penalty=0.01, gamma=gamma)
    return build_oversight_game(mdp, sigma, unsafe, operator, SharedRewardModel(cfg))


def team_games_small():
    """Three team games of at most 8 states for the alignment checks."""
    return [chain_game(6, unsafe_at=(2,), gamma=0.9),
            chain_game(4, unsafe_at=(0, 2), gamma=0.95),
            branch_game(gamma=0.92)]


def counterexample_game(gamma: float = 0.9) -> OversightGame:
    """Opposed-interest two-state game that is not a potential game.

    Meta-action payoffs form a matching-pennies pattern with the human paid
    the negation of the agent; shutdown ends the cycle on (ask, oversee).
    """
    kernel = np.zeros((2, 1, 2))
    kernel[0, 0, 1] = 1.0
    kernel[1, 0, 0] = 1.0
    mdp = Mdp(kernel=kernel, reward=np.zeros((2, 1)), gamma=gamma, start=0,
              terminals=frozenset())
    sigma = BasePolicy.deterministic([0, 0], 1)
    unsafe = np.zeros((2, 1), dtype=bool)
    operator = make_over_operator("strict_shutdown", n_actions=1)
    pay = np.array([[1.0, -1.0], [-1.0, 1.0]])
    r_si = np.stack([pay, -pay])          # state 1 flips the signs
    rewards = ExplicitRewards(r_si=r_si, r_h=-r_si)
    return build_oversight_game(mdp, sigma, unsafe, operator, rewards, gamma=gamma)


def corridor_game(gamma: float = 0.9) -> OversightGame:
    """Four-state corridor with one taboo crossing at state 1.

    The base policy's action at state 1 is unsafe; the second action reaches
    the same cell safely, so the overseen game can stay on schedule. The
    minimal-oversight safe profile asks and oversees exactly at state 1.
    """
    n = 4
    kernel = np.zeros((n, 2, n))
    kernel[0, 0, 1] = 1.0
    kernel[0, 1, 1] = 1.0
    kernel[1, 0, 2] = 1.0
    kernel[1, 1, 2] = 1.0
    kernel[2, 0, 3] = 1.0
    kernel[2, 1, 2] = 1.0
    kernel[3, :, 3] = 1.0
    reward = np.zeros((n, 2))
    reward[2, 0] = 1.0
    mdp = Mdp(kernel=kernel, reward=reward, gamma=gamma, start=0,
              terminals=frozenset({3}))
    sigma = BasePolicy.deterministic(np.zeros(n, dtype=int), 2)
    unsafe = np.zeros((n, 2), dtype=bool)
    unsafe[1, 0] = True
    operator = make_over_operator("random_safe", unsafe=unsafe, seed=0)
    cfg = RewardConfig(lambda_viol=50.0, c_ask=0.1, c_over=0.05,
                       step_penalty=0.01, gamma=gamma)
    return build_oversight_game(mdp, sigma, unsafe, operator, SharedRewardModel(cfg))


def strict_shutdown_game(c_ask: float, gamma: float = 0.9) -> OversightGame:
    """Three-state chain under always-shutdown oversight with the human's
    outcome rewards dominating the agent's at every state."""
    n = 3
    kernel = np.zeros((n, 1, n))
    kernel[0, 0, 1] = 1.0
    kernel[1, 0, 2] = 1.0
    kernel[2, 0, 2] = 1.0
    mdp = Mdp(kernel=kernel, reward=np.zeros((n, 1)), gamma=gamma, start=0,
              terminals=frozenset({2}))
    sigma = BasePolicy.deterministic([0, 0, 0], 1)
    unsafe = np.zeros((n, 1), dtype=bool)
    operator = make_over_operator("strict_shutdown", n_actions=1)
    rewards = StrictShutdownConfig(
        outcome_si=np.array([[1.0], [1.0], [0.0]]),
        outcome_h=np.array([[1.5], [1.2], [0.0]]),
        c_ask=np.array([c_ask, c_ask, 0.0]))
    return build_oversight_game(mdp, sigma, unsafe, operator, rewards, gamma=gamma)


def perturbed_team_game(kappa: float, seed: int, gamma: float = 0.9) -> OversightGame:
    """Five-state team game whose per-player rewards are nudged by at most
    kappa in sup norm, for the near-team alignment bound."""
    base = chain_game(5, unsafe_at=(1, 3), gamma=gamma)
    shared_map = np.array(base.r_si[:base.n_base])
    rewards = perturb_rewards(shared_map, kappa, seed)
    return build_oversight_game(base.mdp, base.sigma, base.unsafe,
                                base.operator, rewards, gamma=gamma)


def epsilon_game(epsilon: float, gamma: float = 0.9) -> OversightGame:
    """Chain where the base policy's first move is unsafe and the safe
    substitutes cost exactly 0 (epsilon = 0) or 0.2 in one-step value."""
    n = 3
    kernel = np.zeros((n, 3, n))
    kernel[0, :, 1] = 1.0
    kernel[1, :, 2] = 1.0
    kernel[2, :, 2] = 1.0
    reward = np.zeros((n, 3))
    if epsilon == 0.0:
        reward[0] = [1.0, 1.0, 0.8]
    else:
        reward[0] = [1.0, 1.0 - epsilon, 1.0 - 2.0 * epsilon]
    reward[1] = [1.0, 0.8, 0.6]
    mdp = Mdp(kernel=kernel, reward=reward, gamma=gamma, start=0,
              terminals=frozenset({2}))
    sigma = BasePolicy.deterministic(np.zeros(n, dtype=int), 3)
    unsafe = np.zeros((n, 3), dtype=bool)
    unsafe[0, 0] = True
    vals = evaluate_policy(mdp, sigma)
    operator = make_over_operator("epsilon_bounded", unsafe=unsafe,
                                  q_sigma=vals.q, v_sigma=vals.v,
                                  epsilon=epsilon, n_actions=3)
    cfg = RewardConfig(lambda_viol=50.0, c_ask=0.1, c_over=0.05,
                       step_penalty=0.01, gamma=gamma)
    return build_oversight_game(mdp, sigma, unsafe, operator, SharedRewardModel(cfg))


def gradient_game(gamma: float = 0.9) -> OversightGame:
    """Three-state team game used to validate the sampled policy gradient;
    reward scale stays small to keep the estimator variance down."""
    mdp = _chain_mdp(3, gamma)
    sigma = BasePolicy.deterministic([0, 0, 0], 2)
    unsafe = np.zeros((3, 2), dtype=bool)
    unsafe[0, 0] = True
    operator = make_over_operator("random_safe", unsafe=unsafe, seed=0)
    cfg = RewardConfig(lambda_viol=5.0, c_ask=0.1, c_over=0.05,
                       step_penalty=0.01, gamma=gamma)
    return build_oversight_game(mdp, sigma, unsafe, operator, SharedRewardModel(cfg))
