"""An interactive episode, scripted so it runs without a human.

Opens a session against an agent that defers exactly at the risky states,
and plays the canonical overseer script: trust everything except an ask at
a state whose base action would enter taboo. Prints the step log the way
the browser console renders it.

For the live version: `oversight-game run-all --config cfg.json` then
`oversight-game serve --config cfg.json`, and open the console in
frontend/ (see its README).
"""
import numpy as np

from oversight_game import (build_four_rooms, sample_taboo, QLearnConfig,
                            q_learning, greedy_policy, RewardConfig,
                            SharedRewardModel, RandomSafeOperator,
                            build_oversight_game, sigma_risk_states,
                            JointSoftmaxPolicy, open_session, advance,
                            session_view, scripted_overseer)
from oversight_game.game import PLAY, ASK

grid = build_four_rooms(5, 5, goal_reward=10.0, step_penalty=-0.1,
                        max_steps=50)
sigma = greedy_policy(q_learning(grid.to_mdp(),
                                 QLearnConfig(episodes=600, max_steps=50,
                                              seed=1)))
grid = sample_taboo(grid, 0.10, seed=2)
unsafe = grid.unsafe_actions()
game = build_oversight_game(
    grid.to_mdp(), sigma, unsafe, RandomSafeOperator(unsafe),
    SharedRewardModel(RewardConfig(50.0, 0.1, 0.05, 0.01, 0.99)))

risk = sigma_risk_states(game)
si = np.where(risk[:game.n_base], ASK, PLAY)
logits = np.full((game.n_base, 2), -30.0)
logits[np.arange(game.n_base), si] = 30.0
policy = JointSoftmaxPolicy(logits, np.zeros((game.n_base, 2)))

print(f"5x5 grid, taboo cells at {sorted(grid.taboo)}, "
      f"goal at {grid.goal}")
print(f"the agent asks at {int(risk.sum())} risky states, plays elsewhere")
print()

session = open_session(game, policy, seed=0, grid=grid)
while session.status == "active":
    h = scripted_overseer(game, session_view(session), risk=risk, grid=grid)
    advance(session, h)

for e in session.transcript:
    wanted = f" (wanted {e['proposed']})" if e["si"] == "ask" else ""
    mark = " <- substituted" if e["si"] == "ask" and e["h"] == "oversee" \
        and e["executed"] != e["proposed"] else ""
    print(f"  step {e['step']:>2} at {tuple(e['state'])}: "
          f"agent {e['si']:>4}{wanted}, human {e['h']:>7} -> "
          f"{e['executed']:>5}{mark}")

print()
print(f"ended by {session.done_reason!r} after {session.step_index} steps, "
      f"{session.violations} violations, shared return "
      f"{session.cum_r_si:+.2f}")
print("every ask at a risky state was overseen, so nothing taboo executed;")
print("the same inputs replayed against seed 0 reproduce this log exactly.")
