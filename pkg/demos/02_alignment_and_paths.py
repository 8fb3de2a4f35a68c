"""Agent improvements never hurt the human, one deviation at a time.

Two views of the same fact on small team games. First: at random joint
policies, every state where switching the agent to autonomy helps the agent
also leaves the human no worse. Second: starting from full caution (always
ask, always oversee), greedily handing states to autonomy walks the human's
value up, never down.
"""
import numpy as np

from oversight_game import (JointPolicy, verify_local_alignment,
                            verify_path_monotonic, random_joint, instances)
from oversight_game.game import ASK, OVERSEE

rng = np.random.default_rng(0)

print("local alignment at 20 random joints per game")
for k, game in enumerate(instances.team_games_small()):
    worst = np.inf
    for _ in range(20):
        rep = verify_local_alignment(game, random_joint(game.n_base, rng))
        assert rep.holds
        qualifying = rep.dv_h[rep.dv_si >= 0.0]
        if qualifying.size:
            worst = min(worst, float(qualifying.min()))
    print(f"  game {k}: no human losses; worst human change among "
          f"agent-improving switches {worst:+.4f}")

print()
print("greedy autonomy expansion from full caution")
game = instances.chain_game(6)
start = JointPolicy.deterministic(np.full(game.n_base, ASK),
                                  np.full(game.n_base, OVERSEE))
rep = verify_path_monotonic(game, start)
print(f"  accepted switches, in order: {list(rep.switches)}")
print(f"  human start-state value along the path:")
for i, v in enumerate(rep.v_h_history[:, game.mdp.start]):
    label = "all ask" if i == 0 else f"after switch {rep.switches[i - 1]}"
    print(f"    {label:>16}: {v:+.4f}")
print(f"  monotone at every state, worst drop {rep.worst_drop:.2e}")
print("  each switch drops an ask fee without adding violations, so the")
print("  shared value can only rise as autonomy spreads.")
