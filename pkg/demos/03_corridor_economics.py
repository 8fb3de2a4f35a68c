"""The equilibrium buys exactly as much oversight as safety requires.

A 4-state corridor where the base policy would cut through a taboo cell at
state 1. Exhaustive search over all deterministic joint profiles finds the
potential maximizer, confirms nobody can gain by deviating alone, and
prices its oversight against every other profile that is also safe.
"""
from oversight_game import verify_optimal_equilibrium, instances
from oversight_game.game import SI_NAMES, H_NAMES

game = instances.corridor_game()
rep = verify_optimal_equilibrium(game)

print("corridor: 4 states, taboo crossing at state 1")
print("  best profile by potential:")
for s in range(game.n_base):
    print(f"    state {s}: agent {SI_NAMES[rep.si_actions[s]]:>4}, "
          f"human {H_NAMES[rep.h_actions[s]]}")
print(f"  equilibrium (no unilateral improvement): {rep.ne_ok}")
print(f"  unsafe execution mass at reachable states: 0 -> {rep.safety_ok}")
print()
print(f"  discounted oversight spend of this profile: {rep.cost_start:.4f}")
print(f"  cheapest other safe profile spends:         "
      f"{rep.min_other_safe_cost:.4f}")
print(f"  strict margin over all {rep.n_safe_profiles - 1} alternatives: "
      f"{rep.strict_margin:.4f}")
print()
print("  the profile asks and oversees exactly at the risky state and")
print("  nowhere else: full caution would be safe too, but pays the ask")
print("  and oversight fees at states that never needed them.")
