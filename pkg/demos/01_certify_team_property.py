"""Why the shared-reward wrapper is a team game, certified exactly.

Builds a 6-state chain wrapper, enumerates every deterministic joint
profile, and checks that both players' values move in lockstep under
unilateral deviations. Then shows what failure looks like on an
opposed-interest game built to break the property.
"""
import numpy as np

from oversight_game import check_mpg, instances

game = instances.chain_game(6)
report = check_mpg(game, tol=1e-9)

print("6-state chain, shared penalty reward")
print(f"  mode: {report.mode} over {report.n_profiles} joint profiles")
print(f"  potential property holds: {report.is_mpg}")
print(f"  max deviation-equality violation: {report.max_violation:.3e}")
print(f"  dummy terms (should be exactly zero for shared rewards): "
      f"si {np.max(np.abs(report.dummy_si)):.1e}, "
      f"h {np.max(np.abs(report.dummy_h)):.1e}")

# The potential is just the common value: improving your own return is
# improving the team's, which is the whole reason independent learners
# can't fight each other here.
print(f"  potential == agent value everywhere: "
      f"{np.allclose(report.phi, report.values_si)}")

print()
opposed = instances.counterexample_game()
bad = check_mpg(opposed, tol=1e-9)
print("opposed 2-state game (human paid the negation of the agent)")
print(f"  potential property holds: {bad.is_mpg}")
print(f"  max violation: {bad.max_violation:.3f}")
print("  one player's gain is the other's loss, so no single potential")
print("  function can rank profiles for both players at once.")
