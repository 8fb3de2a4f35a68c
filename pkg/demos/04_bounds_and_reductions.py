"""What survives when the team assumption is relaxed.

Three relaxations, each with its own exact check on a small instance:
separate outcome stakes under strict shutdown (ask-burden closed form),
per-player rewards nudged within kappa (bounded human losses), and a
substitution operator that only promises near-optimal swaps (bounded
performance gap). Plus the 3-state shutdown reduction whose kernel encodes
the whole ask-then-gatekeep story.
"""
import numpy as np

from oversight_game import (JointPolicy, ask_burden_gap, joint_value,
                            pmtg_alignment_slack, performance_gap,
                            induced_env_policy, random_joint,
                            reduce_off_switch, instances)
from oversight_game.game import ASK, PLAY, TRUST, OVERSEE

print("1. ask burden under strict shutdown, closed form")
game = instances.strict_shutdown_game(c_ask=0.3)
for q in (0.0, 0.5, 1.0):
    si_probs = np.zeros((game.n_base, 2))
    si_probs[:, ASK] = 1.0
    h_probs = np.tile([1.0, 0.0], (game.n_base, 1))
    h_probs[0] = [1.0 - q, q]
    joint = JointPolicy(si_probs, h_probs)
    gap = ask_burden_gap(game, joint, 0)
    v_si = joint_value(game, joint, "si").values
    v_h = joint_value(game, joint, "h").values
    tilde_si = float(game.rewards.outcome_si[0, 0]) + game.gamma * v_si[1]
    tilde_h = float(game.rewards.outcome_h[0, 0]) + game.gamma * v_h[1]
    closed = q * (tilde_h - tilde_si) + 0.3
    print(f"   oversee prob q={q:4.1f}: gap {gap:+.4f}, "
          f"q*(stakes gap) + c_ask = {closed:+.4f}")
print("   the human wants autonomy strictly more than the agent whenever")
print("   asking costs something and the human's stakes dominate.")

print()
print("2. perturbed rewards: worst human drop vs the 4k/(1-g) bound")
for kappa in (0.01, 0.1):
    worst = np.inf
    bound = None
    for seed in range(30):
        g = instances.perturbed_team_game(kappa, seed=seed)
        rep = pmtg_alignment_slack(
            g, random_joint(g.n_base, np.random.default_rng(seed)))
        worst = min(worst, rep.observed)
        bound = rep.bound
    print(f"   kappa {kappa}: worst observed {worst:+.4f} >= bound {bound:+.1f}")

print()
print("3. substitution quality: value lost to oversight everywhere")
for eps in (0.0, 0.2):
    g = instances.epsilon_game(eps)
    joint = JointPolicy.deterministic(np.full(g.n_base, ASK),
                                      np.full(g.n_base, OVERSEE))
    rep = performance_gap(g.mdp, g.sigma, induced_env_policy(g, joint), eps)
    print(f"   eps {eps}: worst-state gap {rep.observed:.4f} "
          f"<= {rep.bound:.1f}")

print()
print("4. the off-switch story as a 3-state kernel")
for decision in ("permit", "off"):
    g = reduce_off_switch(decision=decision)
    print(f"   gatekeeper decision {decision!r}:")
    for a_si, si_name in ((PLAY, "play"), (ASK, "ask")):
        for a_h, h_name in ((TRUST, "trust"), (OVERSEE, "oversee")):
            nxt = int(np.argmax(g.kernel[0, a_si, a_h]))
            where = "off" if nxt == g.off_state else f"state {nxt}"
            print(f"     ({si_name:>4}, {h_name:>7}) -> {where}")
