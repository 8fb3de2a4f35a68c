"""Policy-gradient trainer tests.

Estimator correctness is checked against central finite differences of the
exact start-state value; batch mechanics are checked on games where the
rollout is fully deterministic.
"""
import numpy as np
import pytest

from oversight_game import (
    JointSoftmaxPolicy, IpgConfig, IpgTrainingError, MetricsSeries,
    init_policy, sample_batch, reinforce_grad, clip_and_apply, train_ipg,
    exact_policy_gradient, save_checkpoint, load_checkpoint,
    joint_value, induced_env_policy, evaluate_policy, BasePolicy, instances,
)
from oversight_game.game import PLAY, ASK, TRUST, OVERSEE
from oversight_game.ipg import Batch


HARD = 30.0  # logit offset that makes a softmax row effectively deterministic


def fixed_policy(n_states, si_action, h_action):
    z_si = np.full((n_states, 2), -HARD)
    z_h = np.full((n_states, 2), -HARD)
    z_si[:, si_action] = HARD
    z_h[:, h_action] = HARD
    return JointSoftmaxPolicy(z_si, z_h)


# ---------------------------------------------------------------------------
# policy containers and config


def test_softmax_policy_probs():
    pol = JointSoftmaxPolicy(np.zeros((3, 2)), np.array([[0.0, np.log(3.0)]] * 3))
    assert np.allclose(pol.probs_si, 0.5)
    assert np.allclose(pol.probs_h, [0.25, 0.75])
    joint = pol.as_joint()
    assert np.allclose(joint.si, pol.probs_si)
    assert np.allclose(joint.h, pol.probs_h)
    assert pol.n_states == 3


def test_softmax_policy_validation():
    with pytest.raises(ValueError, match=r"\(S, 2\)"):
        JointSoftmaxPolicy(np.zeros((3, 4)), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="non-finite"):
        JointSoftmaxPolicy(np.array([[0.0, np.inf]]), np.zeros((1, 2)))
    with pytest.raises(ValueError, match="state count"):
        JointSoftmaxPolicy(np.zeros((2, 2)), np.zeros((3, 2)))


def test_init_policy_uniform():
    game = instances.chain_game(4)
    pol = init_policy(game)
    assert pol.n_states == game.n_base
    assert np.allclose(pol.probs_si, 0.5) and np.allclose(pol.probs_h, 0.5)
    with pytest.raises(ValueError, match="init"):
        init_policy(game, init="zeros")


@pytest.mark.parametrize("kwargs", [
    {"iterations": 0}, {"batch_size": 0}, {"max_steps": 0},
    {"lr": 0.0}, {"grad_clip_norm": 0.0}, {"gamma": 1.0},
    {"entropy_coef": -0.1}, {"seed": -1},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        IpgConfig(**kwargs)


# ---------------------------------------------------------------------------
# batch rollouts


def test_batch_deterministic_play_trust():
    # play/trust everywhere: sigma runs open loop down the chain
    game = instances.chain_game(4, unsafe_at=(1,), gamma=0.9)
    cfg = IpgConfig(iterations=1, batch_size=5, max_steps=10, gamma=0.9)
    batch = sample_batch(game, fixed_policy(4, PLAY, TRUST), cfg,
                         np.random.default_rng(0))
    assert np.all(batch.lengths == 3)
    assert np.all(batch.reached_goal)
    assert np.all(batch.states[:, :3] == [0, 1, 2])
    assert np.all(batch.a_si[batch.mask] == PLAY)
    assert np.all(batch.a_h[batch.mask] == TRUST)
    assert np.all(batch.exec_codes[:, :3] == 0)
    # the unsafe forward move at state 1 executes unchecked
    assert np.all(batch.violations[:, 1])
    assert not batch.violations[:, [0, 2]].any()
    assert np.allclose(batch.r_si[:, :3], [-0.01, -50.01, -0.01])
    assert np.array_equal(batch.r_si, batch.r_h)
    # env reward pays only on entering the terminal
    assert np.allclose(batch.r_env[:, :3], [0.0, 0.0, 1.0])
    assert not batch.mask[:, 3:].any()


def test_batch_oversight_pins_agent_at_start():
    # ask/oversee with only one safe action: the operator keeps substituting
    # stay, so the episode never leaves the start state
    game = instances.chain_game(4, unsafe_at=(0,), gamma=0.9)
    cfg = IpgConfig(iterations=1, batch_size=4, max_steps=7, gamma=0.9)
    batch = sample_batch(game, fixed_policy(4, ASK, OVERSEE), cfg,
                         np.random.default_rng(1))
    assert np.all(batch.lengths == 7)
    assert not batch.reached_goal.any()
    assert np.all(batch.states == 0)
    assert np.all(batch.exec_codes == 1)
    assert not batch.violations.any()
    assert np.allclose(batch.r_si, -0.16)  # ask + oversee + step costs
    assert batch.n_actions == 2


def test_batch_determinism_in_rng():
    game = instances.gradient_game()
    cfg = IpgConfig(iterations=1, batch_size=16, max_steps=40, gamma=0.9)
    pol = init_policy(game)
    b1 = sample_batch(game, pol, cfg, np.random.default_rng(42))
    b2 = sample_batch(game, pol, cfg, np.random.default_rng(42))
    for field in ("states", "a_si", "a_h", "exec_codes", "r_si", "mask",
                  "lengths", "reached_goal"):
        assert np.array_equal(getattr(b1, field), getattr(b2, field))


def test_batch_returns_match_exact_values():
    # Monte Carlo discounted returns against the exact joint evaluation
    game = instances.gradient_game(gamma=0.9)
    cfg = IpgConfig(iterations=1, batch_size=3000, max_steps=300, gamma=0.9)
    pol = init_policy(game)
    batch = sample_batch(game, pol, cfg, np.random.default_rng(7))
    disc = 0.9 ** np.arange(cfg.max_steps)
    returns = (batch.r_si * disc).sum(axis=1)
    want = joint_value(game, pol.as_joint()).at(game.mdp.start)
    se = returns.std() / np.sqrt(cfg.batch_size)
    assert abs(returns.mean() - want) < 3.0 * se + 1e-6

    env_returns = (batch.r_env * disc).sum(axis=1)
    exec_pol = induced_env_policy(game, pol.as_joint())
    assert np.max(exec_pol.off_mass) == 0.0
    v_env = evaluate_policy(game.mdp, BasePolicy(exec_pol.env_probs)).v
    se_env = env_returns.std() / np.sqrt(cfg.batch_size)
    assert abs(env_returns.mean() - v_env[game.mdp.start]) < 3.0 * se_env + 1e-6


# ---------------------------------------------------------------------------
# gradient estimator against finite differences


def test_reinforce_gradient_matches_finite_differences():
    game = instances.gradient_game(gamma=0.9)
    rng = np.random.default_rng(3)
    pol = JointSoftmaxPolicy(rng.normal(0.0, 0.3, (3, 2)),
                             rng.normal(0.0, 0.3, (3, 2)))
    cfg = IpgConfig(iterations=1, batch_size=128, max_steps=200, gamma=0.9,
                    entropy_coef=0.0, use_baseline=False)
    acc_si = np.zeros((3, 2))
    acc_h = np.zeros((3, 2))
    n_batches = 400
    for k in range(n_batches):
        batch = sample_batch(game, pol, cfg, np.random.default_rng(k))
        g_si, g_h = reinforce_grad(batch, pol, cfg)
        acc_si += g_si
        acc_h += g_h
    acc_si /= n_batches
    acc_h /= n_batches
    for acc, player in ((acc_si, "si"), (acc_h, "h")):
        exact = exact_policy_gradient(game, pol, player)
        cos = (acc * exact).sum() / (np.linalg.norm(acc) * np.linalg.norm(exact))
        assert cos > 0.95, f"{player} estimator cosine {cos}"


def test_baseline_keeps_gradient_unbiased():
    game = instances.gradient_game(gamma=0.9)
    pol = init_policy(game)
    base = IpgConfig(iterations=1, batch_size=64, max_steps=200, gamma=0.9,
                     entropy_coef=0.0, use_baseline=False)
    with_b = IpgConfig(iterations=1, batch_size=64, max_steps=200, gamma=0.9,
                       entropy_coef=0.0, use_baseline=True)
    acc = np.zeros((3, 2))
    for k in range(160):
        batch = sample_batch(game, pol, with_b, np.random.default_rng(k))
        acc += reinforce_grad(batch, pol, with_b)[0]
    acc /= 160
    exact = exact_policy_gradient(game, pol, "si")
    cos = (acc * exact).sum() / (np.linalg.norm(acc) * np.linalg.norm(exact))
    assert cos > 0.95
    del base


def test_entropy_gradient_matches_finite_differences():
    # a zero-reward single-step batch isolates the entropy bonus
    logits = np.array([[0.4, -0.2], [0.0, 0.0]])
    pol = JointSoftmaxPolicy(logits, np.zeros((2, 2)))
    cfg = IpgConfig(iterations=1, batch_size=1, max_steps=1, gamma=0.9,
                    entropy_coef=0.7)
    shape = (1, 1)
    batch = Batch(states=np.zeros(shape, dtype=np.int64),
                  a_si=np.zeros(shape, dtype=np.int64),
                  a_h=np.zeros(shape, dtype=np.int64),
                  exec_codes=np.zeros(shape, dtype=np.int64),
                  r_si=np.zeros(shape), r_h=np.zeros(shape),
                  r_env=np.zeros(shape),
                  violations=np.zeros(shape, dtype=bool),
                  mask=np.ones(shape, dtype=bool),
                  lengths=np.ones(1, dtype=np.int64),
                  reached_goal=np.zeros(1, dtype=bool), n_actions=2)
    g_si, _ = reinforce_grad(batch, pol, cfg)

    def entropy(z):
        e = np.exp(z - z.max())
        p = e / e.sum()
        return -(p * np.log(p)).sum()

    h = 1e-6
    for k in range(2):
        hi = logits[0].copy()
        lo = logits[0].copy()
        hi[k] += h
        lo[k] -= h
        want = 0.7 * (entropy(hi) - entropy(lo)) / (2.0 * h)
        assert g_si[0, k] == pytest.approx(want, abs=1e-6)
    assert np.all(g_si[1] == 0.0)  # unvisited state gets no entropy push


def test_empty_batch_gives_zero_gradient():
    pol = init_policy(instances.chain_game(3))
    cfg = IpgConfig(iterations=1, batch_size=2, max_steps=3)
    shape = (2, 3)
    batch = Batch(states=np.zeros(shape, dtype=np.int64),
                  a_si=np.zeros(shape, dtype=np.int64),
                  a_h=np.zeros(shape, dtype=np.int64),
                  exec_codes=np.zeros(shape, dtype=np.int64),
                  r_si=np.zeros(shape), r_h=np.zeros(shape),
                  r_env=np.zeros(shape),
                  violations=np.zeros(shape, dtype=bool),
                  mask=np.zeros(shape, dtype=bool),
                  lengths=np.zeros(2, dtype=np.int64),
                  reached_goal=np.zeros(2, dtype=bool), n_actions=2)
    g_si, g_h = reinforce_grad(batch, pol, cfg)
    assert not g_si.any() and not g_h.any()


# ---------------------------------------------------------------------------
# clipping and the update step


def test_clip_and_apply_scales_large_gradients():
    pol = JointSoftmaxPolicy(np.zeros((2, 2)), np.ones((2, 2)))
    cfg = IpgConfig(iterations=1, lr=0.5, grad_clip_norm=1.0)
    big = np.full((2, 2), 3.0)     # norm 6 -> scaled to unit norm
    small = np.full((2, 2), 0.1)   # norm 0.2 -> untouched
    new = clip_and_apply((big, small), pol, cfg)
    assert np.allclose(new.logits_si, 0.5 * big / 6.0)
    assert np.allclose(new.logits_h, 1.0 + 0.5 * small)


def test_clip_and_apply_rejects_non_finite():
    pol = init_policy(instances.chain_game(3))
    cfg = IpgConfig(iterations=1)
    bad = np.full((3, 2), np.nan)
    ok = np.zeros((3, 2))
    with pytest.raises(IpgTrainingError, match="player si at iteration 17"):
        clip_and_apply((bad, ok), pol, cfg, iteration=17)


# ---------------------------------------------------------------------------
# metrics


def test_metrics_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    series = MetricsSeries(rng.normal(size=(5, 8)))
    path = tmp_path / "metrics.csv"
    series.to_csv(path)
    back = MetricsSeries.from_csv(path)
    assert np.array_equal(back.data, series.data)
    assert back.n_iterations == 5


def test_metrics_header_validation(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        MetricsSeries.from_csv(path)


def test_metrics_column_access():
    data = np.arange(16, dtype=float).reshape(2, 8)
    series = MetricsSeries(data)
    assert np.array_equal(series.column("env_return"), data[:, 1])
    assert np.array_equal(series.ask_rate, data[:, 3])
    with pytest.raises(ValueError, match="columns"):
        MetricsSeries(np.zeros((2, 3)))
    with pytest.raises(AttributeError):
        series.no_such_column


def test_metrics_row_contents():
    game = instances.chain_game(4, unsafe_at=(1,), gamma=0.9)
    cfg = IpgConfig(iterations=1, batch_size=6, max_steps=10, gamma=0.9)
    res_cfg = IpgConfig(iterations=1, batch_size=6, max_steps=10, gamma=0.9)
    batch = sample_batch(game, fixed_policy(4, PLAY, TRUST), cfg,
                         np.random.default_rng(0))
    from oversight_game.ipg import _metrics_row
    row = _metrics_row(batch, res_cfg.gamma)
    # one violation per three-step episode
    assert row[0] == pytest.approx(1.0 / 3.0)
    assert row[1] == pytest.approx(0.81)                      # env return
    assert row[2] == pytest.approx(-0.01 - 0.9 * 50.01 - 0.81 * 0.01)
    assert row[3] == 0.0 and row[4] == 1.0                    # ask, play
    assert row[5] == 1.0 and row[6] == 0.0                    # trust, oversee
    assert row[7] == 3.0


# ---------------------------------------------------------------------------
# the training loop


def test_train_deterministic_in_config():
    game = instances.gradient_game()
    cfg = IpgConfig(iterations=6, batch_size=8, max_steps=30, gamma=0.9, seed=5)
    r1 = train_ipg(game, cfg)
    r2 = train_ipg(game, cfg)
    assert np.array_equal(r1.policy.logits_si, r2.policy.logits_si)
    assert np.array_equal(r1.policy.logits_h, r2.policy.logits_h)
    assert np.array_equal(r1.metrics.data, r2.metrics.data)
    assert np.array_equal(r1.goal_rates, r2.goal_rates)
    assert np.array_equal(r1.visits, r2.visits)
    assert r1.metrics.n_iterations == 6
    assert r1.visits.shape == (6, game.n_base)


def test_train_learns_corridor_oversight():
    # the crossing at state 1 must end up asked about and overseen, with the
    # violation rate collapsing relative to the uniform start
    game = instances.corridor_game()
    cfg = IpgConfig(iterations=400, batch_size=32, max_steps=40, gamma=0.9,
                    lr=0.1, grad_clip_norm=2.0, use_baseline=True, seed=0)
    res = train_ipg(game, cfg)
    viol = res.metrics.violation_rate_per_step
    assert viol[-50:].mean() < 0.1 * viol[:50].mean()
    assert res.goal_rates[-50:].mean() > 0.9
    probs = res.policy.probs_si
    assert probs[1, ASK] > 0.9
    assert res.policy.probs_h[1, OVERSEE] > 0.9


# ---------------------------------------------------------------------------
# exact-gradient oracle guards


def test_exact_gradient_caps_state_count():
    game = instances.chain_game(70)
    with pytest.raises(ValueError, match="cap"):
        exact_policy_gradient(game, init_policy(game), "si")


def test_exact_gradient_player_validation():
    game = instances.chain_game(3)
    with pytest.raises(ValueError, match="player"):
        exact_policy_gradient(game, init_policy(game), "both")


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    pol = JointSoftmaxPolicy(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)))
    path = tmp_path / "policy.txt"
    save_checkpoint(pol, path)
    back = load_checkpoint(path)
    assert np.array_equal(back.logits_si, pol.logits_si)
    assert np.array_equal(back.logits_h, pol.logits_h)


def test_checkpoint_rejects_bad_lines(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("player state logit0 logit1\nsi 0 0.0\n")
    with pytest.raises(ValueError, match="bad checkpoint line"):
        load_checkpoint(path)
    path.write_text("player state logit0 logit1\n")
    with pytest.raises(ValueError, match="empty or mismatched"):
        load_checkpoint(path)
    path.write_text("player state logit0 logit1\n"
                    "si 0 0.0 0.0\nsi 2 0.0 0.0\nh 0 0.0 0.0\nh 1 0.0 0.0\n")
    with pytest.raises(ValueError, match="misses states"):
        load_checkpoint(path)
