"""Independent policy gradient for both players of the wrapper game.

Batch episodic REINFORCE on tabular softmax policies: each player ascends
the gradient of its own discounted return with no critic and no view of
the other player's objective. Episodes in a batch are rolled out in
lockstep as numpy vectors, so training stays fast on one core.

Estimator: grad of mean_episodes sum_t gamma^t G_t grad log pi(a_t|s_t)
with G_t the player's own discounted return-to-go, plus an entropy bonus
averaged over the states visited in the batch. An optional constant
baseline (the batch mean return) can be subtracted from every G_t.
"""
from __future__ import annotations

from dataclasses import dataclass
import csv

import numpy as np

from .game import OversightGame, ASK, OVERSEE, vector_rewards
from .analysis import JointPolicy, joint_value


class IpgTrainingError(RuntimeError):
    """Training blew up (non-finite gradient); message carries the iteration."""


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class JointSoftmaxPolicy:
    """Per-state logits for both players; probabilities are row softmaxes."""

    logits_si: np.ndarray  # (S, 2)
    logits_h: np.ndarray   # (S, 2)

    def __post_init__(self):
        for name in ("logits_si", "logits_h"):
            x = np.array(getattr(self, name), dtype=np.float64)
            if x.ndim != 2 or x.shape[1] != 2:
                raise ValueError(f"{name} must be (S, 2), got {x.shape}")
            if not np.all(np.isfinite(x)):
                raise ValueError(f"{name} contains non-finite entries")
            x.setflags(write=False)
            object.__setattr__(self, name, x)
        if self.logits_si.shape != self.logits_h.shape:
            raise ValueError("player logit tables disagree on the state count")

    @property
    def n_states(self) -> int:
        return self.logits_si.shape[0]

    @property
    def probs_si(self) -> np.ndarray:
        return _softmax_rows(self.logits_si)

    @property
    def probs_h(self) -> np.ndarray:
        return _softmax_rows(self.logits_h)

    def as_joint(self) -> JointPolicy:
        return JointPolicy(self.probs_si, self.probs_h)


def init_policy(game: OversightGame, init: str = "uniform") -> JointSoftmaxPolicy:
    """Zero logits: both players uniform at every base state."""
    if init != "uniform":
        raise ValueError(f"unknown init {init!r}")
    z = np.zeros((game.n_base, 2))
    return JointSoftmaxPolicy(z, z.copy())


@dataclass(frozen=True)
class IpgConfig:
    iterations: int = 10_000
    lr: float = 3e-3
    gamma: float = 0.99
    batch_size: int = 32
    entropy_coef: float = 0.005
    grad_clip_norm: float = 1.0
    max_steps: int = 300
    seed: int = 0
    use_baseline: bool = False

    def __post_init__(self):
        if self.iterations < 1 or self.batch_size < 1 or self.max_steps < 1:
            raise ValueError("iterations, batch_size, max_steps must be >= 1")
        if self.lr <= 0 or self.grad_clip_norm <= 0:
            raise ValueError("lr and grad_clip_norm must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.entropy_coef < 0:
            raise ValueError("entropy_coef must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


@dataclass(frozen=True, eq=False)
class Batch:
    """Lockstep rollout buffers; column t of row b is step t of episode b.

    Entries outside mask are zero. exec_codes use n_actions for off.
    """

    states: np.ndarray      # (B, T) int
    a_si: np.ndarray        # (B, T) int
    a_h: np.ndarray         # (B, T) int
    exec_codes: np.ndarray  # (B, T) int
    r_si: np.ndarray        # (B, T)
    r_h: np.ndarray         # (B, T)
    r_env: np.ndarray       # (B, T) base-MDP reward of the executed action
    violations: np.ndarray  # (B, T) bool
    mask: np.ndarray        # (B, T) bool
    lengths: np.ndarray     # (B,)
    reached_goal: np.ndarray  # (B,) bool
    n_actions: int


def sample_batch(game: OversightGame, policy: JointSoftmaxPolicy, cfg: IpgConfig,
                 rng: np.random.Generator) -> Batch:
    """Roll cfg.batch_size episodes from the start state in lockstep."""
    b_n, t_n = cfg.batch_size, cfg.max_steps
    n_a = game.mdp.n_actions
    p_si, p_h = policy.probs_si, policy.probs_h
    sig = game.sigma.probs
    sig_det = game.sigma.mode_actions() if game.sigma.is_deterministic() else None
    sig_cdf = None if sig_det is not None else np.cumsum(sig, axis=1)
    det = game.det_next()
    ker_cdf = None if det is not None else np.cumsum(game.mdp.kernel, axis=2)
    term = game.terminal_mask()
    env_reward = game.mdp.reward

    states = np.zeros((b_n, t_n), dtype=np.int64)
    a_si = np.zeros((b_n, t_n), dtype=np.int64)
    a_h = np.zeros((b_n, t_n), dtype=np.int64)
    exec_codes = np.zeros((b_n, t_n), dtype=np.int64)
    r_si = np.zeros((b_n, t_n))
    r_h = np.zeros((b_n, t_n))
    r_env = np.zeros((b_n, t_n))
    violations = np.zeros((b_n, t_n), dtype=bool)
    mask = np.zeros((b_n, t_n), dtype=bool)
    reached_goal = np.zeros(b_n, dtype=bool)

    s = np.full(b_n, game.mdp.start, dtype=np.int64)
    active = ~term[s]
    for t in range(t_n):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        s_t = s[idx]
        u = rng.random((5, idx.size))
        act_si = (u[0] >= p_si[s_t, 0]).astype(np.int64)
        act_h = (u[1] >= p_h[s_t, 0]).astype(np.int64)
        if sig_det is not None:
            prop = sig_det[s_t]
        else:
            prop = np.minimum((u[2][:, None] >= sig_cdf[s_t]).sum(axis=1), n_a - 1)
        ex = prop.copy()
        over = (act_si == ASK) & (act_h == OVERSEE)
        if over.any():
            ex[over] = game.operator.vector_sample(s_t[over], prop[over], u[3][over])
        rs, rh, viol = vector_rewards(game, s_t, act_si, act_h, ex)
        live = ex < n_a
        renv = np.zeros(idx.size)
        renv[live] = env_reward[s_t[live], ex[live]]

        nxt = np.full(idx.size, game.off_state, dtype=np.int64)
        if det is not None:
            nxt[live] = det[s_t[live], ex[live]]
        else:
            cdf = ker_cdf[s_t[live], ex[live]]
            nxt[live] = np.minimum((u[4][live][:, None] >= cdf).sum(axis=1),
                                   game.n_base - 1)

        states[idx, t] = s_t
        a_si[idx, t] = act_si
        a_h[idx, t] = act_h
        exec_codes[idx, t] = ex
        r_si[idx, t] = rs
        r_h[idx, t] = rh
        r_env[idx, t] = renv
        violations[idx, t] = viol
        mask[idx, t] = True

        done_term = live & term[np.minimum(nxt, game.n_base - 1)] & (nxt < game.n_base)
        reached_goal[idx[done_term]] = True
        done = done_term | ~live
        active[idx[done]] = False
        s[idx] = nxt
    return Batch(states=states, a_si=a_si, a_h=a_h, exec_codes=exec_codes,
                 r_si=r_si, r_h=r_h, r_env=r_env, violations=violations,
                 mask=mask, lengths=mask.sum(axis=1),
                 reached_goal=reached_goal, n_actions=n_a)


def _returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    g = np.zeros_like(rewards)
    acc = np.zeros(rewards.shape[0])
    for t in range(rewards.shape[1] - 1, -1, -1):
        acc = rewards[:, t] + gamma * acc
        g[:, t] = acc
    return g


def _player_grad(states, actions, rewards, mask, probs, cfg) -> np.ndarray:
    """REINFORCE gradient of one player's own objective over its logits."""
    n_states = probs.shape[0]
    b_n, t_n = rewards.shape
    g = _returns_to_go(rewards, cfg.gamma)
    if cfg.use_baseline:
        g = g - g[:, 0].mean()
    w = (cfg.gamma ** np.arange(t_n))[None, :] * g
    s_flat = states[mask]
    a_flat = actions[mask]
    w_flat = w[mask]
    taken = np.bincount(s_flat * 2 + a_flat, weights=w_flat,
                        minlength=n_states * 2).reshape(n_states, 2)
    total = np.bincount(s_flat, weights=w_flat, minlength=n_states)
    grad = (taken - probs * total[:, None]) / b_n
    if cfg.entropy_coef > 0.0:
        visits = np.bincount(s_flat, minlength=n_states)
        visited = visits > 0
        n_vis = int(visited.sum())
        if n_vis:
            with np.errstate(divide="ignore", invalid="ignore"):
                log_p = np.where(probs > 0.0, np.log(probs), 0.0)
            ent = -(probs * log_p).sum(axis=1, keepdims=True)
            # d entropy / d logit_k = -pi_k (log pi_k + H)
            ent_grad = -probs * (log_p + ent)
            grad[visited] += cfg.entropy_coef * ent_grad[visited] / n_vis
    return grad


def reinforce_grad(batch: Batch, policy: JointSoftmaxPolicy, cfg: IpgConfig):
    """(grad_si, grad_h): each computed from that player's reward stream only."""
    if not batch.mask.any():
        z = np.zeros_like(policy.logits_si)
        return z, z.copy()
    g_si = _player_grad(batch.states, batch.a_si, batch.r_si, batch.mask,
                        policy.probs_si, cfg)
    g_h = _player_grad(batch.states, batch.a_h, batch.r_h, batch.mask,
                       policy.probs_h, cfg)
    return g_si, g_h


def clip_and_apply(grads, policy: JointSoftmaxPolicy, cfg: IpgConfig,
                   iteration=None) -> JointSoftmaxPolicy:
    """Global L2 clip per player, then one ascent step on the logits."""
    new_logits = []
    for name, g in zip(("si", "h"), grads):
        if not np.all(np.isfinite(g)):
            where = f" at iteration {iteration}" if iteration is not None else ""
            raise IpgTrainingError(f"non-finite gradient for player {name}{where}")
        norm = float(np.sqrt((g * g).sum()))
        scale = 1.0 if norm <= cfg.grad_clip_norm else cfg.grad_clip_norm / norm
        old = policy.logits_si if name == "si" else policy.logits_h
        new_logits.append(old + cfg.lr * scale * g)
    return JointSoftmaxPolicy(new_logits[0], new_logits[1])


# ---------------------------------------------------------------------------
# metrics


_COLUMNS = ("violation_rate_per_step", "env_return", "shared_return",
            "ask_rate", "play_rate", "trust_rate", "oversee_rate",
            "mean_episode_length")


@dataclass(frozen=True, eq=False)
class MetricsSeries:
    """One row per training iteration; columns in _COLUMNS order."""

    data: np.ndarray  # (n_iterations, 8)

    COLUMNS = _COLUMNS

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[1] != len(_COLUMNS):
            raise ValueError(f"metrics need {len(_COLUMNS)} columns, got {d.shape}")
        d.setflags(write=False)
        object.__setattr__(self, "data", d)

    @property
    def n_iterations(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, _COLUMNS.index(name)]

    def __getattr__(self, name):
        if name in _COLUMNS:
            return self.data[:, _COLUMNS.index(name)]
        raise AttributeError(name)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_COLUMNS)
            for row in self.data:
                writer.writerow([repr(float(x)) for x in row])

    @staticmethod
    def from_csv(path) -> "MetricsSeries":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != _COLUMNS:
                raise ValueError(f"unexpected metrics header {header}")
            rows = [[float(x) for x in row] for row in reader]
        return MetricsSeries(np.array(rows, dtype=np.float64).reshape(-1, len(_COLUMNS)))


def _metrics_row(batch: Batch, gamma: float) -> np.ndarray:
    msk = batch.mask
    total = max(int(msk.sum()), 1)
    disc = gamma ** np.arange(msk.shape[1])
    ask = float((batch.a_si[msk] == ASK).sum()) / total
    over = float((batch.a_h[msk] == OVERSEE).sum()) / total
    return np.array([
        float(batch.violations.sum()) / total,
        float((batch.r_env * disc).sum(axis=1).mean()),
        float((batch.r_si * disc).sum(axis=1).mean()),
        ask, 1.0 - ask, 1.0 - over, over,
        float(batch.lengths.mean()),
    ])


@dataclass(frozen=True, eq=False)
class TrainResult:
    policy: JointSoftmaxPolicy
    metrics: MetricsSeries
    goal_rates: np.ndarray  # (n_iterations,) share of episodes reaching a goal
    visits: np.ndarray      # (n_iterations, S) action-state visit counts


def train_ipg(game: OversightGame, cfg: IpgConfig) -> TrainResult:
    """Run the sample / gradient / clip-apply loop for cfg.iterations.

    Deterministic given (game, cfg): iteration t draws from a fresh
    generator seeded with (cfg.seed, t).
    """
    policy = init_policy(game)
    rows = np.zeros((cfg.iterations, len(_COLUMNS)))
    goal_rates = np.zeros(cfg.iterations)
    visits = np.zeros((cfg.iterations, game.n_base), dtype=np.int64)
    for t in range(cfg.iterations):
        rng = np.random.default_rng((cfg.seed, t))
        batch = sample_batch(game, policy, cfg, rng)
        grads = reinforce_grad(batch, policy, cfg)
        policy = clip_and_apply(grads, policy, cfg, iteration=t)
        rows[t] = _metrics_row(batch, cfg.gamma)
        goal_rates[t] = float(batch.reached_goal.mean())
        visits[t] = np.bincount(batch.states[batch.mask], minlength=game.n_base)
    return TrainResult(policy=policy, metrics=MetricsSeries(rows),
                       goal_rates=goal_rates, visits=visits)


# ---------------------------------------------------------------------------
# exact-gradient oracle


def exact_policy_gradient(game: OversightGame, policy: JointSoftmaxPolicy,
                          player: str, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of the player's exact start-state value
    over its own logits. Small games only."""
    if game.n_states > 64:
        raise ValueError(f"{game.n_states} augmented states exceed the cap of 64")
    if player not in ("si", "h"):
        raise ValueError(f"player must be 'si' or 'h', got {player!r}")
    own = policy.logits_si if player == "si" else policy.logits_h
    other = policy.logits_h if player == "si" else policy.logits_si

    def value_at(logits: np.ndarray) -> float:
        if player == "si":
            joint = JointPolicy(_softmax_rows(logits), _softmax_rows(other))
        else:
            joint = JointPolicy(_softmax_rows(other), _softmax_rows(logits))
        return joint_value(game, joint, player=player).at(game.mdp.start)

    grad = np.zeros_like(own)
    for s in range(own.shape[0]):
        for k in range(2):
            hi = np.array(own)
            lo = np.array(own)
            hi[s, k] += step
            lo[s, k] -= step
            grad[s, k] = (value_at(hi) - value_at(lo)) / (2.0 * step)
    return grad


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(policy: JointSoftmaxPolicy, path) -> None:
    """Textual logit table, one `player state logit0 logit1` row per state."""
    lines = ["player state logit0 logit1"]
    for name, table in (("si", policy.logits_si), ("h", policy.logits_h)):
        for s in range(table.shape[0]):
            lines.append(f"{name} {s} {float(table[s, 0])!r} {float(table[s, 1])!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> JointSoftmaxPolicy:
    tables: dict = {"si": {}, "h": {}}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0] == "player":
                continue
            if len(parts) != 4 or parts[0] not in tables:
                raise ValueError(f"bad checkpoint line: {line.rstrip()!r}")
            tables[parts[0]][int(parts[1])] = (float(parts[2]), float(parts[3]))
    n = len(tables["si"])
    if n == 0 or len(tables["h"]) != n:
        raise ValueError("checkpoint player tables are empty or mismatched")
    out = []
    for name in ("si", "h"):
        rows = tables[name]
        if sorted(rows) != list(range(n)):
            raise ValueError(f"checkpoint misses states for player {name}")
        out.append(np.array([rows[s] for s in range(n)]))
    return JointSoftmaxPolicy(out[0], out[1])
