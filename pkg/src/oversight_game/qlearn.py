"""Tabular Q-learning for the frozen base policy, plus QTable text export."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .mdp import Mdp, BasePolicy, deterministic_next, _sample_row


@dataclass(frozen=True)
class QLearnConfig:
    episodes: int = 10_000
    alpha: float = 0.5
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.1
    epsilon_decay: float = 0.9995
    max_steps: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1 or self.max_steps < 1:
            raise ValueError("episodes and max_steps must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        for name in ("epsilon_start", "epsilon_end", "epsilon_decay"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end exceeds epsilon_start")


def epsilon_schedule(cfg: QLearnConfig, episode: int) -> float:
    """Exploration rate before the given 0-based episode: multiplicative decay
    per finished episode, floored at epsilon_end."""
    return max(cfg.epsilon_end, cfg.epsilon_start * cfg.epsilon_decay ** episode)


@dataclass(frozen=True, eq=False)
class QTable:
    values: np.ndarray  # (S, A)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"QTable must be (S, A), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("QTable has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_text(self) -> str:
        lines = [f"{s} {a} {float(self.values[s, a])!r}"
                 for s in range(self.values.shape[0])
                 for a in range(self.values.shape[1])]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QTable":
        entries = {}
        for ln in text.splitlines():
            if not ln.strip():
                continue
            s, a, v = ln.split()
            entries[(int(s), int(a))] = float(v)
        if not entries:
            raise ValueError("empty QTable text")
        n_s = max(s for s, _ in entries) + 1
        n_a = max(a for _, a in entries) + 1
        if len(entries) != n_s * n_a:
            raise ValueError("QTable text is missing entries")
        vals = np.empty((n_s, n_a))
        for (s, a), v in entries.items():
            vals[s, a] = v
        return cls(vals)


def q_learning(mdp: Mdp, cfg: QLearnConfig) -> QTable:
    """Epsilon-greedy tabular Q-learning from the MDP's start state.

    Deterministic given (mdp, cfg): one generator seeded with cfg.seed drives
    exploration, with fixed-size draws per episode so streams never shear.
    """
    rng = np.random.default_rng(cfg.seed)
    n_s, n_a = mdp.n_states, mdp.n_actions
    q = np.zeros((n_s, n_a))
    det = deterministic_next(mdp.kernel)
    terminal = mdp.terminal_mask()
    reward = mdp.reward
    eps = cfg.epsilon_start
    alpha, gamma = cfg.alpha, cfg.gamma
    for _ in range(cfg.episodes):
        u = rng.random(cfg.max_steps)
        explore_a = rng.integers(0, n_a, cfg.max_steps)
        s = mdp.start
        for t in range(cfg.max_steps):
            if terminal[s]:
                break
            a = int(explore_a[t]) if u[t] < eps else int(np.argmax(q[s]))
            if det is not None:
                s2 = int(det[s, a])
            else:
                s2 = _sample_row(mdp.kernel[s, a], rng.random())
            r = reward[s, a]
            target = r if terminal[s2] else r + gamma * q[s2].max()
            q[s, a] += alpha * (target - q[s, a])
            s = s2
        eps = max(cfg.epsilon_end, eps * cfg.epsilon_decay)
    return QTable(q)


def greedy_policy(qtable: QTable) -> BasePolicy:
    """Deterministic argmax policy; ties resolve to the lowest action index."""
    return BasePolicy.deterministic(np.argmax(qtable.values, axis=1),
                                    qtable.values.shape[1])
