"""Finite discounted MDPs: tabular kernels, exact evaluation, rollouts."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

# Kernel rows must be distributions to this absolute tolerance.
ROW_SUM_ATOL = 1e-12


def _freeze(a, dtype=np.float64):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    """Tabular MDP with kernel (S, A, S), reward (S, A), discount gamma < 1.

    Terminal states are absorbing and pay zero under every action, so
    discounted values need no horizon bookkeeping: V(terminal) = 0.
    """

    kernel: np.ndarray
    reward: np.ndarray
    gamma: float
    start: int
    terminals: frozenset = frozenset()

    def __post_init__(self):
        k = _freeze(self.kernel)
        r = _freeze(self.reward)
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "terminals", frozenset(self.terminals))
        if k.ndim != 3 or k.shape[0] != k.shape[2]:
            raise ValueError(f"kernel must be (S, A, S), got {k.shape}")
        if r.shape != k.shape[:2]:
            raise ValueError(f"reward must be (S, A), got {r.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0 <= self.start < k.shape[0]:
            raise ValueError(f"start state {self.start} out of range")
        if np.any(k < -ROW_SUM_ATOL):
            raise ValueError("kernel has negative entries")
        bad = np.abs(k.sum(axis=2) - 1.0) > ROW_SUM_ATOL
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise ValueError(f"kernel row ({s}, {a}) does not sum to 1")
        for s in self.terminals:
            if not (0 <= s < k.shape[0]):
                raise ValueError(f"terminal {s} out of range")
            if np.any(np.abs(k[s, :, s] - 1.0) > ROW_SUM_ATOL):
                raise ValueError(f"terminal state {s} is not absorbing")
            if np.any(r[s] != 0.0):
                raise ValueError(f"terminal state {s} has nonzero reward")

    @property
    def n_states(self) -> int:
        return self.kernel.shape[0]

    @property
    def n_actions(self) -> int:
        return self.kernel.shape[1]

    def terminal_mask(self) -> np.ndarray:
        m = np.zeros(self.n_states, dtype=bool)
        if self.terminals:
            m[list(self.terminals)] = True
        return m


@dataclass(frozen=True, eq=False)
class BasePolicy:
    """State-conditional action distribution, immutable after construction."""

    probs: np.ndarray  # (S, A)

    def __post_init__(self):
        p = _freeze(self.probs)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2:
            raise ValueError(f"probs must be (S, A), got {p.shape}")
        if np.any(p < -ROW_SUM_ATOL):
            raise ValueError("probs has negative entries")
        bad = np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_ATOL
        if np.any(bad):
            raise ValueError(f"policy row {np.argwhere(bad)[0][0]} does not sum to 1")

    @staticmethod
    def deterministic(actions, n_actions: int) -> "BasePolicy":
        actions = np.asarray(actions, dtype=int)
        p = np.zeros((actions.shape[0], n_actions))
        p[np.arange(actions.shape[0]), actions] = 1.0
        return BasePolicy(p)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def is_deterministic(self) -> bool:
        return bool(np.all(self.probs.max(axis=1) == 1.0))

    def mode_actions(self) -> np.ndarray:
        """Most likely action per state; ties resolve to the lowest index."""
        return np.argmax(self.probs, axis=1)


@dataclass(frozen=True, eq=False)
class PolicyValues:
    v: np.ndarray  # (S,)
    q: np.ndarray  # (S, A)


def evaluate_policy(mdp: Mdp, policy: BasePolicy, tol: float = 1e-9,
                    direct_cap: int = 4096) -> PolicyValues:
    """Exact V and Q of a fixed policy.

    Solves (I - gamma P_pi) v = r_pi directly up to direct_cap states,
    otherwise iterates the Bellman operator until the contraction bound
    gamma/(1-gamma) * ||v' - v||_inf certifies accuracy tol.
    """
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError("policy shape does not match the MDP")
    p_pi = np.einsum("sat,sa->st", mdp.kernel, policy.probs)
    r_pi = np.einsum("sa,sa->s", mdp.reward, policy.probs)
    n = mdp.n_states
    if n <= direct_cap:
        v = np.linalg.solve(np.eye(n) - mdp.gamma * p_pi, r_pi)
    else:
        v = np.zeros(n)
        shrink = mdp.gamma / max(1.0 - mdp.gamma, 1e-15)
        for _ in range(10_000_000):
            v_next = r_pi + mdp.gamma * (p_pi @ v)
            gap = np.max(np.abs(v_next - v))
            v = v_next
            if shrink * gap <= tol:
                break
        else:
            raise RuntimeError("policy evaluation did not converge")
    q = mdp.reward + mdp.gamma * np.einsum("sat,t->sa", mdp.kernel, v)
    return PolicyValues(v=v, q=q)


def value_iteration(mdp: Mdp, tol: float = 1e-10, max_iter: int = 10_000_000):
    """Optimal (v, q) by value iteration with a contraction stopping bound."""
    v = np.zeros(mdp.n_states)
    shrink = mdp.gamma / max(1.0 - mdp.gamma, 1e-15)
    for _ in range(max_iter):
        q = mdp.reward + mdp.gamma * np.einsum("sat,t->sa", mdp.kernel, v)
        v_next = q.max(axis=1)
        gap = np.max(np.abs(v_next - v))
        v = v_next
        if shrink * gap <= tol:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    q = mdp.reward + mdp.gamma * np.einsum("sat,t->sa", mdp.kernel, v)
    return v, q


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    reason: str  # "goal" | "step-limit"

    def __len__(self):
        return self.states.shape[0]

    def discounted_return(self, gamma: float) -> float:
        return float(self.rewards @ gamma ** np.arange(len(self)))


def deterministic_next(kernel: np.ndarray):
    """(S, A) successor table when every kernel row is a point mass, else None."""
    hit = kernel.argmax(axis=2)
    s, a = np.indices(hit.shape)
    if np.all(kernel[s, a, hit] == 1.0):
        return hit.astype(np.int64)
    return None


def _sample_row(probs: np.ndarray, u: float) -> int:
    # inverse-CDF draw; robust to rows summing to 1 - eps
    return int(min(np.searchsorted(np.cumsum(probs), u, side="right"),
                   probs.shape[0] - 1))


def rollout(mdp: Mdp, policy: BasePolicy, seed, max_steps: int) -> Trajectory:
    """Sample one episode from the start state until a terminal or max_steps."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    det = deterministic_next(mdp.kernel)
    det_pol = policy.is_deterministic()
    modes = policy.mode_actions()
    terminal = mdp.terminal_mask()
    states, actions, rewards, nexts = [], [], [], []
    s = mdp.start
    reason = "step-limit"
    for _ in range(max_steps):
        if terminal[s]:
            reason = "goal"
            break
        a = int(modes[s]) if det_pol else _sample_row(policy.probs[s], rng.random())
        s2 = int(det[s, a]) if det is not None else _sample_row(mdp.kernel[s, a], rng.random())
        states.append(s)
        actions.append(a)
        rewards.append(mdp.reward[s, a])
        nexts.append(s2)
        s = s2
    else:
        if terminal[s]:
            reason = "goal"
    return Trajectory(
        states=np.array(states, dtype=np.int64),
        actions=np.array(actions, dtype=np.int64),
        rewards=np.array(rewards, dtype=np.float64),
        next_states=np.array(nexts, dtype=np.int64),
        reason=reason,
    )
