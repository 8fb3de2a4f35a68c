"""Two-player gate around a frozen base policy.

Each step both sides move at once: the agent picks play or ask, the human
picks trust or oversee. The base action runs unless the agent asked AND the
human oversaw, in which case a configured operator either substitutes a
vetted action or switches the system off. Off is an absorbing, zero-reward
augmented state appended after the base states.

Expected per-(state, meta-joint) rewards and transition rows are precomputed
at build time so exact analysis can treat the wrapper as a plain Markov game;
sampling paths reuse the same tables.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .mdp import Mdp, BasePolicy, deterministic_next, _sample_row, ROW_SUM_ATOL

PLAY, ASK = 0, 1
TRUST, OVERSEE = 0, 1
SI_NAMES = ("play", "ask")
H_NAMES = ("trust", "oversee")
OFF = "off"  # exec outcome sentinel for the off switch

# Slack on Q >= V - epsilon so exact ties survive linear-solver rounding.
_Q_GATE_SLACK = 1e-9


class GameConfigError(ValueError):
    """Reward constants, operator parameters, or wiring are inconsistent."""


class GameStateError(RuntimeError):
    """Acting where the game is over (off state or terminal)."""


# ---------------------------------------------------------------------------
# oversight operators


@dataclass(frozen=True, eq=False)
class RandomSafeOperator:
    """Uniform draw over the safe env actions at s; off when none exist."""

    unsafe: np.ndarray  # (S, A) bool
    seed: object = None
    kind = "random_safe"

    def __post_init__(self):
        unsafe = np.array(self.unsafe, dtype=bool)
        unsafe.setflags(write=False)
        object.__setattr__(self, "unsafe", unsafe)
        n_s, n_a = unsafe.shape
        pad = np.zeros((n_s, n_a), dtype=np.int64)
        cnt = np.zeros(n_s, dtype=np.int64)
        for s in range(n_s):
            safe = np.flatnonzero(~unsafe[s])
            cnt[s] = safe.shape[0]
            pad[s, :safe.shape[0]] = safe
        pad.setflags(write=False)
        cnt.setflags(write=False)
        object.__setattr__(self, "_safe_pad", pad)
        object.__setattr__(self, "_safe_cnt", cnt)
        object.__setattr__(self, "_rng", np.random.default_rng(self.seed))

    def dist(self, s: int, proposed: int):
        n_a = self.unsafe.shape[1]
        cnt = self._safe_cnt[s]
        probs = np.zeros(n_a)
        if cnt == 0:
            return probs, 1.0
        probs[self._safe_pad[s, :cnt]] = 1.0 / cnt
        return probs, 0.0

    def sample(self, s: int, proposed: int, rng=None):
        rng = rng if rng is not None else self._rng
        cnt = self._safe_cnt[s]
        u = rng.random()
        if cnt == 0:
            return OFF
        return int(self._safe_pad[s, min(int(u * cnt), cnt - 1)])

    def vector_sample(self, s, proposed, u):
        """Batched draw; returns action codes with n_actions meaning off."""
        cnt = self._safe_cnt[s]
        k = np.minimum((u * cnt).astype(np.int64), np.maximum(cnt - 1, 0))
        out = self._safe_pad[s, k]
        return np.where(cnt == 0, self.unsafe.shape[1], out)


@dataclass(frozen=True, eq=False)
class StrictShutdownOperator:
    """Every intervention switches the system off."""

    n_actions: int
    kind = "strict_shutdown"

    def dist(self, s: int, proposed: int):
        return np.zeros(self.n_actions), 1.0

    def sample(self, s: int, proposed: int, rng=None):
        return OFF

    def vector_sample(self, s, proposed, u):
        return np.full(s.shape[0], self.n_actions, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class PermitOrShutdownOperator:
    """Per-state verdict: permit passes the proposal through, off shuts down.

    States missing from the decision map shut down.
    """

    n_actions: int
    decisions: dict  # state index -> "permit" | "off"
    kind = "permit_or_shutdown"

    def __post_init__(self):
        for s, d in self.decisions.items():
            if d not in ("permit", "off"):
                raise GameConfigError(f"decision for state {s} must be permit or off, got {d!r}")

    def _permits(self, s: int) -> bool:
        return self.decisions.get(s, "off") == "permit"

    def dist(self, s: int, proposed: int):
        probs = np.zeros(self.n_actions)
        if self._permits(s):
            probs[proposed] = 1.0
            return probs, 0.0
        return probs, 1.0

    def sample(self, s: int, proposed: int, rng=None):
        return int(proposed) if self._permits(s) else OFF

    def vector_sample(self, s, proposed, u):
        permit = np.array([self._permits(int(si)) for si in s])
        return np.where(permit, proposed, self.n_actions)


@dataclass(frozen=True, eq=False)
class EpsilonBoundedOperator:
    """Best safe action whose one-step regret under the base policy is <= epsilon.

    choice[s] holds the argmax-Q safe action with Q_sigma(s, a) >= V_sigma(s)
    - epsilon (ties to the lowest index), or -1 when no action qualifies and
    the operator must shut down.
    """

    choice: np.ndarray  # (S,) int, -1 = off
    epsilon: float
    n_actions: int
    kind = "epsilon_bounded"

    def __post_init__(self):
        c = np.array(self.choice, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "choice", c)

    def dist(self, s: int, proposed: int):
        probs = np.zeros(self.n_actions)
        a = self.choice[s]
        if a < 0:
            return probs, 1.0
        probs[a] = 1.0
        return probs, 0.0

    def sample(self, s: int, proposed: int, rng=None):
        a = self.choice[s]
        return OFF if a < 0 else int(a)

    def vector_sample(self, s, proposed, u):
        a = self.choice[s]
        return np.where(a < 0, self.n_actions, a)


def make_over_operator(kind: str, *, unsafe=None, seed=None, decisions=None,
                       q_sigma=None, v_sigma=None, epsilon=None,
                       n_actions=None, allow_shutdown=True):
    """Build one of the four oversight operators; validates its parameters."""
    if kind == "random_safe":
        if unsafe is None:
            raise GameConfigError("random_safe needs the unsafe action mask")
        return RandomSafeOperator(unsafe=np.asarray(unsafe, dtype=bool), seed=seed)
    if kind == "strict_shutdown":
        if n_actions is None:
            if unsafe is None:
                raise GameConfigError("strict_shutdown needs n_actions (or an unsafe mask)")
            n_actions = np.asarray(unsafe).shape[1]
        return StrictShutdownOperator(n_actions=int(n_actions))
    if kind == "permit_or_shutdown":
        if decisions is None or n_actions is None:
            raise GameConfigError("permit_or_shutdown needs a decision map and n_actions")
        return PermitOrShutdownOperator(n_actions=int(n_actions), decisions=dict(decisions))
    if kind == "epsilon_bounded":
        if unsafe is None or q_sigma is None or v_sigma is None or epsilon is None:
            raise GameConfigError("epsilon_bounded needs unsafe, q_sigma, v_sigma, epsilon")
        if epsilon < 0:
            raise GameConfigError(f"epsilon must be nonnegative, got {epsilon}")
        unsafe = np.asarray(unsafe, dtype=bool)
        q = np.asarray(q_sigma, dtype=np.float64)
        v = np.asarray(v_sigma, dtype=np.float64)
        qualifies = (~unsafe) & (q >= (v - epsilon - _Q_GATE_SLACK)[:, None])
        masked = np.where(qualifies, q, -np.inf)
        choice = np.where(qualifies.any(axis=1), np.argmax(masked, axis=1), -1)
        if not allow_shutdown and np.any(choice < 0):
            s = int(np.flatnonzero(choice < 0)[0])
            raise GameConfigError(f"no action within epsilon={epsilon} at state {s} and shutdown is disallowed")
        return EpsilonBoundedOperator(choice=choice, epsilon=float(epsilon),
                                      n_actions=unsafe.shape[1])
    raise GameConfigError(f"unknown operator kind {kind!r}")


# ---------------------------------------------------------------------------
# reward models


@dataclass(frozen=True)
class RewardConfig:
    """Team reward constants: violation penalty, ask and oversee costs.

    The penalty must dominate the total avoidable oversight cost,
    lambda_viol > (c_ask + c_over) / (1 - gamma), or shutting down would
    never beat violating.
    """

    lambda_viol: float
    c_ask: float
    c_over: float
    step_penalty: float = 0.01
    gamma: float = 0.99

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise GameConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.c_ask <= 0.0 or self.c_over <= 0.0:
            raise GameConfigError("c_ask and c_over must be positive")
        if self.step_penalty < 0.0:
            raise GameConfigError("step_penalty is a nonnegative magnitude")
        threshold = (self.c_ask + self.c_over) / (1.0 - self.gamma)
        if not self.lambda_viol > threshold:
            raise GameConfigError(
                f"lambda_viol={self.lambda_viol} must exceed "
                f"(c_ask + c_over)/(1 - gamma) = {threshold}")


@dataclass(frozen=True, eq=False)
class SharedRewardModel:
    cfg: RewardConfig
    kind = "shared"


@dataclass(frozen=True, eq=False)
class StrictShutdownConfig:
    """Outcome rewards per (state, env action) for each player, zero on off,
    plus a per-state ask charge levied on the human whenever the agent asks."""

    outcome_si: np.ndarray  # (S, A)
    outcome_h: np.ndarray   # (S, A)
    c_ask: np.ndarray       # (S,)
    kind = "strict_shutdown"

    def __post_init__(self):
        osi = np.array(self.outcome_si, dtype=np.float64)
        oh = np.array(self.outcome_h, dtype=np.float64)
        ca = np.array(self.c_ask, dtype=np.float64)
        if osi.shape != oh.shape or ca.shape != (osi.shape[0],):
            raise GameConfigError("outcome tables and c_ask shapes disagree")
        if np.any(ca < 0):
            raise GameConfigError("c_ask entries must be nonnegative")
        for a in (osi, oh, ca):
            a.setflags(write=False)
        object.__setattr__(self, "outcome_si", osi)
        object.__setattr__(self, "outcome_h", oh)
        object.__setattr__(self, "c_ask", ca)


@dataclass(frozen=True, eq=False)
class ExplicitRewards:
    """Per-player reward tables indexed by (state, si meta-action, h meta-action)."""

    r_si: np.ndarray  # (S, 2, 2)
    r_h: np.ndarray   # (S, 2, 2)
    kind = "explicit"

    def __post_init__(self):
        rsi = np.array(self.r_si, dtype=np.float64)
        rh = np.array(self.r_h, dtype=np.float64)
        if rsi.shape != rh.shape or rsi.ndim != 3 or rsi.shape[1:] != (2, 2):
            raise GameConfigError(f"reward tables must be (S, 2, 2), got {rsi.shape}")
        rsi.setflags(write=False)
        rh.setflags(write=False)
        object.__setattr__(self, "r_si", rsi)
        object.__setattr__(self, "r_h", rh)


@dataclass(frozen=True, eq=False)
class PerturbedRewards:
    """Shared reward map plus per-player perturbations bounded by kappa."""

    shared: np.ndarray  # (S, 2, 2)
    xi_si: np.ndarray
    xi_h: np.ndarray
    kappa: float
    kind = "perturbed"

    def __post_init__(self):
        sh = np.array(self.shared, dtype=np.float64)
        xs = np.array(self.xi_si, dtype=np.float64)
        xh = np.array(self.xi_h, dtype=np.float64)
        if sh.shape != xs.shape or sh.shape != xh.shape:
            raise GameConfigError("perturbation shapes disagree with the shared map")
        if self.kappa < 0:
            raise GameConfigError("kappa must be nonnegative")
        for x in (xs, xh):
            if x.size and np.max(np.abs(x)) > self.kappa + 1e-15:
                raise GameConfigError("perturbation exceeds kappa in sup norm")
        for a in (sh, xs, xh):
            a.setflags(write=False)
        object.__setattr__(self, "shared", sh)
        object.__setattr__(self, "xi_si", xs)
        object.__setattr__(self, "xi_h", xh)


def perturb_rewards(shared: np.ndarray, kappa: float, seed) -> PerturbedRewards:
    """Draw uniform [-kappa, kappa] per-player perturbations of a shared map."""
    if kappa < 0:
        raise GameConfigError("kappa must be nonnegative")
    shared = np.asarray(shared, dtype=np.float64)
    rng = np.random.default_rng(seed)
    xi_si = rng.uniform(-kappa, kappa, shared.shape)
    xi_h = rng.uniform(-kappa, kappa, shared.shape)
    return PerturbedRewards(shared=shared, xi_si=xi_si, xi_h=xi_h, kappa=float(kappa))


def shared_reward(s: int, a_si: int, a_h: int, exec_outcome, cfg: RewardConfig,
                  unsafe: np.ndarray) -> float:
    """Team reward for one resolved step; off counts as safe."""
    violated = exec_outcome != OFF and bool(unsafe[s, exec_outcome])
    return (-cfg.lambda_viol * violated
            - cfg.c_ask * (a_si == ASK)
            - cfg.c_over * (a_h == OVERSEE)
            - cfg.step_penalty)


def strict_shutdown_rewards(s: int, a_si: int, a_h: int, exec_outcome,
                            cfg: StrictShutdownConfig):
    """(r_si, r_h) for one resolved step under the strict-shutdown model.

    The ask charge hits the human whenever the agent asked, even if the
    human trusted; switching off pays zero outcome reward.
    """
    if exec_outcome == OFF:
        base_si = base_h = 0.0
    else:
        base_si = float(cfg.outcome_si[s, exec_outcome])
        base_h = float(cfg.outcome_h[s, exec_outcome])
    charge = float(cfg.c_ask[s]) if a_si == ASK else 0.0
    return base_si, base_h - charge


# ---------------------------------------------------------------------------
# the wrapper game


@dataclass(frozen=True, eq=False)
class OversightGame:
    """Precomputed augmented Markov game; the off state is index n_base."""

    mdp: Mdp
    sigma: BasePolicy
    unsafe: np.ndarray       # (S, A) bool
    operator: object
    rewards: object
    gamma: float
    exec_probs: np.ndarray   # (S, 2, 2, A) env-action share of the exec outcome
    off_prob: np.ndarray     # (S, 2, 2)
    r_si: np.ndarray         # (S+1, 2, 2) expected rewards, off row zero
    r_h: np.ndarray
    kernel: np.ndarray       # (S+1, 2, 2, S+1)

    @property
    def n_base(self) -> int:
        return self.mdp.n_states

    @property
    def off_state(self) -> int:
        return self.mdp.n_states

    @property
    def n_states(self) -> int:
        return self.mdp.n_states + 1

    def violation_prob(self) -> np.ndarray:
        """(S, 2, 2) chance the executed action is unsafe."""
        return np.einsum("sija,sa->sij", self.exec_probs, self.unsafe.astype(float))

    def det_next(self):
        """Cached deterministic successor table of the base MDP, or None."""
        if "_det_next" not in self.__dict__:
            object.__setattr__(self, "_det_next", deterministic_next(self.mdp.kernel))
        return self._det_next

    def terminal_mask(self) -> np.ndarray:
        if "_terminal" not in self.__dict__:
            object.__setattr__(self, "_terminal", self.mdp.terminal_mask())
        return self._terminal


def build_oversight_game(mdp: Mdp, sigma: BasePolicy, unsafe, operator,
                         rewards, gamma: float | None = None) -> OversightGame:
    """Assemble the augmented game: exec mixtures, expected rewards, kernel."""
    unsafe = np.asarray(unsafe, dtype=bool)
    n_s, n_a = mdp.n_states, mdp.n_actions
    if sigma.probs.shape != (n_s, n_a):
        raise GameConfigError("base policy shape does not match the MDP")
    if unsafe.shape != (n_s, n_a):
        raise GameConfigError("unsafe mask shape does not match the MDP")
    if rewards.kind == "shared":
        if gamma is not None and gamma != rewards.cfg.gamma:
            raise GameConfigError("gamma disagrees with the shared reward config")
        gamma = rewards.cfg.gamma
    elif gamma is None:
        raise GameConfigError(f"{rewards.kind} rewards need an explicit gamma")
    if rewards.kind == "strict_shutdown" and operator.kind != "strict_shutdown":
        raise GameConfigError("strict-shutdown rewards require the strict-shutdown operator")
    if not 0.0 <= gamma < 1.0:
        raise GameConfigError(f"gamma must lie in [0, 1), got {gamma}")

    terminal = mdp.terminal_mask()
    exec_probs = np.zeros((n_s, 2, 2, n_a))
    off_prob = np.zeros((n_s, 2, 2))
    for s in range(n_s):
        sig = sigma.probs[s]
        # intervention mixture: propose from sigma, gate through the operator
        over_env = np.zeros(n_a)
        over_off = 0.0
        for a in np.flatnonzero(sig > 0.0):
            probs, p_off = operator.dist(s, int(a))
            over_env += sig[a] * probs
            over_off += sig[a] * p_off
        for i in (PLAY, ASK):
            for j in (TRUST, OVERSEE):
                if i == ASK and j == OVERSEE:
                    exec_probs[s, i, j] = over_env
                    off_prob[s, i, j] = over_off
                else:
                    exec_probs[s, i, j] = sig

    viol_prob = np.einsum("sija,sa->sij", exec_probs, unsafe.astype(float))
    r_si = np.zeros((n_s + 1, 2, 2))
    r_h = np.zeros((n_s + 1, 2, 2))
    if rewards.kind == "shared":
        cfg = rewards.cfg
        meta = np.zeros((2, 2))
        meta[ASK, :] += cfg.c_ask
        meta[:, OVERSEE] += cfg.c_over
        r = -cfg.lambda_viol * viol_prob - meta[None, :, :] - cfg.step_penalty
        r_si[:n_s] = r
        r_h[:n_s] = r
    elif rewards.kind == "strict_shutdown":
        base_si = np.einsum("sija,sa->sij", exec_probs, rewards.outcome_si)
        base_h = np.einsum("sija,sa->sij", exec_probs, rewards.outcome_h)
        r_si[:n_s] = base_si
        r_h[:n_s] = base_h
        r_h[:n_s, ASK, :] -= rewards.c_ask[:, None]
    elif rewards.kind == "explicit":
        r_si[:n_s] = rewards.r_si
        r_h[:n_s] = rewards.r_h
    elif rewards.kind == "perturbed":
        r_si[:n_s] = rewards.shared + rewards.xi_si
        r_h[:n_s] = rewards.shared + rewards.xi_h
    else:
        raise GameConfigError(f"unknown reward model kind {rewards.kind!r}")
    r_si[:n_s][terminal] = 0.0
    r_h[:n_s][terminal] = 0.0

    kernel = np.zeros((n_s + 1, 2, 2, n_s + 1))
    kernel[:n_s, :, :, :n_s] = np.einsum("sija,sat->sijt", exec_probs, mdp.kernel)
    kernel[:n_s, :, :, n_s] = off_prob
    for s in np.flatnonzero(terminal):
        kernel[s] = 0.0
        kernel[s, :, :, s] = 1.0
        exec_probs[s] = sigma.probs[s]
        off_prob[s] = 0.0
    kernel[n_s, :, :, n_s] = 1.0

    bad = np.abs(kernel.sum(axis=3) - 1.0) > ROW_SUM_ATOL
    if np.any(bad):
        s, i, j = np.argwhere(bad)[0]
        raise GameConfigError(f"augmented kernel row ({s}, {i}, {j}) does not sum to 1")

    return OversightGame(mdp=mdp, sigma=sigma, unsafe=unsafe, operator=operator,
                         rewards=rewards, gamma=float(gamma),
                         exec_probs=exec_probs, off_prob=off_prob,
                         r_si=r_si, r_h=r_h, kernel=kernel)


def exec_action(game: OversightGame, s: int, a_si: int, a_h: int, rng):
    """Resolve one joint meta-action into an env action or off.

    The base proposal is sampled first; oversight only sees it when the
    agent asked and the human oversaw.
    """
    outcome, _ = exec_action_with_proposal(game, s, a_si, a_h, rng)
    return outcome


def exec_action_with_proposal(game: OversightGame, s: int, a_si: int, a_h: int, rng):
    """(outcome, proposed): like exec_action but also returns sigma's draw."""
    if s == game.off_state:
        raise GameStateError("the system is off; no further actions resolve")
    if a_si not in (PLAY, ASK) or a_h not in (TRUST, OVERSEE):
        raise ValueError(f"bad meta-action pair ({a_si}, {a_h})")
    sig = game.sigma.probs[s]
    proposed = int(np.argmax(sig)) if sig.max() == 1.0 else _sample_row(sig, rng.random())
    if a_si == ASK and a_h == OVERSEE:
        return game.operator.sample(s, proposed, rng), proposed
    return proposed, proposed


@dataclass(frozen=True)
class StepResult:
    next_state: int
    r_si: float
    r_h: float
    exec_outcome: object  # env action index or OFF
    proposed: int
    violation: bool


def step(game: OversightGame, s: int, a_si: int, a_h: int, rng) -> StepResult:
    """Resolve meta-actions, pay sampled rewards, and advance the state."""
    if s != game.off_state and game.terminal_mask()[s]:
        raise GameStateError(f"state {s} is terminal; the episode is over")
    outcome, proposed = exec_action_with_proposal(game, s, a_si, a_h, rng)
    violation = outcome != OFF and bool(game.unsafe[s, outcome])
    kind = game.rewards.kind
    if kind == "shared":
        r = shared_reward(s, a_si, a_h, outcome, game.rewards.cfg, game.unsafe)
        r_si = r_h = r
    elif kind == "strict_shutdown":
        r_si, r_h = strict_shutdown_rewards(s, a_si, a_h, outcome, game.rewards)
    else:
        r_si = float(game.r_si[s, a_si, a_h])
        r_h = float(game.r_h[s, a_si, a_h])
    if outcome == OFF:
        nxt = game.off_state
    else:
        det = game.det_next()
        if det is not None:
            nxt = int(det[s, outcome])
        else:
            nxt = _sample_row(game.mdp.kernel[s, outcome], rng.random())
    return StepResult(next_state=nxt, r_si=r_si, r_h=r_h, exec_outcome=outcome,
                      proposed=proposed, violation=violation)


def sigma_risk_states(game: OversightGame) -> np.ndarray:
    """(S,) bool: states where the base policy puts mass on an unsafe action.

    These are the states where unchecked autonomy would violate, so they are
    exactly where a trained agent should keep asking.
    """
    return np.einsum("sa,sa->s", game.sigma.probs, game.unsafe.astype(float)) > 0.0


def vector_rewards(game: OversightGame, s: np.ndarray, a_si: np.ndarray,
                   a_h: np.ndarray, exec_code: np.ndarray):
    """Realized per-step rewards for batched rollouts.

    exec_code uses n_actions as the off sentinel, matching the operators'
    vector_sample convention. Returns (r_si, r_h, violation) arrays; must
    agree entrywise with step() on the same resolved transitions.
    """
    n_a = game.mdp.n_actions
    live = exec_code < n_a
    violation = np.zeros(s.shape, dtype=bool)
    violation[live] = game.unsafe[s[live], exec_code[live]]
    kind = game.rewards.kind
    if kind == "shared":
        cfg = game.rewards.cfg
        r = (-cfg.lambda_viol * violation
             - cfg.c_ask * (a_si == ASK)
             - cfg.c_over * (a_h == OVERSEE)
             - cfg.step_penalty)
        return r, r.copy(), violation
    if kind == "strict_shutdown":
        cfg = game.rewards
        r_si = np.zeros(s.shape)
        r_h = np.zeros(s.shape)
        r_si[live] = cfg.outcome_si[s[live], exec_code[live]]
        r_h[live] = cfg.outcome_h[s[live], exec_code[live]]
        r_h -= cfg.c_ask[s] * (a_si == ASK)
        return r_si, r_h, violation
    return game.r_si[s, a_si, a_h], game.r_h[s, a_si, a_h], violation
