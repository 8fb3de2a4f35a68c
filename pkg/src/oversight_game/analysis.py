"""Exact solvers and theorem checks for the oversight wrapper game.

Everything here treats the wrapper as a two-player Markov game on the
augmented state space (base states plus off) and works with exact linear
algebra; nothing is sampled unless a profile set is too large to enumerate,
in which case checks fall back to a seeded stochastic-profile sample and
say so in their report.

Potential test: a finite game is a Markov potential game over a profile set
iff, anchoring Phi_s(a, b) = V_si_s(a, b0) + V_h_s(a, b) - V_h_s(a, b0) at a
reference profile (a0, b0), the residual V_si - Phi is independent of the
SI policy (the H residual is independent of b by construction). The max
deviation from independence is the reported violation; it is zero exactly
when every unilateral-deviation identity holds, by telescoping.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .mdp import Mdp, BasePolicy, evaluate_policy
from .game import (OversightGame, GameConfigError, PLAY, ASK, TRUST, OVERSEE,
                   ExplicitRewards, PermitOrShutdownOperator,
                   build_oversight_game)


class AnalysisError(RuntimeError):
    """A check's precondition failed or an instance exceeds its size cap."""


# ---------------------------------------------------------------------------
# joint policies and exact evaluation


@dataclass(frozen=True, eq=False)
class JointPolicy:
    """Per-state meta-action distributions for both players, base states only."""

    si: np.ndarray  # (S, 2)
    h: np.ndarray   # (S, 2)

    def __post_init__(self):
        si = np.array(self.si, dtype=np.float64)
        h = np.array(self.h, dtype=np.float64)
        for name, p in (("si", si), ("h", h)):
            if p.ndim != 2 or p.shape[1] != 2:
                raise ValueError(f"{name} policy must be (S, 2), got {p.shape}")
            if np.any(p < -1e-12) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
                raise ValueError(f"{name} policy rows must be distributions")
        if si.shape != h.shape:
            raise ValueError("player policies disagree on the state count")
        si.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "si", si)
        object.__setattr__(self, "h", h)

    @property
    def n_states(self) -> int:
        return self.si.shape[0]

    @staticmethod
    def uniform(n_states: int) -> "JointPolicy":
        return JointPolicy(np.full((n_states, 2), 0.5), np.full((n_states, 2), 0.5))

    @staticmethod
    def deterministic(si_actions, h_actions) -> "JointPolicy":
        si_actions = np.asarray(si_actions, dtype=int)
        h_actions = np.asarray(h_actions, dtype=int)
        si = np.zeros((si_actions.shape[0], 2))
        h = np.zeros((h_actions.shape[0], 2))
        si[np.arange(si.shape[0]), si_actions] = 1.0
        h[np.arange(h.shape[0]), h_actions] = 1.0
        return JointPolicy(si, h)

    @staticmethod
    def all_ask_trust(n_states: int) -> "JointPolicy":
        return JointPolicy.deterministic(np.full(n_states, ASK), np.full(n_states, TRUST))


def random_joint(n_states: int, rng: np.random.Generator,
                 low: float = 0.05, high: float = 0.95) -> JointPolicy:
    """Random interior joint policy; probabilities kept away from 0 and 1 so
    every profile stays reachable under it."""
    p_si = rng.uniform(low, high, n_states)
    p_h = rng.uniform(low, high, n_states)
    return JointPolicy(np.stack([p_si, 1.0 - p_si], axis=1),
                       np.stack([p_h, 1.0 - p_h], axis=1))


def one_state_deviation(joint: JointPolicy, player: str, s: int, action: int) -> JointPolicy:
    """Copy of the joint with one player's row at s made deterministic."""
    if player not in ("si", "h"):
        raise ValueError(f"player must be 'si' or 'h', got {player!r}")
    row = np.zeros(2)
    row[action] = 1.0
    si = np.array(joint.si)
    h = np.array(joint.h)
    if player == "si":
        si[s] = row
    else:
        h[s] = row
    return JointPolicy(si, h)


@dataclass(frozen=True, eq=False)
class ValueTable:
    """State values over the augmented space; the last index is the off state."""

    values: np.ndarray  # (S + 1,)

    def at(self, s: int) -> float:
        return float(self.values[s])


def _joint_chain(game: OversightGame, joint: JointPolicy):
    """Induced Markov chain and per-player expected rewards of a joint policy."""
    n_b, n = game.n_base, game.n_states
    if joint.n_states != n_b:
        raise ValueError("joint policy does not match the game's base state count")
    w = np.einsum("si,sj->sij", joint.si, joint.h)
    p = np.empty((n, n))
    p[:n_b] = np.einsum("sij,sijt->st", w, game.kernel[:n_b])
    p[n_b] = 0.0
    p[n_b, n_b] = 1.0
    r_si = np.zeros(n)
    r_h = np.zeros(n)
    r_si[:n_b] = np.einsum("sij,sij->s", w, game.r_si[:n_b])
    r_h[:n_b] = np.einsum("sij,sij->s", w, game.r_h[:n_b])
    return p, r_si, r_h


def _solve_joint(game: OversightGame, joint: JointPolicy, tol: float = 1e-9,
                 direct_cap: int = 4096, extra_rewards=None):
    """(v_si, v_h[, v_extra]) for one joint policy; direct solve or certified
    fixed-point iteration past the size cap."""
    p, r_si, r_h = _joint_chain(game, joint)
    cols = [r_si, r_h]
    if extra_rewards is not None:
        w = np.einsum("si,sj->sij", joint.si, joint.h)
        r_x = np.zeros(game.n_states)
        r_x[:game.n_base] = np.einsum("sij,sij->s", w, extra_rewards[:game.n_base])
        cols.append(r_x)
    rhs = np.stack(cols, axis=1)
    n = game.n_states
    if n <= direct_cap:
        sol = np.linalg.solve(np.eye(n) - game.gamma * p, rhs)
    else:
        sol = np.zeros_like(rhs)
        shrink = game.gamma / max(1.0 - game.gamma, 1e-15)
        for _ in range(10_000_000):
            nxt = rhs + game.gamma * (p @ sol)
            gap = np.max(np.abs(nxt - sol))
            sol = nxt
            if shrink * gap <= tol:
                break
        else:
            raise AnalysisError("joint evaluation did not converge")
    return tuple(sol[:, k] for k in range(sol.shape[1]))


def joint_value(game: OversightGame, joint: JointPolicy, player: str = "si",
                tol: float = 1e-9, direct_cap: int = 4096) -> ValueTable:
    """Exact discounted value of a joint policy for one player."""
    v_si, v_h = _solve_joint(game, joint, tol=tol, direct_cap=direct_cap)
    if player == "si":
        return ValueTable(v_si)
    if player == "h":
        return ValueTable(v_h)
    raise ValueError(f"player must be 'si' or 'h', got {player!r}")


# ---------------------------------------------------------------------------
# deterministic profile enumeration (shared by the MPG and equilibrium checks)


def _free_states(game: OversightGame):
    terminal = game.mdp.terminal_mask()
    return [s for s in range(game.n_base) if not terminal[s]]


def _profile_matrices(n_base: int, free, fill_action: int):
    """All deterministic policies over the free states as (2^k, S, 2) tensors.

    Bit b of the profile id gives the action at free[b]; bound states
    (terminals) take fill_action, which cannot affect any value.
    """
    k = len(free)
    ids = np.arange(2 ** k)
    mats = np.zeros((2 ** k, n_base, 2))
    mats[:, :, fill_action] = 1.0
    for b, s in enumerate(free):
        bit = (ids >> b) & 1
        mats[:, s, 0] = 1.0 - bit
        mats[:, s, 1] = bit.astype(float)
    return mats


def _batched_values(game: OversightGame, si_mats, h_mats, extra_rewards=None):
    """Values of every (si, h) profile pair on the profile grid.

    Returns arrays shaped (n_si, n_h, S + 1); one batched LU solve overall.
    """
    n_b, n = game.n_base, game.n_states
    n_a, n_h = si_mats.shape[0], h_mats.shape[0]
    w = np.einsum("asi,bsj->absij", si_mats, h_mats)
    p = np.zeros((n_a, n_h, n, n))
    p[:, :, :n_b, :] = np.einsum("absij,sijt->abst", w, game.kernel[:n_b])
    p[:, :, n_b, n_b] = 1.0
    lhs = np.eye(n)[None, None] - game.gamma * p
    rewards = [game.r_si, game.r_h]
    if extra_rewards is not None:
        rewards.append(extra_rewards)
    rhs = np.zeros((n_a, n_h, n, len(rewards)))
    for k, r in enumerate(rewards):
        rhs[:, :, :n_b, k] = np.einsum("absij,sij->abs", w, r[:n_b])
    sol = np.linalg.solve(lhs.reshape(-1, n, n), rhs.reshape(-1, n, len(rewards)))
    sol = sol.reshape(n_a, n_h, n, len(rewards))
    return tuple(sol[..., k] for k in range(len(rewards)))


# ---------------------------------------------------------------------------
# Markov potential game certification


@dataclass(frozen=True, eq=False)
class PotentialReport:
    is_mpg: bool
    max_violation: float
    tol: float
    mode: str            # "exhaustive" | "sampled"
    n_profiles: int
    free_states: tuple
    phi: np.ndarray | None        # (n_si, n_h, S + 1) potential per profile
    dummy_si: np.ndarray | None   # (n_h, S + 1): SI residual, depends on H only
    dummy_h: np.ndarray | None    # (n_si, S + 1)
    values_si: np.ndarray | None
    values_h: np.ndarray | None


def check_mpg(game: OversightGame, tol: float = 1e-9, profile_cap: int = 65536,
              seed: int = 0, n_samples: int = 50) -> PotentialReport:
    """Certify (or refute) the potential property over a policy set.

    Exhaustive over all deterministic joint profiles when 4^|free| fits the
    cap, otherwise a seeded sample of stochastic profiles. Shared-reward
    games report the common value as the potential and zero dummy terms.
    """
    free = _free_states(game)
    shared = game.rewards.kind == "shared"
    if 4 ** len(free) <= profile_cap:
        si_mats = _profile_matrices(game.n_base, free, fill_action=PLAY)
        h_mats = _profile_matrices(game.n_base, free, fill_action=TRUST)
        v_si, v_h = _batched_values(game, si_mats, h_mats)
        a0 = si_mats.shape[0] - 1  # all-ask
        b0 = 0                     # all-trust
        phi = v_si[:, b0][:, None, :] + v_h - v_h[:, b0][:, None, :]
        d_si = v_si - phi
        d_h = v_h - phi
        viol = np.max(np.abs(d_si - d_si[a0][None]))
        viol = max(viol, np.max(np.abs(d_h - d_h[:, b0][:, None])))
        if shared:
            viol = max(viol, float(np.max(np.abs(v_si - v_h))))
            phi_out, dummy_si, dummy_h = v_si, np.zeros_like(d_si[a0]), np.zeros_like(d_h[:, b0])
        else:
            phi_out, dummy_si, dummy_h = phi, d_si[a0], d_h[:, b0]
        return PotentialReport(
            is_mpg=bool(viol < tol), max_violation=float(viol), tol=tol,
            mode="exhaustive", n_profiles=si_mats.shape[0] * h_mats.shape[0],
            free_states=tuple(free), phi=phi_out, dummy_si=dummy_si,
            dummy_h=dummy_h, values_si=v_si, values_h=v_h)

    # sampled fallback: stochastic profiles against the all-ask/all-trust anchor
    rng = np.random.default_rng(seed)
    n_b = game.n_base
    anchor = JointPolicy.all_ask_trust(n_b)

    def _rand_rows():
        p = rng.uniform(0.05, 0.95, n_b)
        return np.stack([p, 1.0 - p], axis=1)

    v_si_00, v_h_00 = _solve_joint(game, anchor)
    viol = 0.0
    for _ in range(n_samples):
        alpha, beta = _rand_rows(), _rand_rows()
        j_ab = JointPolicy(alpha, beta)
        j_a0 = JointPolicy(alpha, anchor.h)
        j_0b = JointPolicy(anchor.si, beta)
        v_si_ab, v_h_ab = _solve_joint(game, j_ab)
        v_si_a0, v_h_a0 = _solve_joint(game, j_a0)
        v_si_0b, v_h_0b = _solve_joint(game, j_0b)
        d = (v_si_ab - v_si_a0 - v_h_ab + v_h_a0) \
            - (v_si_0b - v_si_00 - v_h_0b + v_h_00)
        viol = max(viol, float(np.max(np.abs(d))))
        if shared:
            viol = max(viol, float(np.max(np.abs(v_si_ab - v_h_ab))))
    return PotentialReport(
        is_mpg=bool(viol < tol), max_violation=float(viol), tol=tol,
        mode="sampled", n_profiles=n_samples, free_states=tuple(free),
        phi=None, dummy_si=None, dummy_h=None, values_si=None, values_h=None)


# ---------------------------------------------------------------------------
# local alignment (one-state ask/play deviations)


def _si_deviation_values(game: OversightGame, joint: JointPolicy, s: int,
                         tol: float = 1e-9, direct_cap: int = 4096):
    """Values at state s for the play@s and ask@s unilateral SI deviations."""
    v_si_p, v_h_p = _solve_joint(game, one_state_deviation(joint, "si", s, PLAY),
                                 tol=tol, direct_cap=direct_cap)
    v_si_a, v_h_a = _solve_joint(game, one_state_deviation(joint, "si", s, ASK),
                                 tol=tol, direct_cap=direct_cap)
    dv_si = float(v_si_p[s] - v_si_a[s])
    dv_h = float(v_h_p[s] - v_h_a[s])
    return dv_si, dv_h


def ask_burden_gap(game: OversightGame, joint: JointPolicy, s: int,
                   tol: float = 1e-9) -> float:
    """Dummy-term gap at s: how much more the human prefers autonomy than
    the agent does, [dV_h] - [dV_si] across the play@s vs ask@s deviations."""
    dv_si, dv_h = _si_deviation_values(game, joint, s, tol=tol)
    return dv_h - dv_si


@dataclass(frozen=True, eq=False)
class AlignmentReport:
    states: tuple
    dv_si: np.ndarray
    dv_h: np.ndarray
    gap: np.ndarray              # dv_h - dv_si per state
    premise_failures: tuple      # states where the ask-burden premise fails
    violations: tuple            # states with dv_si >= 0 but dv_h < -tol
    tol: float

    @property
    def holds(self) -> bool:
        return not self.violations


def verify_local_alignment(game: OversightGame, joint: JointPolicy,
                           tol: float = 1e-9) -> AlignmentReport:
    """Check state by state that an agent-improving switch to autonomy never
    hurts the human (given the ask-burden premise, which is also measured)."""
    states = _free_states(game)
    dv_si = np.zeros(len(states))
    dv_h = np.zeros(len(states))
    for k, s in enumerate(states):
        dv_si[k], dv_h[k] = _si_deviation_values(game, joint, s, tol=tol)
    gap = dv_h - dv_si
    premise = tuple(s for k, s in enumerate(states) if gap[k] < -tol)
    viols = tuple(s for k, s in enumerate(states)
                  if dv_si[k] >= 0.0 and dv_h[k] < -tol)
    return AlignmentReport(states=tuple(states), dv_si=dv_si, dv_h=dv_h, gap=gap,
                           premise_failures=premise, violations=viols, tol=tol)


# ---------------------------------------------------------------------------
# monotone autonomy paths


@dataclass(frozen=True, eq=False)
class PathReport:
    switches: tuple          # states switched from ask to play, in order
    v_h_history: np.ndarray  # (len(switches) + 1, S + 1)
    worst_drop: float        # most negative state-wise V_h change along the path
    monotone: bool
    tol: float


def verify_path_monotonic(game: OversightGame, joint: JointPolicy,
                          tol: float = 1e-9) -> PathReport:
    """Greedily hand states to autonomy and confirm the human never loses.

    A switch ask->play at one state is taken when it leaves the agent's
    value no worse everywhere (>= -tol) and strictly better somewhere
    (> tol). After each accepted switch the human's value vector must be
    state-wise non-decreasing within tol.
    """
    cur = joint
    v_si_cur, v_h_cur = _solve_joint(game, cur)
    history = [v_h_cur]
    switches = []
    worst = 0.0
    monotone = True
    while True:
        accepted = None
        for s in _free_states(game):
            if cur.si[s, PLAY] >= 1.0:
                continue
            cand = one_state_deviation(cur, "si", s, PLAY)
            v_si_c, v_h_c = _solve_joint(game, cand)
            d = v_si_c - v_si_cur
            if d.min() >= -tol and d.max() > tol:
                accepted = (s, cand, v_si_c, v_h_c)
                break
        if accepted is None:
            break
        s, cur, v_si_cur, v_h_new = accepted
        drop = float((v_h_new - v_h_cur).min())
        worst = min(worst, drop)
        monotone = monotone and drop >= -tol
        v_h_cur = v_h_new
        history.append(v_h_cur)
        switches.append(s)
    return PathReport(switches=tuple(switches), v_h_history=np.stack(history),
                      worst_drop=worst, monotone=monotone, tol=tol)


# ---------------------------------------------------------------------------
# optimal equilibrium: safety and minimal oversight cost


@dataclass(frozen=True, eq=False)
class EquilibriumReport:
    si_actions: np.ndarray   # (S,) best profile, PLAY/ASK per state
    h_actions: np.ndarray    # (S,) TRUST/OVERSEE per state
    phi_start: float
    ne_ok: bool              # no unilateral deterministic deviation improves
    safety_ok: bool          # zero unsafe execution mass at reachable states
    cost_start: float        # discounted ask+oversee cost of the best profile
    min_other_safe_cost: float
    n_safe_profiles: int
    strict_margin: float     # min over other safe profiles of (their cost - ours)
    holds: bool
    tol: float


def verify_optimal_equilibrium(game: OversightGame, tol: float = 1e-9,
                               profile_cap: int = 65536) -> EquilibriumReport:
    """Exhaustively confirm the potential-argmax profile is a safe equilibrium
    with the lowest oversight cost among all safe deterministic profiles."""
    if game.rewards.kind != "shared":
        raise AnalysisError("equilibrium check needs a shared-reward game")
    free = _free_states(game)
    if 4 ** len(free) > profile_cap:
        raise AnalysisError(
            f"{4 ** len(free)} profiles exceed the cap {profile_cap}")
    cfg = game.rewards.cfg
    n_b = game.n_base
    cost = np.zeros((game.n_states, 2, 2))
    cost[:n_b, ASK, :] += cfg.c_ask
    cost[:n_b, :, OVERSEE] += cfg.c_over
    cost[:n_b][game.mdp.terminal_mask()] = 0.0
    si_mats = _profile_matrices(n_b, free, fill_action=PLAY)
    h_mats = _profile_matrices(n_b, free, fill_action=TRUST)
    v_si, _, v_cost = _batched_values(game, si_mats, h_mats, extra_rewards=cost)

    start = game.mdp.start
    phi_start = v_si[:, :, start]
    best_flat = int(np.argmax(phi_start))
    a_star, b_star = np.unravel_index(best_flat, phi_start.shape)
    best_val = float(phi_start[a_star, b_star])
    ne_ok = bool(phi_start[:, b_star].max() <= best_val + tol
                 and phi_start[a_star, :].max() <= best_val + tol)

    acts_si = np.argmax(si_mats, axis=2)  # (n_si, S)
    acts_h = np.argmax(h_mats, axis=2)
    viol_prob = game.violation_prob()

    def _reachable(ai: int, bj: int) -> np.ndarray:
        rows = game.kernel[np.arange(n_b), acts_si[ai], acts_h[bj]]  # (S, S+1)
        reach = np.zeros(game.n_states, dtype=bool)
        frontier = [start]
        reach[start] = True
        while frontier:
            s = frontier.pop()
            if s >= n_b:
                continue
            for t in np.flatnonzero(rows[s] > 0.0):
                if not reach[t]:
                    reach[t] = True
                    frontier.append(int(t))
        return reach[:n_b]

    def _is_safe(ai: int, bj: int) -> bool:
        reach = _reachable(ai, bj)
        vp = viol_prob[np.arange(n_b), acts_si[ai], acts_h[bj]]
        return bool(np.max(vp[reach], initial=0.0) <= 1e-12)

    safety_ok = _is_safe(a_star, b_star)
    cost_start = float(v_cost[a_star, b_star, start])
    min_other = np.inf
    n_safe = 0
    for ai in range(si_mats.shape[0]):
        for bj in range(h_mats.shape[0]):
            if not _is_safe(ai, bj):
                continue
            n_safe += 1
            if (ai, bj) != (a_star, b_star):
                min_other = min(min_other, float(v_cost[ai, bj, start]))
    strict_margin = min_other - cost_start
    holds = bool(ne_ok and safety_ok and cost_start <= min_other + tol)
    return EquilibriumReport(
        si_actions=acts_si[a_star], h_actions=acts_h[b_star],
        phi_start=best_val, ne_ok=ne_ok, safety_ok=safety_ok,
        cost_start=cost_start, min_other_safe_cost=float(min_other),
        n_safe_profiles=n_safe, strict_margin=float(strict_margin),
        holds=holds, tol=tol)


# ---------------------------------------------------------------------------
# performance bound of epsilon-bounded oversight


@dataclass(frozen=True, eq=False)
class ExecPolicy:
    """Induced environment policy of a joint profile: env mixture plus off mass."""

    env_probs: np.ndarray  # (S, A)
    off_mass: np.ndarray   # (S,)


def induced_env_policy(game: OversightGame, joint: JointPolicy) -> ExecPolicy:
    w = np.einsum("si,sj->sij", joint.si, joint.h)
    env = np.einsum("sij,sija->sa", w, game.exec_probs)
    off = np.einsum("sij,sij->s", w, game.off_prob)
    return ExecPolicy(env_probs=env, off_mass=off)


@dataclass(frozen=True, eq=False)
class BoundReport:
    name: str
    param: float
    observed: float
    bound: float
    holds: bool
    detail: dict


def performance_gap(mdp: Mdp, sigma: BasePolicy, exec_policy, epsilon: float,
                    tol: float = 1e-9) -> BoundReport:
    """Worst-state value loss of the overseen policy against the base policy,
    checked against epsilon / (1 - gamma)."""
    if isinstance(exec_policy, ExecPolicy):
        off = np.asarray(exec_policy.off_mass)
        if np.any(off > 1e-15):
            s = int(np.flatnonzero(off > 1e-15)[0])
            raise AnalysisError(f"exec policy enters the off state at state {s}")
        exec_base = BasePolicy(exec_policy.env_probs)
    else:
        exec_base = exec_policy
    v_sigma = evaluate_policy(mdp, sigma).v
    v_exec = evaluate_policy(mdp, exec_base).v
    gaps = v_sigma - v_exec
    worst = int(np.argmax(gaps))
    observed = float(gaps[worst])
    bound = epsilon / (1.0 - mdp.gamma)
    return BoundReport(name="performance", param=float(epsilon), observed=observed,
                       bound=bound, holds=bool(observed <= bound + tol),
                       detail={"worst_state": worst})


# ---------------------------------------------------------------------------
# relaxed alignment: bounded value difference and perturbed team rewards


@dataclass(frozen=True, eq=False)
class DiffReport:
    delta: float
    n_deviations: int
    violations: tuple        # (joint index, state) pairs breaking the implication
    lemma_worst: float       # min dummy-term gap, must be >= -2 delta - tol
    holds: bool
    tol: float


def bounded_diff_check(game: OversightGame, joints, tol: float = 1e-9) -> DiffReport:
    """Measure delta = max |V_h - V_si| over the tested set, then confirm that
    SI improvements beyond 2*delta never hurt the human, and that dummy-term
    gaps stay above -2*delta."""
    records = []
    delta = 0.0
    for joint in joints:
        v_si, v_h = _solve_joint(game, joint)
        delta = max(delta, float(np.max(np.abs(v_h - v_si))))
        per_state = []
        for s in _free_states(game):
            dv_si, dv_h = _si_deviation_values(game, joint, s)
            per_state.append((s, dv_si, dv_h))
            # deviation endpoints also belong to the tested set
            for target in (PLAY, ASK):
                dev = one_state_deviation(joint, "si", s, target)
                dv = _solve_joint(game, dev)
                delta = max(delta, float(np.max(np.abs(dv[1] - dv[0]))))
        records.append(per_state)
    violations = []
    lemma_worst = np.inf
    n_dev = 0
    for k, per_state in enumerate(records):
        for s, dv_si, dv_h in per_state:
            n_dev += 1
            lemma_worst = min(lemma_worst, dv_h - dv_si)
            if dv_si > 2.0 * delta and dv_h <= -tol:
                violations.append((k, s))
    lemma_ok = lemma_worst >= -2.0 * delta - tol
    return DiffReport(delta=delta, n_deviations=n_dev, violations=tuple(violations),
                      lemma_worst=float(lemma_worst),
                      holds=bool(not violations and lemma_ok), tol=tol)


def pmtg_alignment_slack(game: OversightGame, joint: JointPolicy,
                         tol: float = 1e-9) -> BoundReport:
    """Worst human value drop over agent-improving one-state deviations in a
    perturbed team game, checked against -4 kappa / (1 - gamma)."""
    if game.rewards.kind != "perturbed":
        raise AnalysisError("pmtg check needs a perturbed-rewards game")
    kappa = game.rewards.kappa
    worst = np.inf
    worst_state = None
    for s in _free_states(game):
        dv_si, dv_h = _si_deviation_values(game, joint, s)
        for d_si, d_h in ((dv_si, dv_h), (-dv_si, -dv_h)):
            if d_si >= 0.0 and d_h < worst:
                worst = d_h
                worst_state = s
    bound = 4.0 * kappa / (1.0 - game.gamma)
    observed = 0.0 if np.isinf(worst) else float(worst)
    return BoundReport(name="pmtg", param=float(kappa), observed=observed,
                       bound=-bound, holds=bool(observed >= -bound - tol),
                       detail={"worst_state": worst_state})


# ---------------------------------------------------------------------------
# off-switch reduction


def reduce_off_switch(r_play: float = 1.0, r_permit: float = 1.0,
                      decision: str = "permit", gamma: float = 0.99) -> OversightGame:
    """Three-state shutdown game: act now, or ask a gatekeeper who either
    permits the action or switches the system off.

    States: 0 = the single live state, 1 = acted (absorbing, zero future),
    plus the off state appended by the wrapper. Playing acts immediately;
    asking hands the proposal to a permit-or-shutdown operator.
    """
    if decision not in ("permit", "off"):
        raise GameConfigError(f"decision must be permit or off, got {decision!r}")
    kernel = np.zeros((2, 1, 2))
    kernel[0, 0, 1] = 1.0
    kernel[1, 0, 1] = 1.0
    mdp = Mdp(kernel=kernel, reward=np.zeros((2, 1)), gamma=gamma, start=0,
              terminals=frozenset({1}))
    sigma = BasePolicy.deterministic([0, 0], 1)
    operator = PermitOrShutdownOperator(n_actions=1, decisions={0: decision})
    r = np.zeros((2, 2, 2))
    r[0, PLAY, :] = r_play
    r[0, ASK, TRUST] = r_play
    r[0, ASK, OVERSEE] = r_permit if decision == "permit" else 0.0
    rewards = ExplicitRewards(r_si=r, r_h=r)
    return build_oversight_game(mdp, sigma, np.zeros((2, 1), dtype=bool),
                                operator, rewards, gamma=gamma)
