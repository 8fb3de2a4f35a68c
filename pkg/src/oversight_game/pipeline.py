"""End-to-end experiment pipeline and artifact emission.

Stages: train the base policy with Q-learning, freeze it, sprinkle taboo
cells, build the wrapper game, train both meta-policies with independent
policy gradient, run verification spot checks, and export figure data.
Every artifact is a text file; identical configs produce byte-identical
outputs.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from .mdp import BasePolicy, rollout
from .gridworld import GridWorld, build_four_rooms, sample_taboo
from .qlearn import QLearnConfig, QTable, q_learning, greedy_policy
from .game import (RewardConfig, SharedRewardModel, make_over_operator,
                   build_oversight_game, OversightGame,
                   PLAY, ASK, TRUST, OVERSEE, SI_NAMES, H_NAMES)
from .analysis import (JointPolicy, random_joint, check_mpg,
                       verify_local_alignment, verify_path_monotonic,
                       verify_optimal_equilibrium, ask_burden_gap, _solve_joint,
                       pmtg_alignment_slack, performance_gap, induced_env_policy,
                       reduce_off_switch)
from .ipg import (IpgConfig, MetricsSeries, train_ipg, save_checkpoint,
                  JointSoftmaxPolicy)
from . import instances


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# The taboo seed picks a layout whose base path crosses few risk states;
# dense-crossing draws stall in a no-termination regime under blanket
# oversight and never reach the autonomous phase within the iteration
# budget. lr and the baseline are calibrated to the same end.
DEFAULT_CONFIG = {
    "grid": {"width": 15, "height": 15, "goal_reward": 10.0,
             "step_penalty": -0.1, "max_steps": 300},
    "taboo": {"fraction": 0.25, "seed": 15},
    "qlearn": {"episodes": 10000, "alpha": 0.5, "gamma": 0.99,
               "epsilon_start": 1.0, "epsilon_end": 0.1,
               "epsilon_decay": 0.9995, "max_steps": 300, "seed": 0},
    "reward": {"lambda_viol": 50.0, "c_ask": 0.1, "c_over": 0.05,
               "step_penalty": 0.01, "gamma": 0.99},
    "operator": "random_safe",
    "ipg": {"iterations": 10000, "lr": 0.01, "gamma": 0.99, "batch_size": 32,
            "entropy_coef": 0.005, "grad_clip_norm": 1.0, "max_steps": 300,
            "seed": 0, "use_baseline": True},
    "out_dir": "artifacts",
}


@dataclass(frozen=True)
class ExperimentConfig:
    width: int
    height: int
    goal_reward: float
    step_penalty: float
    max_steps: int
    taboo_fraction: float
    taboo_seed: int
    qlearn: QLearnConfig
    reward: RewardConfig
    operator_kind: str
    ipg: IpgConfig
    out_dir: str

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - set(DEFAULT_CONFIG)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        merged = {}
        for key, default in DEFAULT_CONFIG.items():
            given = raw.get(key, {} if isinstance(default, dict) else None)
            if isinstance(default, dict):
                if not isinstance(given, dict):
                    raise ValueError(f"config section {key!r} must be an object")
                bad = set(given) - set(default)
                if bad:
                    raise ValueError(f"unknown keys in {key!r}: {sorted(bad)}")
                merged[key] = {**default, **given}
            else:
                merged[key] = default if given is None else given
        try:
            qcfg = QLearnConfig(**merged["qlearn"])
            rcfg = RewardConfig(**merged["reward"])
            icfg = IpgConfig(**merged["ipg"])
        except TypeError as err:
            raise ValueError(str(err)) from err
        return ExperimentConfig(
            width=int(merged["grid"]["width"]),
            height=int(merged["grid"]["height"]),
            goal_reward=float(merged["grid"]["goal_reward"]),
            step_penalty=float(merged["grid"]["step_penalty"]),
            max_steps=int(merged["grid"]["max_steps"]),
            taboo_fraction=float(merged["taboo"]["fraction"]),
            taboo_seed=int(merged["taboo"]["seed"]),
            qlearn=qcfg, reward=rcfg,
            operator_kind=str(merged["operator"]),
            ipg=icfg, out_dir=str(merged["out_dir"]))

    @staticmethod
    def from_file(path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError("config file must hold a JSON object")
        return ExperimentConfig.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "grid": {"width": self.width, "height": self.height,
                     "goal_reward": self.goal_reward,
                     "step_penalty": self.step_penalty,
                     "max_steps": self.max_steps},
            "taboo": {"fraction": self.taboo_fraction, "seed": self.taboo_seed},
            "qlearn": asdict(self.qlearn),
            "reward": asdict(self.reward),
            "operator": self.operator_kind,
            "ipg": asdict(self.ipg),
            "out_dir": self.out_dir,
        }


def save_sigma(sigma: BasePolicy, path) -> None:
    """Deterministic base policy as `state action` lines."""
    actions = sigma.mode_actions()
    with open(path, "w") as fh:
        fh.write(f"n_actions {sigma.probs.shape[1]}\n")
        for s, a in enumerate(actions):
            fh.write(f"{s} {int(a)}\n")


def load_sigma(path) -> BasePolicy:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "n_actions":
            raise ValueError("sigma file must start with an n_actions header")
        n_actions = int(header[1])
        rows = [line.split() for line in fh if line.strip()]
    actions = np.zeros(len(rows), dtype=int)
    for s_str, a_str in rows:
        actions[int(s_str)] = int(a_str)
    return BasePolicy.deterministic(actions, n_actions)


# ---------------------------------------------------------------------------
# figure data: representative paths


@dataclass(frozen=True, eq=False)
class PathExport:
    """Everything a plot of the learned behavior needs, as plain data."""

    width: int
    height: int
    walls: tuple
    taboo: tuple
    start: tuple
    goal: tuple
    base_path: tuple            # ordered cells of the unchecked base rollout
    oversight_path: tuple       # ordered cells of the modal overseen rollout
    si_modal: tuple             # per-state modal meta-action names
    h_modal: tuple
    base_truncated: bool
    oversight_truncated: bool
    oversight_reason: str

    def to_dict(self) -> dict:
        return {
            "width": self.width, "height": self.height,
            "walls": [list(c) for c in self.walls],
            "taboo": [list(c) for c in self.taboo],
            "start": list(self.start), "goal": list(self.goal),
            "base_path": [list(c) for c in self.base_path],
            "oversight_path": [list(c) for c in self.oversight_path],
            "si_modal": list(self.si_modal), "h_modal": list(self.h_modal),
            "base_truncated": self.base_truncated,
            "oversight_truncated": self.oversight_truncated,
            "oversight_reason": self.oversight_reason,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _joint_probs(joint) -> tuple:
    if hasattr(joint, "probs_si"):
        return joint.probs_si, joint.probs_h
    return joint.si, joint.h


def export_path(grid: GridWorld, sigma: BasePolicy, joint, seed: int,
                operator=None) -> PathExport:
    """Representative rollouts for figures.

    The base path greedily follows sigma with taboo ignored. The oversight
    path takes both players' modal meta-actions; when oversight fires, the
    operator draws from a stream fixed by the export seed, which makes the
    artifact reproducible.
    """
    mdp = grid.to_mdp()
    cells = grid.cells()
    p_si, p_h = _joint_probs(joint)
    if p_si.shape[0] != len(cells):
        raise ValueError("joint policy does not cover every grid state")
    unsafe = grid.unsafe_actions()
    if operator is None:
        operator = make_over_operator("random_safe", unsafe=unsafe, seed=seed)
    traj = rollout(mdp, sigma, seed=seed, max_steps=grid.max_steps)
    base_path = [cells[mdp.start]] + [cells[s] for s in traj.next_states]

    sig_mode = sigma.mode_actions()
    det = np.argmax(mdp.kernel, axis=2)
    rng = np.random.default_rng(seed)
    term = mdp.terminal_mask()
    s = mdp.start
    over_path = [cells[s]]
    reason = "step-limit"
    for _ in range(grid.max_steps):
        if term[s]:
            reason = "goal"
            break
        a_si = int(np.argmax(p_si[s]))
        a_h = int(np.argmax(p_h[s]))
        proposed = int(sig_mode[s])
        if a_si == ASK and a_h == OVERSEE:
            outcome = operator.sample(s, proposed, rng)
        else:
            outcome = proposed
        if outcome == "off":
            reason = "off"
            break
        s = int(det[s, outcome])
        over_path.append(cells[s])
    else:
        if term[s]:
            reason = "goal"
    return PathExport(
        width=grid.width, height=grid.height,
        walls=tuple(sorted(grid.walls)), taboo=tuple(sorted(grid.taboo)),
        start=grid.start, goal=grid.goal,
        base_path=tuple(base_path), oversight_path=tuple(over_path),
        si_modal=tuple(SI_NAMES[int(np.argmax(p_si[s]))] for s in range(len(cells))),
        h_modal=tuple(H_NAMES[int(np.argmax(p_h[s]))] for s in range(len(cells))),
        base_truncated=traj.reason != "goal",
        oversight_truncated=reason == "step-limit",
        oversight_reason=reason)


def summarize(metrics: MetricsSeries, window: int) -> dict:
    """Trailing-window column means, with leading-window means for contrast."""
    n = metrics.n_iterations
    if not 1 <= window <= n:
        raise ValueError(f"window must lie in [1, {n}], got {window}")
    head = metrics.data[:window].mean(axis=0)
    tail = metrics.data[-window:].mean(axis=0)
    return {
        "window": window,
        "leading": dict(zip(MetricsSeries.COLUMNS, map(float, head))),
        "trailing": dict(zip(MetricsSeries.COLUMNS, map(float, tail))),
    }


# ---------------------------------------------------------------------------
# verification report plumbing (shared by the CLI and the pipeline)


def _record(check: str, instance: str, tolerance: float, worst_case: float,
            ok: bool) -> dict:
    return {"check": check, "instance": instance, "tolerance": tolerance,
            "worst_case": float(worst_case), "pass": bool(ok)}


def _verify_mpg(seed: int) -> list:
    team = instances.chain_game(6)
    rep = check_mpg(team, tol=1e-9)
    out = [_record("mpg", "team-chain-6", 1e-9, rep.max_violation, rep.is_mpg)]
    bad = instances.counterexample_game()
    rep_bad = check_mpg(bad, tol=1e-9)
    out.append(_record("mpg-counterexample", "opposed-2-state", 1e-3,
                       rep_bad.max_violation, rep_bad.max_violation > 1e-3))
    return out

def _verify_alignment(seed: int, n_joints: int = 100) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for k, game in enumerate(instances.team_games_small()):
        worst = np.inf
        ok = True
        for _ in range(n_joints):
            rep = verify_local_alignment(game, random_joint(game.n_base, rng),
                                         tol=1e-9)
            qualifying = rep.dv_h[rep.dv_si >= 0.0]
            if qualifying.size:
                worst = min(worst, float(qualifying.min()))
            ok = ok and rep.holds
        out.append(_record("local-alignment", f"team-game-{k}", 1e-9,
                           0.0 if np.isinf(worst) else worst, ok))
    return out


def _verify_path(seed: int) -> list:
    out = []
    for k, game in enumerate(instances.team_games_small()):
        start = JointPolicy.deterministic(
            np.full(game.n_base, ASK), np.full(game.n_base, OVERSEE))
        rep = verify_path_monotonic(game, start, tol=1e-9)
        out.append(_record("path-monotonic", f"team-game-{k}", 1e-9,
                           rep.worst_drop, rep.monotone))
    return out


def _verify_equilibrium(seed: int) -> list:
    rep = verify_optimal_equilibrium(instances.corridor_game(), tol=1e-9)
    ok = rep.holds and rep.safety_ok and rep.strict_margin > 1e-9
    return [_record("optimal-equilibrium", "corridor-4", 1e-9,
                    rep.strict_margin, ok)]


def _verify_pmtg(seed: int, n_seeds: int = 100) -> list:
    out = []
    for kappa in (0.01, 0.1):
        margin = np.inf
        ok = True
        for k in range(n_seeds):
            game = instances.perturbed_team_game(kappa, seed=k)
            joint = random_joint(game.n_base, np.random.default_rng((seed, k)))
            rep = pmtg_alignment_slack(game, joint, tol=1e-9)
            margin = min(margin, rep.observed - rep.bound)
            ok = ok and rep.holds
        out.append(_record("pmtg-alignment", f"kappa-{kappa}", 1e-9, margin, ok))
    return out


def _verify_strict_shutdown(seed: int) -> list:
    worst = 0.0
    positive_ok = True
    for c_ask in (0.0, 0.3):
        game = instances.strict_shutdown_game(c_ask)
        for q in (0.0, 0.25, 0.5, 1.0):
            for s in (0, 1):
                si = np.full(game.n_base, ASK)
                h_probs = np.tile([1.0, 0.0], (game.n_base, 1))
                h_probs[s] = [1.0 - q, q]
                si_probs = np.zeros((game.n_base, 2))
                si_probs[np.arange(game.n_base), si] = 1.0
                joint = JointPolicy(si_probs, h_probs)
                gap = ask_burden_gap(game, joint, s)
                v_si, v_h = _solve_joint(game, joint)
                nxt = int(np.argmax(game.mdp.kernel[s, 0]))
                tilde_si = float(game.rewards.outcome_si[s, 0]) + game.gamma * v_si[nxt]
                tilde_h = float(game.rewards.outcome_h[s, 0]) + game.gamma * v_h[nxt]
                closed = q * (tilde_h - tilde_si) + c_ask
                worst = max(worst, abs(gap - closed))
                if c_ask > 0 and gap <= 0.0:
                    positive_ok = False
    return [_record("strict-shutdown-gap", "dominated-chain-3", 1e-9, worst,
                    worst < 1e-9 and positive_ok)]


def _verify_offswitch(seed: int) -> list:
    worst = 0.0
    for decision in ("permit", "off"):
        game = reduce_off_switch(decision=decision)
        acted, off = 1, game.off_state
        expected = np.zeros((2, 2, game.n_states))
        expected[PLAY, TRUST, acted] = 1.0
        expected[PLAY, OVERSEE, acted] = 1.0
        expected[ASK, TRUST, acted] = 1.0
        expected[ASK, OVERSEE, acted if decision == "permit" else off] = 1.0
        worst = max(worst, float(np.max(np.abs(game.kernel[0] - expected))))
    return [_record("off-switch-kernel", "three-state", 0.0, worst, worst == 0.0)]


def _verify_performance(seed: int) -> list:
    out = []
    for epsilon in (0.0, 0.2):
        game = instances.epsilon_game(epsilon)
        joint = JointPolicy.deterministic(
            np.full(game.n_base, ASK), np.full(game.n_base, OVERSEE))
        exec_policy = induced_env_policy(game, joint)
        rep = performance_gap(game.mdp, game.sigma, exec_policy, epsilon,
                              tol=1e-9)
        out.append(_record("performance-bound", f"epsilon-{epsilon}", 1e-9,
                           rep.observed - rep.bound, rep.holds))
    return out


_VERIFY_DISPATCH = {
    "mpg": _verify_mpg,
    "alignment": _verify_alignment,
    "path": _verify_path,
    "equilibrium": _verify_equilibrium,
    "pmtg": _verify_pmtg,
    "strict-shutdown": _verify_strict_shutdown,
    "offswitch": _verify_offswitch,
    "performance": _verify_performance,
}


def run_verify(check: str, seed: int = 0) -> dict:
    """Run one named verification suite on its canonical instances."""
    if check not in _VERIFY_DISPATCH:
        raise ValueError(f"unknown check {check!r}; choose from "
                         f"{sorted(_VERIFY_DISPATCH)}")
    records = _VERIFY_DISPATCH[check](seed)
    return {"check": check, "records": records,
            "pass": all(r["pass"] for r in records)}


# ---------------------------------------------------------------------------
# the end-to-end run


@dataclass(frozen=True, eq=False)
class PipelineResult:
    config: ExperimentConfig
    grid: GridWorld
    qtable: QTable
    sigma: BasePolicy
    base_return: float
    game: OversightGame
    policy: JointSoftmaxPolicy
    metrics: MetricsSeries
    goal_rates: np.ndarray
    visits: np.ndarray
    path_export: PathExport
    verify_report: dict
    summary: dict
    files: dict


def _write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_pipeline(cfg: ExperimentConfig, progress=None) -> PipelineResult:
    """Train, verify, and export; any stage failure names its stage."""
    def say(text):
        if progress is not None:
            progress(text)

    files = {}
    os.makedirs(cfg.out_dir, exist_ok=True)

    stage = "train-base"
    try:
        say(f"[{stage}] q-learning on the clean grid")
        clean = build_four_rooms(cfg.width, cfg.height,
                                 goal_reward=cfg.goal_reward,
                                 step_penalty=cfg.step_penalty,
                                 max_steps=cfg.max_steps)
        mdp = clean.to_mdp(cfg.qlearn.gamma)
        qtable = q_learning(mdp, cfg.qlearn)
        sigma = greedy_policy(qtable)
        base_traj = rollout(mdp, sigma, seed=0, max_steps=cfg.max_steps)
        base_return = base_traj.discounted_return(cfg.qlearn.gamma)
        files["base_q"] = os.path.join(cfg.out_dir, "base_q.txt")
        with open(files["base_q"], "w") as fh:
            fh.write(qtable.to_text())
        files["sigma"] = os.path.join(cfg.out_dir, "sigma.txt")
        save_sigma(sigma, files["sigma"])
    except Exception as err:
        raise PipelineError(stage, err) from err

    stage = "make-taboo"
    try:
        say(f"[{stage}] sampling taboo cells")
        grid = sample_taboo(clean, cfg.taboo_fraction, cfg.taboo_seed)
        files["grid"] = os.path.join(cfg.out_dir, "grid.txt")
        with open(files["grid"], "w") as fh:
            fh.write(grid.to_text())
    except Exception as err:
        raise PipelineError(stage, err) from err

    stage = "build-game"
    try:
        say(f"[{stage}] assembling the wrapper game")
        unsafe = grid.unsafe_actions()
        operator = make_over_operator(cfg.operator_kind, unsafe=unsafe,
                                      seed=cfg.taboo_seed)
        # one discount per experiment: the explicit gamma trips the builder's
        # consistency check if the qlearn and reward sections disagree
        game = build_oversight_game(mdp, sigma, unsafe, operator,
                                    SharedRewardModel(cfg.reward),
                                    gamma=cfg.qlearn.gamma)
        files["config"] = os.path.join(cfg.out_dir, "config.json")
        _write_json(files["config"], cfg.to_dict())
    except Exception as err:
        raise PipelineError(stage, err) from err

    stage = "train-oversight"
    try:
        say(f"[{stage}] independent policy gradient, "
            f"{cfg.ipg.iterations} iterations")
        result = train_ipg(game, cfg.ipg)
        files["checkpoint"] = os.path.join(cfg.out_dir, "checkpoint.txt")
        save_checkpoint(result.policy, files["checkpoint"])
        files["metrics"] = os.path.join(cfg.out_dir, "metrics.csv")
        result.metrics.to_csv(files["metrics"])
    except Exception as err:
        raise PipelineError(stage, err) from err

    stage = "verify"
    try:
        say(f"[{stage}] spot checks on a down-sampled team instance")
        small = instances.chain_game(6, gamma=cfg.reward.gamma,
                                     lambda_viol=cfg.reward.lambda_viol)
        mpg_rep = check_mpg(small, tol=1e-9)
        records = [_record("mpg", "team-chain-6", 1e-9,
                           mpg_rep.max_violation, mpg_rep.is_mpg)]
        rng = np.random.default_rng(cfg.ipg.seed)
        worst = np.inf
        ok = True
        for _ in range(5):
            rep = verify_local_alignment(small, random_joint(small.n_base, rng),
                                         tol=1e-9)
            qualifying = rep.dv_h[rep.dv_si >= 0.0]
            if qualifying.size:
                worst = min(worst, float(qualifying.min()))
            ok = ok and rep.holds
        records.append(_record("local-alignment", "team-chain-6", 1e-9,
                               0.0 if np.isinf(worst) else worst, ok))
        verify_report = {"records": records,
                         "pass": all(r["pass"] for r in records)}
        files["verify"] = os.path.join(cfg.out_dir, "verify.json")
        _write_json(files["verify"], verify_report)
    except Exception as err:
        raise PipelineError(stage, err) from err

    stage = "export"
    try:
        say(f"[{stage}] path export and summary")
        path_export = export_path(grid, sigma, result.policy,
                                  seed=cfg.taboo_seed)
        files["path_export"] = os.path.join(cfg.out_dir, "path_export.json")
        path_export.save(files["path_export"])
        window = min(500, cfg.ipg.iterations)
        summary = summarize(result.metrics, window)
        summary["base_return"] = float(base_return)
        summary["trailing_goal_rate"] = float(result.goal_rates[-window:].mean())
        files["summary"] = os.path.join(cfg.out_dir, "summary.json")
        _write_json(files["summary"], summary)
    except Exception as err:
        raise PipelineError(stage, err) from err

    return PipelineResult(config=cfg, grid=grid, qtable=qtable, sigma=sigma,
                          base_return=float(base_return), game=game,
                          policy=result.policy, metrics=result.metrics,
                          goal_rates=result.goal_rates, visits=result.visits,
                          path_export=path_export, verify_report=verify_report,
                          summary=summary, files=files)
