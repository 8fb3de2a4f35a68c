"""Command line entry points.

Exit codes: 0 on success, 1 when a verification check fails, 2 on config
errors (bad files, bad values, violated reward-constant invariants).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .mdp import rollout
from .gridworld import build_four_rooms, sample_taboo, GridWorld, GridLayoutError
from .qlearn import q_learning, greedy_policy
from .game import (SharedRewardModel, make_over_operator, build_oversight_game,
                   GameConfigError, GameStateError)
from .ipg import train_ipg, save_checkpoint, load_checkpoint
from .pipeline import (ExperimentConfig, PipelineError, run_pipeline, run_verify,
                       export_path, save_sigma, load_sigma, _write_json,
                       _VERIFY_DISPATCH)
from .session import SessionService, SessionError
from .server import run_server

_CONFIG_ERRORS = (ValueError, TypeError, KeyError, OSError,
                  json.JSONDecodeError, GameConfigError, GridLayoutError,
                  SessionError)


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig.from_dict({})
    raw = cfg.to_dict()
    if args.out:
        raw["out_dir"] = args.out
    if args.seed is not None:
        raw["qlearn"]["seed"] = args.seed
        raw["taboo"]["seed"] = args.seed
        raw["ipg"]["seed"] = args.seed
    return ExperimentConfig.from_dict(raw)


def _build_clean(cfg: ExperimentConfig):
    grid = build_four_rooms(cfg.width, cfg.height, goal_reward=cfg.goal_reward,
                            step_penalty=cfg.step_penalty,
                            max_steps=cfg.max_steps)
    return grid, grid.to_mdp(cfg.qlearn.gamma)


def _cmd_train_base(args) -> int:
    cfg = _load_config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    grid, mdp = _build_clean(cfg)
    qtable = q_learning(mdp, cfg.qlearn)
    sigma = greedy_policy(qtable)
    traj = rollout(mdp, sigma, seed=0, max_steps=cfg.max_steps)
    with open(os.path.join(cfg.out_dir, "base_q.txt"), "w") as fh:
        fh.write(qtable.to_text())
    save_sigma(sigma, os.path.join(cfg.out_dir, "sigma.txt"))
    print(f"base policy trained: return "
          f"{traj.discounted_return(cfg.qlearn.gamma):.4f} ({traj.reason})")
    return 0


def _cmd_make_taboo(args) -> int:
    cfg = _load_config(args)
    os.makedirs(cfg.out_dir, exist_ok=True)
    grid, _ = _build_clean(cfg)
    tabooed = sample_taboo(grid, cfg.taboo_fraction, cfg.taboo_seed)
    with open(os.path.join(cfg.out_dir, "grid.txt"), "w") as fh:
        fh.write(tabooed.to_text())
    print(f"taboo grid written: {len(tabooed.taboo)} taboo cells")
    return 0


def _load_artifacts(cfg: ExperimentConfig):
    grid = GridWorld.from_text(
        open(os.path.join(cfg.out_dir, "grid.txt")).read())
    sigma = load_sigma(os.path.join(cfg.out_dir, "sigma.txt"))
    mdp = grid.to_mdp(cfg.qlearn.gamma)
    unsafe = grid.unsafe_actions()
    operator = make_over_operator(cfg.operator_kind, unsafe=unsafe,
                                  seed=cfg.taboo_seed)
    game = build_oversight_game(mdp, sigma, unsafe, operator,
                                SharedRewardModel(cfg.reward))
    return grid, game


def _cmd_train_oversight(args) -> int:
    cfg = _load_config(args)
    grid, game = _load_artifacts(cfg)
    print(f"training both meta-policies: {cfg.ipg.iterations} iterations")
    result = train_ipg(game, cfg.ipg)
    save_checkpoint(result.policy, os.path.join(cfg.out_dir, "checkpoint.txt"))
    result.metrics.to_csv(os.path.join(cfg.out_dir, "metrics.csv"))
    tail = result.metrics.data[-min(500, cfg.ipg.iterations):]
    print(f"trailing violation rate "
          f"{tail[:, 0].mean():.6f}/step, ask rate {tail[:, 3].mean():.3f}")
    return 0


def _cmd_verify(args) -> int:
    report = run_verify(args.which, seed=args.seed or 0)
    payload = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"verify_{args.which}.json")
        with open(path, "w") as fh:
            fh.write(payload + "\n")
    print(payload)
    return 0 if report["pass"] else 1


def _cmd_export_path(args) -> int:
    cfg = _load_config(args)
    grid, game = _load_artifacts(cfg)
    policy = load_checkpoint(os.path.join(cfg.out_dir, "checkpoint.txt"))
    export = export_path(grid, game.sigma, policy, seed=cfg.taboo_seed)
    out = os.path.join(cfg.out_dir, "path_export.json")
    export.save(out)
    print(f"path export written to {out} "
          f"(oversight path: {export.oversight_reason})")
    return 0


def _cmd_run_all(args) -> int:
    cfg = _load_config(args)
    result = run_pipeline(cfg, progress=print)
    report = result.verify_report
    trailing = result.summary["trailing"]
    print(f"done: base return {result.base_return:.4f}, trailing violation "
          f"rate {trailing['violation_rate_per_step']:.6f}/step")
    return 0 if report["pass"] else 1


def _cmd_serve(args) -> int:
    cfg = _load_config(args)
    grid, game = _load_artifacts(cfg)
    policy = load_checkpoint(os.path.join(cfg.out_dir, "checkpoint.txt"))
    service = SessionService(game, policy, grid=grid, max_steps=cfg.max_steps)
    print(f"session service on ws://{args.host}:{args.port}")
    run_server(service, host=args.host, port=args.port)
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oversight-game",
        description="Train, verify, and serve the oversight wrapper game.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override all seeds")
        p.add_argument("--out", help="output directory override")

    for name, fn in (("train-base", _cmd_train_base),
                     ("make-taboo", _cmd_make_taboo),
                     ("train-oversight", _cmd_train_oversight),
                     ("export-path", _cmd_export_path),
                     ("run-all", _cmd_run_all)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("verify")
    p.add_argument("which", choices=sorted(_VERIFY_DISPATCH))
    common(p)
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("serve")
    common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2 if isinstance(err.cause, _CONFIG_ERRORS) else 1
    except _CONFIG_ERRORS as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except GameStateError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
