"""Experiment pipeline tests on down-scaled grids."""
import json

import numpy as np
import pytest

from oversight_game import (
    ExperimentConfig, PipelineError, run_pipeline, run_verify, summarize,
    export_path, save_sigma, load_sigma, MetricsSeries,
    build_four_rooms, sample_taboo, QLearnConfig, q_learning, greedy_policy,
    JointPolicy, PermitOrShutdownOperator, rollout,
)
from oversight_game.game import PLAY, ASK, TRUST, OVERSEE


SMALL = {
    "grid": {"width": 9, "height": 9, "max_steps": 120},
    "taboo": {"fraction": 0.25, "seed": 6},
    "qlearn": {"episodes": 400, "max_steps": 120},
    "ipg": {"iterations": 25, "batch_size": 8, "max_steps": 120,
            "use_baseline": True, "lr": 0.05, "grad_clip_norm": 2.0},
}


def small_config(tmp_path, name="arts"):
    raw = dict(SMALL)
    raw["out_dir"] = str(tmp_path / name)
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# configuration plumbing


def test_config_defaults_and_merge():
    cfg = ExperimentConfig.from_dict({})
    assert cfg.width == 15 and cfg.height == 15
    assert cfg.reward.lambda_viol == 50.0
    assert cfg.ipg.iterations == 10000
    cfg2 = ExperimentConfig.from_dict({"grid": {"width": 9, "height": 9}})
    assert cfg2.width == 9
    assert cfg2.goal_reward == 10.0  # untouched defaults survive


def test_config_rejects_unknown_sections_and_keys():
    with pytest.raises(ValueError, match="unknown config sections"):
        ExperimentConfig.from_dict({"grdi": {}})
    with pytest.raises(ValueError, match="unknown keys in 'grid'"):
        ExperimentConfig.from_dict({"grid": {"widht": 9}})
    with pytest.raises(ValueError, match="must be an object"):
        ExperimentConfig.from_dict({"grid": 9})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"qlearn": {"alpha": 0.0}})


def test_config_roundtrip(tmp_path):
    cfg = small_config(tmp_path)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_file(path) == cfg
    path.write_text("[1, 2]")
    with pytest.raises(ValueError, match="JSON object"):
        ExperimentConfig.from_file(path)


def test_sigma_roundtrip(tmp_path):
    grid = build_four_rooms(5, 5, goal_reward=10.0, step_penalty=-0.1,
                            max_steps=50)
    qt = q_learning(grid.to_mdp(), QLearnConfig(episodes=400, max_steps=50))
    sigma = greedy_policy(qt)
    path = tmp_path / "sigma.txt"
    save_sigma(sigma, path)
    back = load_sigma(path)
    assert np.array_equal(back.mode_actions(), sigma.mode_actions())
    assert back.probs.shape == sigma.probs.shape
    path.write_text("4\n0 1\n")
    with pytest.raises(ValueError, match="n_actions header"):
        load_sigma(path)


# ---------------------------------------------------------------------------
# summaries


def test_summarize_windows():
    data = np.zeros((10, 8))
    data[:, 0] = np.arange(10, dtype=float)  # violation rate column
    series = MetricsSeries(data)
    out = summarize(series, window=3)
    assert out["window"] == 3
    assert out["leading"]["violation_rate_per_step"] == pytest.approx(1.0)
    assert out["trailing"]["violation_rate_per_step"] == pytest.approx(8.0)
    with pytest.raises(ValueError, match="window"):
        summarize(series, window=0)
    with pytest.raises(ValueError, match="window"):
        summarize(series, window=11)


# ---------------------------------------------------------------------------
# named verification suites


@pytest.mark.parametrize("check", ["mpg", "alignment", "path", "equilibrium",
                                   "pmtg", "strict-shutdown", "offswitch",
                                   "performance"])
def test_run_verify_passes(check):
    report = run_verify(check, seed=0)
    assert report["check"] == check
    assert report["pass"], report
    for record in report["records"]:
        assert record["pass"]
        assert set(record) == {"check", "instance", "tolerance", "worst_case",
                               "pass"}


def test_run_verify_unknown_check():
    with pytest.raises(ValueError, match="unknown check"):
        run_verify("nonsense")


# ---------------------------------------------------------------------------
# path export


def toy_path_setup():
    grid = build_four_rooms(5, 5, goal_reward=10.0, step_penalty=-0.1,
                            max_steps=50)
    qt = q_learning(grid.to_mdp(), QLearnConfig(episodes=600, max_steps=50,
                                                seed=1))
    sigma = greedy_policy(qt)
    traj = rollout(grid.to_mdp(), sigma, 0, 50)
    assert traj.reason == "goal"
    cells = grid.cells()
    # drop a taboo cell onto the base path and find its predecessor state
    taboo_cell = cells[traj.states[2]]
    tagged = grid.with_taboo([taboo_cell])
    pre = traj.states[1]
    n = len(cells)
    si = np.full(n, PLAY)
    h = np.full(n, TRUST)
    si[pre] = ASK
    h[pre] = OVERSEE
    return tagged, sigma, JointPolicy.deterministic(si, h), taboo_cell, pre


def test_export_path_substitutes_at_crossing():
    grid, sigma, joint, taboo_cell, pre = toy_path_setup()
    export = export_path(grid, sigma, joint, seed=3)
    assert taboo_cell in export.base_path
    assert taboo_cell not in export.oversight_path
    assert export.si_modal[pre] == "ask"
    assert export.h_modal[pre] == "oversee"
    others = [k for k in range(len(grid.cells())) if k != pre]
    assert all(export.si_modal[k] == "play" for k in others)
    assert all(export.h_modal[k] == "trust" for k in others)
    assert export.taboo == (taboo_cell,)
    assert export.base_path[0] == grid.start
    assert export.oversight_path[0] == grid.start
    assert not export.base_truncated
    # deterministic in the export seed
    again = export_path(grid, sigma, joint, seed=3)
    assert again.to_dict() == export.to_dict()


def test_export_path_shutdown_reason():
    grid, sigma, joint, taboo_cell, pre = toy_path_setup()
    operator = PermitOrShutdownOperator(n_actions=4, decisions={})
    export = export_path(grid, sigma, joint, seed=3, operator=operator)
    assert export.oversight_reason == "off"
    assert export.oversight_path[-1] == grid.cells()[pre]
    assert taboo_cell not in export.oversight_path


def test_export_path_rejects_mismatched_policy():
    grid, sigma, joint, _, _ = toy_path_setup()
    short = JointPolicy.uniform(3)
    with pytest.raises(ValueError, match="every grid state"):
        export_path(grid, sigma, short, seed=0)


def test_export_path_save(tmp_path):
    grid, sigma, joint, _, _ = toy_path_setup()
    export = export_path(grid, sigma, joint, seed=3)
    out = tmp_path / "path.json"
    export.save(out)
    payload = json.loads(out.read_text())
    assert payload["start"] == list(grid.start)
    assert payload["oversight_reason"] == export.oversight_reason
    assert payload["base_path"] == [list(c) for c in export.base_path]


# ---------------------------------------------------------------------------
# the end-to-end run


def test_run_pipeline_smoke(tmp_path):
    cfg = small_config(tmp_path)
    seen = []
    result = run_pipeline(cfg, progress=seen.append)
    assert [s.split("]")[0].strip("[") for s in seen] == [
        "train-base", "make-taboo", "build-game", "train-oversight",
        "verify", "export"]
    assert result.metrics.n_iterations == 25
    assert result.verify_report["pass"]
    assert result.summary["window"] == 25
    assert "trailing_goal_rate" in result.summary
    assert result.base_return == pytest.approx(result.summary["base_return"])
    for name in ("base_q", "sigma", "grid", "config", "checkpoint",
                 "metrics", "path_export", "summary", "verify"):
        assert name in result.files
        with open(result.files[name]) as fh:
            assert fh.read()
    back = load_sigma(result.files["sigma"])
    assert np.array_equal(back.mode_actions(), result.sigma.mode_actions())
    cfg_payload = json.loads(open(result.files["config"]).read())
    assert ExperimentConfig.from_dict(cfg_payload) == cfg


def test_run_pipeline_artifacts_deterministic(tmp_path):
    r1 = run_pipeline(small_config(tmp_path, "a"))
    r2 = run_pipeline(small_config(tmp_path, "b"))
    for name in r1.files:
        b1 = open(r1.files[name]).read()
        b2 = open(r2.files[name]).read()
        if name == "config":
            d1, d2 = json.loads(b1), json.loads(b2)
            d1.pop("out_dir"), d2.pop("out_dir")
            assert d1 == d2
        else:
            assert b1 == b2, f"artifact {name} differs between runs"


def test_run_pipeline_stage_errors(tmp_path):
    bad_op = dict(SMALL)
    bad_op["operator"] = "bogus"
    bad_op["out_dir"] = str(tmp_path / "x")
    with pytest.raises(PipelineError, match="build-game") as err:
        run_pipeline(ExperimentConfig.from_dict(bad_op))
    assert err.value.stage == "build-game"

    bad_taboo = dict(SMALL)
    bad_taboo["grid"] = {"width": 5, "height": 5, "max_steps": 50}
    bad_taboo["qlearn"] = {"episodes": 50, "max_steps": 50}
    bad_taboo["taboo"] = {"fraction": 0.9, "seed": 0}
    bad_taboo["out_dir"] = str(tmp_path / "y")
    with pytest.raises(PipelineError, match="make-taboo") as err:
        run_pipeline(ExperimentConfig.from_dict(bad_taboo))
    assert err.value.stage == "make-taboo"

    mismatch = dict(SMALL)
    mismatch["reward"] = {"gamma": 0.95}
    mismatch["out_dir"] = str(tmp_path / "z")
    with pytest.raises(PipelineError, match="build-game"):
        run_pipeline(ExperimentConfig.from_dict(mismatch))
