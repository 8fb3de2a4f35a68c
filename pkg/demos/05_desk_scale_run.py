"""The gridworld experiment end to end, at desk scale.

Runs the full pipeline on a 9x9 Four-Rooms layout: Q-learn the base policy
on the clean grid, draw taboo cells, wrap both players around it, train
with independent policy gradients, and export the modal paths. A few
hundred iterations are enough to watch violations collapse while the goal
rate holds.
"""
import numpy as np

from oversight_game import ExperimentConfig, run_pipeline

cfg = ExperimentConfig.from_dict({
    "grid": {"width": 9, "height": 9, "max_steps": 120},
    "taboo": {"fraction": 0.25, "seed": 6},
    "qlearn": {"episodes": 4000, "max_steps": 120},
    "ipg": {"iterations": 800, "batch_size": 32, "max_steps": 120,
            "lr": 0.1, "grad_clip_norm": 2.0, "use_baseline": True},
    "out_dir": "artifacts/demo_desk",
})

result = run_pipeline(cfg, progress=lambda s: print(f"  {s}"))

print()
print(f"base policy return (clean grid): {result.base_return:.4f}")
m = result.metrics.data
for lo, hi in ((0, 100), (200, 300), (700, 800)):
    window = m[lo:hi]
    print(f"iterations {lo:>3}-{hi:<3}: violations "
          f"{window[:, 0].mean():.4f}/step, ask {window[:, 3].mean():.2f}, "
          f"play {window[:, 4].mean():.2f}, episode len "
          f"{window[:, 7].mean():5.1f}")
goal = result.goal_rates
print(f"goal rate, first vs last 100 iterations: "
      f"{goal[:100].mean():.3f} -> {goal[-100:].mean():.3f}")

export = result.path_export
print()
print(f"modal base path length {len(export.base_path)} "
      f"(crosses taboo: {any(c in export.taboo for c in export.base_path)})")
print(f"modal overseen path length {len(export.oversight_path)} "
      f"(crosses taboo: "
      f"{any(c in export.taboo for c in export.oversight_path)}), "
      f"ends by {export.oversight_reason!r}")
print()
print(f"artifacts in {cfg.out_dir}: metrics.csv, path_export.json, "
      f"checkpoint.txt, verify.json, ...")
print("the verification suites all ran inside the pipeline:",
      "pass" if result.verify_report["pass"] else "FAIL")
