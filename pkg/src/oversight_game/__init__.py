"""Two-player control wrapper around a frozen base policy.

The agent chooses between acting autonomously and deferring; the human
chooses between trusting and overseeing. The package provides the wrapper
game itself, exact solvers that certify its alignment properties on small
instances, an independent policy gradient trainer for the gridworld
experiment, and an interactive session mode where a person oversees.
"""

from .mdp import (Mdp, BasePolicy, PolicyValues, Trajectory, evaluate_policy,
                  value_iteration, rollout)
from .gridworld import (GridWorld, GridLayoutError, TabooInfeasibleError,
                        ACTIONS, build_four_rooms, sample_taboo,
                        greedy_grid_policy)
from .qlearn import QLearnConfig, QTable, q_learning, greedy_policy
from .game import (PLAY, ASK, TRUST, OVERSEE, OFF, SI_NAMES, H_NAMES,
                   GameConfigError, GameStateError, RewardConfig,
                   SharedRewardModel, StrictShutdownConfig, ExplicitRewards,
                   PerturbedRewards, perturb_rewards, RandomSafeOperator,
                   StrictShutdownOperator, PermitOrShutdownOperator,
                   EpsilonBoundedOperator, make_over_operator, OversightGame,
                   build_oversight_game, exec_action, step, StepResult,
                   shared_reward, strict_shutdown_rewards, sigma_risk_states)
from .analysis import (AnalysisError, JointPolicy, ValueTable, ExecPolicy,
                       joint_value, random_joint, one_state_deviation,
                       check_mpg, PotentialReport, ask_burden_gap,
                       verify_local_alignment, AlignmentReport,
                       verify_path_monotonic, PathReport,
                       verify_optimal_equilibrium, EquilibriumReport,
                       induced_env_policy, performance_gap, BoundReport,
                       bounded_diff_check, DiffReport, pmtg_alignment_slack,
                       reduce_off_switch)
from .ipg import (JointSoftmaxPolicy, IpgConfig, IpgTrainingError, Batch,
                  MetricsSeries, TrainResult, init_policy, sample_batch,
                  reinforce_grad, clip_and_apply, train_ipg,
                  exact_policy_gradient, save_checkpoint, load_checkpoint)
from .pipeline import (ExperimentConfig, PipelineError, PipelineResult,
                       PathExport, run_pipeline, export_path, summarize,
                       run_verify, save_sigma, load_sigma)
from .session import (Session, SessionError, SessionService, open_session,
                      advance, session_view, replay_transcript,
                      scripted_overseer)
from . import instances

__all__ = [name for name in dir() if not name.startswith("_")]
