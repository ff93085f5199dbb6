"""Controller-guided TD3 for goal-conditioned kinematic manipulation tasks.

A scripted rule-based controller (a stand-in for generated control code)
collects rollouts with an annealed probability and regularizes the actor
toward its actions, cutting the environment steps the learner needs on
sparse-reward tasks.
"""

from .agent import Agent, AgentConfig
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .controllers import (ControllerConstants, RuleController,
                          euler_to_quaternion, get_action, is_close,
                          make_controller, normalize_euler_angle)
from .envs import (GoalObservation, ManipulationEnv, TASK_IDS, TaskSpec,
                   compute_reward, make_env, task_spec)
from .estimator import RLinguaTD3
from .experiment import run_experiment
from .nets import (AdamState, GradientBundle, Mlp, adam_step, load_checkpoint,
                   mlp_backward, mlp_forward, mlp_init, polyak_update,
                   save_checkpoint)
from .plotting import render_curves
from .replay import (DualReplay, EmptyBufferError, GoalTransition, HerConfig,
                     TransitionBatch)
from .trainer import (EvalReport, TrainerConfig, TrainerState, TrainingRun,
                      evaluate)

__version__ = "0.1.0"

__all__ = [
    "Agent", "AgentConfig", "AdamState", "ConfigError", "ControllerConstants",
    "DualReplay", "EmptyBufferError", "EvalReport", "ExperimentConfig",
    "GoalObservation", "GoalTransition", "GradientBundle", "HerConfig",
    "ManipulationEnv", "Mlp", "RLinguaTD3", "RuleController", "TASK_IDS",
    "TaskSpec", "TrainerConfig", "TrainerState", "TrainingRun",
    "TransitionBatch", "adam_step", "compute_reward", "euler_to_quaternion",
    "evaluate", "get_action", "is_close", "load_checkpoint", "load_config",
    "make_controller", "make_env", "mlp_backward", "mlp_forward", "mlp_init",
    "normalize_euler_angle", "parse_config", "polyak_update", "render_curves",
    "run_experiment", "save_checkpoint", "task_spec",
]
