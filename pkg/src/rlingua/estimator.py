"""Estimator-style wrapper so the learner composes with the scikit ecosystem.

:class:`RLinguaTD3` follows the scikit-learn conventions: constructor
arguments are stored verbatim, ``fit`` trains the policy on the task's own
environment (no ``X``/``y`` needed), fitted state lives in trailing-underscore
attributes, and ``get_params``/``set_params``/``clone`` work as usual.
``predict`` maps rows of ``observation || desired_goal`` to actions.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .config import ExperimentConfig
from .envs import make_env
from .trainer import TrainingRun, arm_configs, evaluate


class RLinguaTD3(BaseEstimator):
    """Controller-guided TD3 policy for one manipulation task.

    Parameters mirror the experiment configuration; ``gamma=None`` and
    ``lambda_annl=None`` resolve to the task-family defaults.  ``arm="td3"``
    disables the demonstration machinery for a plain baseline.

    Examples
    --------
    >>> est = RLinguaTD3(task="reach", total_steps=4000, seed=0)
    >>> est.fit()                                    # doctest: +SKIP
    >>> actions = est.predict(observations)          # doctest: +SKIP
    """

    def __init__(self, task="reach", arm="rlingua", total_steps=50_000, seed=0,
                 gamma=None, tau=0.005, policy_delay=2, lambda_im=1.0,
                 target_noise_sigma=0.2, target_noise_clip=0.5,
                 exploration_noise_sigma=0.1, batch_size=256, actor_lr=1e-3,
                 critic_lr=1e-3, hidden_sizes=(256, 256), p0=0.25,
                 lambda_annl=None, her_k=4, warmup_steps=1000,
                 grad_steps_per_env_step=1, eval_every=2000, eval_episodes=20,
                 controller_noise=0.0, controller_variant="default"):
        self.task = task
        self.arm = arm
        self.total_steps = total_steps
        self.seed = seed
        self.gamma = gamma
        self.tau = tau
        self.policy_delay = policy_delay
        self.lambda_im = lambda_im
        self.target_noise_sigma = target_noise_sigma
        self.target_noise_clip = target_noise_clip
        self.exploration_noise_sigma = exploration_noise_sigma
        self.batch_size = batch_size
        self.actor_lr = actor_lr
        self.critic_lr = critic_lr
        self.hidden_sizes = hidden_sizes
        self.p0 = p0
        self.lambda_annl = lambda_annl
        self.her_k = her_k
        self.warmup_steps = warmup_steps
        self.grad_steps_per_env_step = grad_steps_per_env_step
        self.eval_every = eval_every
        self.eval_episodes = eval_episodes
        self.controller_noise = controller_noise
        self.controller_variant = controller_variant

    def _experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(
            task=self.task, arm=self.arm, total_steps=self.total_steps,
            seeds=(self.seed,), controller_noise=self.controller_noise,
            controller_variant=self.controller_variant,
            eval_every=self.eval_every, eval_episodes=self.eval_episodes,
            warmup_steps=self.warmup_steps,
            grad_steps_per_env_step=self.grad_steps_per_env_step,
            gamma=self.gamma, tau=self.tau, policy_delay=self.policy_delay,
            lambda_im=self.lambda_im,
            target_noise_sigma=self.target_noise_sigma,
            target_noise_clip=self.target_noise_clip,
            exploration_noise_sigma=self.exploration_noise_sigma,
            batch_size=self.batch_size, actor_lr=self.actor_lr,
            critic_lr=self.critic_lr, hidden_sizes=tuple(self.hidden_sizes),
            p0=self.p0, lambda_annl=self.lambda_annl, her_k=self.her_k,
        )

    def fit(self, X=None, y=None):
        """Train on the task environment; ``X`` and ``y`` are ignored."""
        cfg = self._experiment_config()
        cfg.validate()
        effective = cfg.resolved()
        if effective.arm == "controller":
            raise ValueError("the controller arm has nothing to fit; "
                             "use arm='rlingua' or arm='td3'")
        agent_cfg, trainer_cfg = arm_configs(
            effective.arm, effective.agent_config(), effective.trainer_config())
        run = TrainingRun(effective.task, int(self.seed), agent_cfg, trainer_cfg,
                          effective.her_config(),
                          rl_capacity=effective.rl_capacity,
                          llm_capacity=effective.llm_capacity,
                          controller_noise=effective.controller_noise,
                          controller_variant=effective.controller_variant)
        self.metrics_ = run.run()
        self.agent_ = run.agent
        self.env_spec_ = run.env.spec
        self.n_features_in_ = self.env_spec_.obs_dim + self.env_spec_.goal_dim
        self.final_ema_ = (self.metrics_[-1]["ema_success"]
                           if self.metrics_ else float("nan"))
        return self

    def predict(self, X) -> np.ndarray:
        """Greedy actions for rows of ``observation || desired_goal``."""
        check_is_fitted(self, "agent_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_} "
                f"(observation dim {self.env_spec_.obs_dim} + goal dim "
                f"{self.env_spec_.goal_dim})")
        from .nets import mlp_forward
        return mlp_forward(self.agent_.actor, X)

    def act(self, obs) -> np.ndarray:
        """Greedy action for a single :class:`GoalObservation`."""
        check_is_fitted(self, "agent_")
        return self.agent_.select_action(obs, explore=False)

    def score(self, X=None, y=None) -> float:
        """Noise-free success rate over fresh evaluation episodes."""
        check_is_fitted(self, "agent_")
        env = make_env(self.task)
        rng = np.random.default_rng(np.random.SeedSequence([int(self.seed), 1]))
        return evaluate(self.act, env, int(self.eval_episodes), rng)
