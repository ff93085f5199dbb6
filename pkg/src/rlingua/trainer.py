"""The outer training loop: mixed rollouts, buffer routing, and evaluation.

Rollout actions come from the scripted controller with probability
``p_llm = p0 * lambda_annl**k`` (``k`` = environment steps taken so far) and
from the exploring policy otherwise; the transition is stored in the buffer
matching its source.  After a warmup, every environment step is followed by
gradient steps.  Evaluation runs noise-free episodes at a fixed cadence and
maintains an exponentially smoothed success series.

Each named RNG stream is spawned from the run seed, so runs with different
seeds share no stream state and identical seeds reproduce bit-identical runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .agent import Agent, AgentConfig
from .controllers import make_controller
from .envs import compute_reward, make_env
from .replay import DualReplay, GoalTransition, HerConfig

EMA_FACTOR = 0.95

METRIC_COLUMNS = ("env_step", "raw_success", "ema_success", "p_llm",
                  "critic_loss", "q_term", "bc_term", "rl_buffer_size",
                  "llm_buffer_size")


@dataclass
class TrainerConfig:
    total_steps: int = 50_000
    p0: float = 0.25
    lambda_annl: float = 0.99995
    warmup_steps: int = 1000
    grad_steps_per_env_step: int = 1
    eval_every: int = 2000
    eval_episodes: int = 20

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [0, 1], got {self.p0}")
        if not 0.0 < self.lambda_annl <= 1.0:
            raise ValueError(f"lambda_annl must lie in (0, 1], got {self.lambda_annl}")
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if self.grad_steps_per_env_step < 0:
            raise ValueError("grad_steps_per_env_step must be >= 0")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ValueError("eval_every and eval_episodes must be >= 1")


@dataclass
class TrainerState:
    """Mixing probability bookkeeping and the env-step counter."""

    p0: float
    lambda_annl: float
    k: int = 0

    @property
    def p_llm(self) -> float:
        # Closed form instead of repeated multiplication: after k steps the
        # probability is exactly p0 * lambda^k, without accumulated rounding.
        return self.p0 * self.lambda_annl ** self.k


@dataclass
class EvalReport:
    """Per-seed smoothed success curves plus their pointwise envelope."""

    env_steps: np.ndarray
    per_seed_ema: dict
    mean: np.ndarray
    min: np.ndarray
    max: np.ndarray


class EmaSeries:
    """ema <- 0.95 * ema + 0.05 * x, initialized to the first value."""

    def __init__(self, factor: float = EMA_FACTOR):
        self.factor = factor
        self.value = None

    def update(self, x: float) -> float:
        if self.value is None:
            self.value = float(x)
        else:
            self.value = self.factor * self.value + (1.0 - self.factor) * float(x)
        return self.value


def evaluate(policy, env, episodes: int, rng: np.random.Generator) -> float:
    """Noise-free success fraction of ``policy(obs) -> action`` over episodes.

    An episode counts as a success if any step returns reward 1.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    successes = 0
    for _ in range(episodes):
        obs = env.reset(int(rng.integers(2 ** 63)))
        while True:
            obs, reward, terminated, truncated = env.step(policy(obs))
            if reward == 1.0:
                successes += 1
                break
            if terminated or truncated:
                break
    return successes / episodes


class TrainingRun:
    """One seeded training run of one arm on one task."""

    def __init__(self, task_id: str, seed: int, agent_config: AgentConfig,
                 trainer_config: TrainerConfig, her_config: HerConfig,
                 rl_capacity: int = 1_000_000, llm_capacity: int = 1_000_000,
                 controller_noise: float = 0.0, controller_variant: str = "default"):
        self.task_id = task_id
        self.seed = int(seed)
        self.trainer_config = trainer_config
        self.her_config = her_config

        ss = np.random.SeedSequence(self.seed)
        (init_ss, rollout_ss, explore_ss, noise_ss, relabel_ss, eval_ss,
         controller_ss) = ss.spawn(7)
        self.rollout_rng = np.random.default_rng(rollout_ss)
        self.explore_rng = np.random.default_rng(explore_ss)
        self.noise_rng = np.random.default_rng(noise_ss)
        self.relabel_rng = np.random.default_rng(relabel_ss)
        self.eval_rng = np.random.default_rng(eval_ss)

        self.env = make_env(task_id)
        self.eval_env = make_env(task_id)
        spec = self.env.spec
        self.agent = Agent(spec.obs_dim, spec.goal_dim, spec.action_dim,
                           agent_config, np.random.default_rng(init_ss))
        self.controller = make_controller(
            task_id, noise_scale=controller_noise,
            seed=np.random.default_rng(controller_ss), variant=controller_variant)
        self.replay = DualReplay(rl_capacity, llm_capacity)
        self.reward_fn = lambda achieved, desired: compute_reward(
            achieved, desired, spec)
        self.state = TrainerState(trainer_config.p0, trainer_config.lambda_annl)

        self._obs = None
        self._episode_id = 0
        self._step_in_episode = 0
        self.ema = EmaSeries()

    def _begin_episode(self):
        self._obs = self.env.reset(int(self.rollout_rng.integers(2 ** 63)))
        self._step_in_episode = 0

    def collect_step(self) -> GoalTransition:
        """Draw the action source, step the env, store, and decay p_llm."""
        if self._obs is None:
            self._begin_episode()
        obs = self._obs
        use_controller = self.rollout_rng.random() < self.state.p_llm
        if use_controller:
            action = self.controller.act(obs)
        else:
            action = self.agent.select_action(obs, explore=True,
                                              rng=self.explore_rng)
        next_obs, reward, terminated, truncated = self.env.step(action)
        transition = GoalTransition(
            observation=obs.observation, action=np.asarray(action, dtype=np.float64),
            reward=float(reward), next_observation=next_obs.observation,
            terminal=bool(terminated), truncated=bool(truncated),
            desired_goal=obs.desired_goal,
            achieved_goal_next=next_obs.achieved_goal,
            provenance="LLM" if use_controller else "RL",
            episode_id=self._episode_id, step_index=self._step_in_episode,
        )
        self.replay.push(transition)
        self.state.k += 1
        if terminated or truncated:
            self._episode_id += 1
            self._begin_episode()
        else:
            self._obs = next_obs
            self._step_in_episode += 1
        return transition

    def greedy_policy(self):
        return lambda obs: self.agent.select_action(obs, explore=False)

    def run(self):
        """Execute the configured number of env steps; returns metric rows."""
        cfg = self.trainer_config
        acfg = self.agent.config
        rows = []
        critic_losses, q_terms, bc_terms = [], [], []
        for _ in range(cfg.total_steps):
            self.collect_step()
            k = self.state.k
            if k > cfg.warmup_steps and self.replay.size("RL") >= acfg.batch_size:
                for _ in range(cfg.grad_steps_per_env_step):
                    m = self.agent.gradient_step(self.replay, self.her_config,
                                                 self.reward_fn, self.relabel_rng,
                                                 self.noise_rng)
                    critic_losses.append(m["critic_loss"])
                    if not np.isnan(m["q_term"]):
                        q_terms.append(m["q_term"])
                        bc_terms.append(m["bc_term"])
            if k % cfg.eval_every == 0:
                raw = evaluate(self.greedy_policy(), self.eval_env,
                               cfg.eval_episodes, self.eval_rng)
                rl_size, llm_size = self.replay.sizes
                rows.append({
                    "env_step": k,
                    "raw_success": raw,
                    "ema_success": self.ema.update(raw),
                    "p_llm": self.state.p_llm,
                    "critic_loss": _mean_or_nan(critic_losses),
                    "q_term": _mean_or_nan(q_terms),
                    "bc_term": _mean_or_nan(bc_terms),
                    "rl_buffer_size": rl_size,
                    "llm_buffer_size": llm_size,
                })
                critic_losses, q_terms, bc_terms = [], [], []
        return rows


def _mean_or_nan(values) -> float:
    return float(np.mean(values)) if values else float("nan")


def arm_configs(arm: str, agent_config: AgentConfig,
                trainer_config: TrainerConfig):
    """Apply the arm's parameter forcing.

    ``td3`` is the same code path with the demonstration machinery disabled:
    no controller rollouts (p0 = 0) and no cloning term (lambda_im = 0).
    """
    if arm == "td3":
        return (replace(agent_config, lambda_im=0.0),
                replace(trainer_config, p0=0.0))
    if arm in ("rlingua", "controller"):
        return agent_config, trainer_config
    raise ValueError(f"unknown arm {arm!r}; expected rlingua, td3 or controller")


def build_eval_report(env_steps, per_seed_ema: dict) -> EvalReport:
    """Stack per-seed EMA series into mean/min/max envelopes."""
    env_steps = np.asarray(env_steps, dtype=np.int64)
    stacked = np.vstack([np.asarray(per_seed_ema[s], dtype=np.float64)
                         for s in sorted(per_seed_ema)])
    if stacked.shape[1] != env_steps.shape[0]:
        raise ValueError("per-seed series length does not match env_steps")
    return EvalReport(
        env_steps=env_steps,
        per_seed_ema={s: np.asarray(v, dtype=np.float64)
                      for s, v in per_seed_ema.items()},
        mean=stacked.mean(axis=0),
        min=stacked.min(axis=0),
        max=stacked.max(axis=0),
    )


def steps_to_threshold(env_steps, series, threshold: float):
    """First env-step stamp at which the series reaches the threshold, or None."""
    series = np.asarray(series, dtype=np.float64)
    hits = np.nonzero(series >= threshold)[0]
    if hits.size == 0:
        return None
    return int(np.asarray(env_steps)[hits[0]])
