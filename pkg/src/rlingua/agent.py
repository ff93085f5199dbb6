"""Twin-critic deterministic actor-critic with a demonstration-cloning actor term.

The critics fit the smoothed twin-min target

    y = r + (1 - terminal) * gamma * min_i Qbar_i(s', pibar(s') + eps),

with eps a clipped Gaussian and the perturbed action re-clipped to [-1, 1].
Timeout truncation never zeroes the bootstrap; only success terminals do.

The actor descends

    L = -(1/N) sum_RL Q1(s, pi(s)) + lambda_im * (1/M) sum_LLM ||pi(s) - a||^2,

one Adam step per ``policy_delay`` critic steps, followed by Polyak updates of
all three target networks.  With ``lambda_im = 0`` and no demonstration batch
this is plain TD3.

Actor input is observation||desired_goal; critics additionally take the action.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .nets import (AdamState, Mlp, adam_from_arrays, adam_step, adam_to_arrays,
                   mlp_backward, mlp_forward, mlp_init, net_from_arrays,
                   net_to_arrays, polyak_update)
from .replay import HerConfig, TransitionBatch

AGENT_CHECKPOINT_VERSION = 1

_NO_RELABEL = HerConfig(k=0)


@dataclass
class AgentConfig:
    gamma: float = 0.975
    tau: float = 0.005
    policy_delay: int = 2
    lambda_im: float = 1.0
    target_noise_sigma: float = 0.2
    target_noise_clip: float = 0.5
    exploration_noise_sigma: float = 0.1
    batch_size: int = 256
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    hidden_sizes: tuple = (256, 256)

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.policy_delay < 1:
            raise ValueError(f"policy_delay must be >= 1, got {self.policy_delay}")
        if self.target_noise_clip < 0:
            raise ValueError("target_noise_clip must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class Agent:
    """Actor, twin critics, their target copies, and the update rules."""

    def __init__(self, obs_dim: int, goal_dim: int, action_dim: int,
                 config: AgentConfig, rng: np.random.Generator):
        self.obs_dim = int(obs_dim)
        self.goal_dim = int(goal_dim)
        self.action_dim = int(action_dim)
        self.config = config
        in_dim = self.obs_dim + self.goal_dim
        hidden = list(config.hidden_sizes)
        self.actor = mlp_init([in_dim] + hidden + [self.action_dim], rng,
                              output_activation="tanh",
                              output_scale=np.ones(self.action_dim),
                              final_layer_scale=1e-3)
        self.critic1 = mlp_init([in_dim + self.action_dim] + hidden + [1], rng)
        self.critic2 = mlp_init([in_dim + self.action_dim] + hidden + [1], rng)
        self.actor_target = self.actor.copy()
        self.critic1_target = self.critic1.copy()
        self.critic2_target = self.critic2.copy()
        self.actor_adam = AdamState.for_net(self.actor, config.actor_lr)
        self.critic1_adam = AdamState.for_net(self.critic1, config.critic_lr)
        self.critic2_adam = AdamState.for_net(self.critic2, config.critic_lr)
        self.update_count = 0
        self.actor_update_count = 0

    # -- acting -------------------------------------------------------------

    def _actor_input(self, obs) -> np.ndarray:
        x = np.concatenate([obs.observation, obs.desired_goal])
        if x.shape[0] != self.actor.input_dim:
            raise ValueError(
                f"observation||goal has dim {x.shape[0]}, actor expects "
                f"{self.actor.input_dim}")
        return x

    def select_action(self, obs, explore: bool,
                      rng: np.random.Generator | None = None) -> np.ndarray:
        """Deterministic actor output, plus clipped Gaussian noise if exploring."""
        action = mlp_forward(self.actor, self._actor_input(obs))
        if explore:
            if rng is None:
                raise ValueError("explore=True requires an rng")
            action = action + rng.normal(0.0, self.config.exploration_noise_sigma,
                                         self.action_dim)
            action = np.clip(action, -1.0, 1.0)
        return action

    # -- updates ------------------------------------------------------------

    @staticmethod
    def _inputs(batch: TransitionBatch):
        state = np.hstack([batch.observation, batch.desired_goal])
        next_state = np.hstack([batch.next_observation, batch.desired_goal])
        return state, next_state

    def critic_update(self, batch: TransitionBatch, rng: np.random.Generator):
        """One Adam step of both critics toward the smoothed twin-min target."""
        if len(batch) == 0:
            raise ValueError("critic_update requires a non-empty batch")
        cfg = self.config
        state, next_state = self._inputs(batch)
        n = len(batch)

        next_action = mlp_forward(self.actor_target, next_state)
        noise = rng.normal(0.0, cfg.target_noise_sigma, (n, self.action_dim))
        noise = np.clip(noise, -cfg.target_noise_clip, cfg.target_noise_clip)
        next_action = np.clip(next_action + noise, -1.0, 1.0)

        target_in = np.hstack([next_state, next_action])
        q1 = mlp_forward(self.critic1_target, target_in)[:, 0]
        q2 = mlp_forward(self.critic2_target, target_in)[:, 0]
        q_min = np.minimum(q1, q2)
        y = batch.reward + (1.0 - batch.terminal) * cfg.gamma * q_min

        critic_in = np.hstack([state, batch.action])
        losses = []
        for net, adam in ((self.critic1, self.critic1_adam),
                          (self.critic2, self.critic2_adam)):
            pred = mlp_forward(net, critic_in)[:, 0]
            diff = pred - y
            losses.append(float(np.mean(diff * diff)))
            grad_out = (2.0 / n) * diff[:, None]
            adam_step(net, mlp_backward(net, critic_in, grad_out), adam)
        return losses[0], losses[1]

    def actor_loss_gradient(self, rl_batch: TransitionBatch,
                            llm_batch: TransitionBatch | None = None):
        """Gradient of the combined actor loss w.r.t. the actor parameters.

        The loss is ``-mean(Q1(s, pi(s)))`` over the RL batch plus
        ``lambda_im * mean(||pi(s) - a||^2)`` over the demonstration batch.
        Returns ``(bundle, q_term, bc_term)``.
        """
        if rl_batch is None or len(rl_batch) == 0:
            raise ValueError("actor_update requires a non-empty RL batch")
        cfg = self.config
        state, _ = self._inputs(rl_batch)
        n = len(rl_batch)

        pi = mlp_forward(self.actor, state)
        critic_in = np.hstack([state, pi])
        q_values = mlp_forward(self.critic1, critic_in)[:, 0]
        q_term = float(np.mean(q_values))
        # dQ/da through the first critic, chained into the actor.
        dq = mlp_backward(self.critic1, critic_in, np.ones((n, 1)))
        dq_da = dq.input_gradient[:, -self.action_dim:]
        bundle = mlp_backward(self.actor, state, -dq_da / n)

        bc_term = 0.0
        if cfg.lambda_im != 0.0 and llm_batch is not None and len(llm_batch) > 0:
            llm_state, _ = self._inputs(llm_batch)
            m = len(llm_batch)
            pi_llm = mlp_forward(self.actor, llm_state)
            diff = pi_llm - llm_batch.action
            bc_term = float(np.mean(np.sum(diff * diff, axis=1)))
            bc_grad_out = (2.0 * cfg.lambda_im / m) * diff
            bundle.add_(mlp_backward(self.actor, llm_state, bc_grad_out))
        return bundle, q_term, bc_term

    def actor_update(self, rl_batch: TransitionBatch,
                     llm_batch: TransitionBatch | None = None):
        """One Adam step on the combined policy-gradient and cloning loss.

        Returns ``(q_term, bc_term)``: the mean Q1 under the current policy on
        the RL batch and the mean squared cloning error on the demonstration
        batch (0.0 when there is none).
        """
        bundle, q_term, bc_term = self.actor_loss_gradient(rl_batch, llm_batch)
        adam_step(self.actor, bundle, self.actor_adam)
        self.actor_update_count += 1
        return q_term, bc_term

    def update_targets(self) -> None:
        tau = self.config.tau
        polyak_update(self.actor_target, self.actor, tau)
        polyak_update(self.critic1_target, self.critic1, tau)
        polyak_update(self.critic2_target, self.critic2, tau)

    def gradient_step(self, replay, her, reward_fn, sample_rng: np.random.Generator,
                      noise_rng: np.random.Generator):
        """One training iteration: critics always, actor every policy_delay-th.

        Samples the critic batch from the RL buffer and, on actor steps, fresh
        RL and demonstration batches.  ``sample_rng`` drives batch selection
        and relabeling, ``noise_rng`` the target smoothing noise.  Returns a
        metrics dict.
        """
        cfg = self.config
        batch = replay.sample_with_her("RL", cfg.batch_size, her, reward_fn,
                                       sample_rng)
        loss1, loss2 = self.critic_update(batch, noise_rng)
        self.update_count += 1
        metrics = {"critic_loss": 0.5 * (loss1 + loss2),
                   "q_term": np.nan, "bc_term": np.nan}
        if self.update_count % cfg.policy_delay == 0:
            rl_batch = replay.sample_with_her("RL", cfg.batch_size, her,
                                              reward_fn, sample_rng)
            llm_batch = None
            if cfg.lambda_im != 0.0 and replay.size("LLM") > 0:
                # Demonstration pairs are cloned against their original
                # goals: substituting a hindsight goal leaves the stored
                # action aimed at a goal the input no longer contains, which
                # turns overlapping demos into conflicting targets.
                llm_batch = replay.sample_with_her(
                    "LLM", cfg.batch_size, _NO_RELABEL, reward_fn, sample_rng)
            q_term, bc_term = self.actor_update(rl_batch, llm_batch)
            self.update_targets()
            metrics["q_term"] = q_term
            metrics["bc_term"] = bc_term
        return metrics

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        """Checkpoint every network, optimizer state, and counter; bit-exact."""
        payload = {
            "version": np.asarray(AGENT_CHECKPOINT_VERSION, dtype=np.int64),
            "meta": np.asarray(json.dumps({
                "obs_dim": self.obs_dim, "goal_dim": self.goal_dim,
                "action_dim": self.action_dim,
                "update_count": self.update_count,
                "actor_update_count": self.actor_update_count,
                "config": {**asdict(self.config),
                           "hidden_sizes": list(self.config.hidden_sizes)},
            })),
        }
        for prefix, net in (("actor", self.actor), ("critic1", self.critic1),
                            ("critic2", self.critic2),
                            ("actor_t", self.actor_target),
                            ("critic1_t", self.critic1_target),
                            ("critic2_t", self.critic2_target)):
            payload.update(net_to_arrays(net, prefix))
        for prefix, adam in (("actor_adam", self.actor_adam),
                             ("critic1_adam", self.critic1_adam),
                             ("critic2_adam", self.critic2_adam)):
            payload.update(adam_to_arrays(adam, prefix))
        np.savez(path, **payload)

    @classmethod
    def load(cls, path) -> "Agent":
        with np.load(path, allow_pickle=False) as data:
            data = dict(data.items())
        if int(data["version"]) != AGENT_CHECKPOINT_VERSION:
            raise ValueError(f"unsupported agent checkpoint version "
                             f"{int(data['version'])}")
        meta = json.loads(str(data["meta"]))
        cfg_dict = dict(meta["config"])
        cfg_dict["hidden_sizes"] = tuple(cfg_dict["hidden_sizes"])
        config = AgentConfig(**cfg_dict)
        agent = cls.__new__(cls)
        agent.obs_dim = meta["obs_dim"]
        agent.goal_dim = meta["goal_dim"]
        agent.action_dim = meta["action_dim"]
        agent.config = config
        agent.actor = net_from_arrays(data, "actor")
        agent.critic1 = net_from_arrays(data, "critic1")
        agent.critic2 = net_from_arrays(data, "critic2")
        agent.actor_target = net_from_arrays(data, "actor_t")
        agent.critic1_target = net_from_arrays(data, "critic1_t")
        agent.critic2_target = net_from_arrays(data, "critic2_t")
        n_layers = len(agent.actor.weights)
        agent.actor_adam = adam_from_arrays(data, "actor_adam", n_layers)
        agent.critic1_adam = adam_from_arrays(data, "critic1_adam", n_layers)
        agent.critic2_adam = adam_from_arrays(data, "critic2_adam", n_layers)
        agent.update_count = meta["update_count"]
        agent.actor_update_count = meta["actor_update_count"]
        return agent
