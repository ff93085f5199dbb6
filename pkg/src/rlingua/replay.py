"""Dual ring buffers with provenance tags and hindsight relabeling at sample time.

Transitions collected under the scripted controller land in the LLM buffer,
transitions collected under the learned policy land in the RL buffer.  Both
buffers relabel sampled transitions with the ``future`` strategy: with
probability k/(k+1) the desired goal is replaced by the achieved goal of a
uniformly chosen later step of the same stored episode (the transition's own
next achieved goal counts as the earliest later step), and the reward and
terminal flag are recomputed.

Episodes must be pushed in time order; within one buffer an episode's
transitions then occupy a contiguous logical range, which makes the future
lookups O(1) array reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROVENANCES = ("RL", "LLM")
SNAPSHOT_VERSION = 1


class EmptyBufferError(RuntimeError):
    """Raised when sampling from a buffer that holds no transitions."""


@dataclass
class GoalTransition:
    """One environment step with its goals and provenance."""

    observation: np.ndarray
    action: np.ndarray
    reward: float
    next_observation: np.ndarray
    terminal: bool
    truncated: bool
    desired_goal: np.ndarray
    achieved_goal_next: np.ndarray
    provenance: str
    episode_id: int
    step_index: int


@dataclass
class HerConfig:
    """Relabeling configuration; only the ``future`` strategy is supported."""

    strategy: str = "future"
    k: int = 4

    def __post_init__(self):
        if self.strategy != "future":
            raise ValueError(f"unsupported HER strategy {self.strategy!r}")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")

    @property
    def relabel_probability(self) -> float:
        return self.k / (self.k + 1.0)


@dataclass
class TransitionBatch:
    """Stacked sample; relabeled fields already reflect the substituted goals."""

    observation: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_observation: np.ndarray
    terminal: np.ndarray
    truncated: np.ndarray
    desired_goal: np.ndarray
    achieved_goal_next: np.ndarray
    provenance: str
    episode_id: np.ndarray
    step_index: np.ndarray
    relabeled: np.ndarray

    def __len__(self):
        return self.observation.shape[0]

    def row(self, i: int) -> GoalTransition:
        return GoalTransition(
            observation=self.observation[i], action=self.action[i],
            reward=float(self.reward[i]), next_observation=self.next_observation[i],
            terminal=bool(self.terminal[i]), truncated=bool(self.truncated[i]),
            desired_goal=self.desired_goal[i],
            achieved_goal_next=self.achieved_goal_next[i],
            provenance=self.provenance, episode_id=int(self.episode_id[i]),
            step_index=int(self.step_index[i]),
        )


class _Ring:
    """Preallocated ring of transitions with per-slot episode-end bookkeeping."""

    _FIELDS = ("obs", "act", "rew", "next_obs", "term", "trunc", "goal",
               "ag_next", "ep_id", "step_idx", "ep_end")

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.count = 0                   # total pushes ever (logical clock)
        self._allocated = False
        self._cur_ep_id = None
        self._cur_ep_start = 0           # logical index of the episode's first slot

    @property
    def size(self) -> int:
        return min(self.count, self.capacity)

    def _allocate(self, t: GoalTransition):
        cap = self.capacity
        self.obs = np.zeros((cap, len(t.observation)))
        self.act = np.zeros((cap, len(t.action)))
        self.rew = np.zeros(cap)
        self.next_obs = np.zeros((cap, len(t.next_observation)))
        self.term = np.zeros(cap, dtype=bool)
        self.trunc = np.zeros(cap, dtype=bool)
        self.goal = np.zeros((cap, len(t.desired_goal)))
        self.ag_next = np.zeros((cap, len(t.achieved_goal_next)))
        self.ep_id = np.zeros(cap, dtype=np.int64)
        self.step_idx = np.zeros(cap, dtype=np.int64)
        self.ep_end = np.zeros(cap, dtype=np.int64)
        self._allocated = True

    def push(self, t: GoalTransition):
        if not self._allocated:
            self._allocate(t)
        logical = self.count
        slot = logical % self.capacity
        self.obs[slot] = t.observation
        self.act[slot] = t.action
        self.rew[slot] = t.reward
        self.next_obs[slot] = t.next_observation
        self.term[slot] = t.terminal
        self.trunc[slot] = t.truncated
        self.goal[slot] = t.desired_goal
        self.ag_next[slot] = t.achieved_goal_next
        self.ep_id[slot] = t.episode_id
        self.step_idx[slot] = t.step_index
        if t.episode_id != self._cur_ep_id:
            self._cur_ep_id = t.episode_id
            self._cur_ep_start = logical
        # Extend the episode's future horizon on every slot it still occupies.
        start = max(self._cur_ep_start, logical - self.capacity + 1)
        slots = np.arange(start, logical + 1) % self.capacity
        self.ep_end[slots] = logical
        self.count = logical + 1

    def sample(self, n: int, her: HerConfig, reward_fn, rng: np.random.Generator,
               provenance: str) -> TransitionBatch:
        if self.size == 0:
            raise EmptyBufferError(f"the {provenance} buffer is empty")
        low = self.count - self.size
        logical = rng.integers(low, self.count, size=n)
        slots = logical % self.capacity
        relabel = rng.random(n) < her.relabel_probability
        future_logical = rng.integers(logical, self.ep_end[slots] + 1)
        future_slots = future_logical % self.capacity

        goals = self.goal[slots].copy()
        rewards = self.rew[slots].copy()
        terminals = self.term[slots].copy()
        if relabel.any():
            goals[relabel] = self.ag_next[future_slots[relabel]]
            new_rewards = np.asarray(
                reward_fn(self.ag_next[slots[relabel]], goals[relabel]))
            rewards[relabel] = new_rewards
            terminals[relabel] = new_rewards == 1.0
        return TransitionBatch(
            observation=self.obs[slots].copy(), action=self.act[slots].copy(),
            reward=rewards, next_observation=self.next_obs[slots].copy(),
            terminal=terminals, truncated=self.trunc[slots].copy(),
            desired_goal=goals, achieved_goal_next=self.ag_next[slots].copy(),
            provenance=provenance, episode_id=self.ep_id[slots].copy(),
            step_index=self.step_idx[slots].copy(), relabeled=relabel,
        )

    def to_arrays(self, prefix: str) -> dict:
        out = {
            f"{prefix}.count": np.asarray(self.count, dtype=np.int64),
            f"{prefix}.capacity": np.asarray(self.capacity, dtype=np.int64),
            f"{prefix}.cur_ep_id": np.asarray(
                -1 if self._cur_ep_id is None else self._cur_ep_id, dtype=np.int64),
            f"{prefix}.cur_ep_start": np.asarray(self._cur_ep_start, dtype=np.int64),
        }
        if self._allocated:
            for name in self._FIELDS:
                out[f"{prefix}.{name}"] = getattr(self, name)
        return out

    def load_arrays(self, data, prefix: str):
        self.count = int(data[f"{prefix}.count"])
        self.capacity = int(data[f"{prefix}.capacity"])
        ep = int(data[f"{prefix}.cur_ep_id"])
        self._cur_ep_id = None if ep == -1 else ep
        self._cur_ep_start = int(data[f"{prefix}.cur_ep_start"])
        if f"{prefix}.obs" in data:
            for name in self._FIELDS:
                setattr(self, name, data[f"{prefix}.{name}"].copy())
            self._allocated = True


class DualReplay:
    """The RL and LLM buffers plus routing by provenance."""

    def __init__(self, rl_capacity: int = 1_000_000, llm_capacity: int = 1_000_000):
        self._rings = {"RL": _Ring(rl_capacity), "LLM": _Ring(llm_capacity)}

    def push(self, t: GoalTransition) -> None:
        if t.provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}, "
                             f"got {t.provenance!r}")
        self._rings[t.provenance].push(t)

    def size(self, which: str) -> int:
        return self._rings[which].size

    @property
    def sizes(self) -> tuple:
        return self._rings["RL"].size, self._rings["LLM"].size

    def sample_with_her(self, which: str, n: int, her: HerConfig, reward_fn,
                        rng: np.random.Generator) -> TransitionBatch:
        """Draw ``n`` transitions uniformly with replacement, relabeling on the fly.

        ``reward_fn(achieved_batch, desired_batch)`` must return the sparse
        rewards for stacked goal rows.
        """
        if which not in PROVENANCES:
            raise ValueError(f"which must be one of {PROVENANCES}, got {which!r}")
        return self._rings[which].sample(n, her, reward_fn, rng, which)

    def save(self, path) -> None:
        """Snapshot both rings; the restored buffer behaves identically."""
        payload = {"version": np.asarray(SNAPSHOT_VERSION, dtype=np.int64)}
        payload.update(self._rings["RL"].to_arrays("rl"))
        payload.update(self._rings["LLM"].to_arrays("llm"))
        np.savez(path, **payload)

    @classmethod
    def load(cls, path) -> "DualReplay":
        with np.load(path, allow_pickle=False) as data:
            data = dict(data.items())
        if int(data["version"]) != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {int(data['version'])}")
        buf = cls()
        buf._rings["RL"].load_arrays(data, "rl")
        buf._rings["LLM"].load_arrays(data, "llm")
        return buf
