import numpy as np
import pytest

from rlingua.envs import compute_reward, task_spec
from rlingua.replay import (DualReplay, EmptyBufferError, GoalTransition,
                            HerConfig)

SPEC = task_spec("reach")


def reward_fn(achieved, desired):
    return compute_reward(achieved, desired, SPEC)


def transition(episode_id, step_index, provenance="RL", goal=None,
               achieved_next=None, reward=0.0):
    """Tiny 3-goal transition; observation encodes identity for tracing."""
    goal = np.asarray(goal if goal is not None else [1.0, 1.0, 1.0], dtype=float)
    if achieved_next is None:
        achieved_next = [episode_id, step_index + 1, 0.0]
    achieved_next = np.asarray(achieved_next, dtype=float)
    obs = np.array([episode_id, step_index, 0.0, 0.0, 0.0, 0.0], dtype=float)
    return GoalTransition(
        observation=obs, action=np.zeros(3), reward=reward,
        next_observation=obs + 0.5, terminal=reward == 1.0, truncated=False,
        desired_goal=goal, achieved_goal_next=achieved_next,
        provenance=provenance, episode_id=episode_id, step_index=step_index,
    )


def fill_episode(buf, episode_id, n_steps, provenance="RL", goal=None):
    for t in range(n_steps):
        buf.push(transition(episode_id, t, provenance, goal=goal))


class TestPush:
    def test_routing_by_provenance(self):
        buf = DualReplay()
        buf.push(transition(0, 0, "RL"))
        assert buf.sizes == (1, 0)
        buf.push(transition(0, 1, "LLM"))
        assert buf.sizes == (1, 1)

    def test_invalid_provenance_rejected(self):
        buf = DualReplay()
        with pytest.raises(ValueError):
            buf.push(transition(0, 0, "demo"))

    def test_ring_eviction_keeps_newest_in_order(self):
        buf = DualReplay(rl_capacity=2)
        for t in range(3):
            buf.push(transition(0, t))
        assert buf.size("RL") == 2
        her = HerConfig(k=0)
        batch = buf.sample_with_her("RL", 200, her, reward_fn,
                                    np.random.default_rng(0))
        kept = set(batch.step_index.tolist())
        assert kept == {1, 2}

    def test_mixed_push_conservation(self):
        buf = DualReplay()
        rng = np.random.default_rng(1)
        total = 10_000
        n_llm = 0
        for i in range(total):
            prov = "LLM" if rng.random() < 0.3 else "RL"
            n_llm += prov == "LLM"
            buf.push(transition(i // 50, i % 50, prov))
        assert buf.sizes == (total - n_llm, n_llm)


class TestSampling:
    def test_empty_buffer_raises(self):
        buf = DualReplay()
        with pytest.raises(EmptyBufferError):
            buf.sample_with_her("RL", 4, HerConfig(), reward_fn,
                                np.random.default_rng(0))

    def test_k0_returns_stored_rewards(self):
        buf = DualReplay()
        fill_episode(buf, 0, 5)
        buf.push(transition(1, 0, reward=1.0))
        her = HerConfig(k=0)
        batch = buf.sample_with_her("RL", 500, her, reward_fn,
                                    np.random.default_rng(2))
        assert not batch.relabeled.any()
        for i in range(len(batch)):
            expected = 1.0 if batch.episode_id[i] == 1 else 0.0
            assert batch.reward[i] == expected
        np.testing.assert_array_equal(batch.desired_goal,
                                      np.ones_like(batch.desired_goal))

    def test_single_step_episode_relabels_to_own_achieved_goal(self):
        buf = DualReplay()
        achieved = [0.2, 0.3, 0.1]
        buf.push(transition(0, 0, achieved_next=achieved))
        her = HerConfig(k=10_000)  # relabel probability ~ 1
        batch = buf.sample_with_her("RL", 50, her, reward_fn,
                                    np.random.default_rng(3))
        assert batch.relabeled.all()
        np.testing.assert_array_equal(
            batch.desired_goal, np.tile(achieved, (50, 1)))
        assert np.all(batch.reward == 1.0)
        assert np.all(batch.terminal)

    def test_relabel_fraction_and_reward_recompute(self):
        buf = DualReplay()
        for ep in range(40):
            fill_episode(buf, ep, 25)
        her = HerConfig(k=4)
        rng = np.random.default_rng(4)
        n = 10_000
        batch = buf.sample_with_her("RL", n, her, reward_fn, rng)
        frac = batch.relabeled.mean()
        sigma = np.sqrt(0.8 * 0.2 / n)
        assert abs(frac - 0.8) <= 3 * sigma
        # Every relabeled reward equals an independent recompute, exactly.
        for i in np.nonzero(batch.relabeled)[0]:
            expected = compute_reward(batch.achieved_goal_next[i],
                                      batch.desired_goal[i], SPEC)
            assert batch.reward[i] == expected
            assert batch.terminal[i] == (expected == 1.0)

    def test_relabel_source_is_strictly_later_achieved_goal(self):
        buf = DualReplay()
        for ep in range(10):
            fill_episode(buf, ep, 7)
        her = HerConfig(k=10_000)
        batch = buf.sample_with_her("RL", 2000, her, reward_fn,
                                    np.random.default_rng(5))
        # achieved_goal_next encodes (episode, step+1): the substituted goal
        # must come from the same episode at a step index >= the sampled one,
        # i.e. an achieved goal strictly later than the sampled state.
        relabeled = np.nonzero(batch.relabeled)[0]
        assert relabeled.size > 1900
        for i in relabeled:
            ep, step = batch.episode_id[i], batch.step_index[i]
            src_ep, src_next = batch.desired_goal[i][0], batch.desired_goal[i][1]
            assert src_ep == ep
            assert src_next >= step + 1

    def test_provenance_purity(self):
        buf = DualReplay()
        fill_episode(buf, 0, 20, "RL")
        fill_episode(buf, 1, 20, "LLM")
        rng = np.random.default_rng(6)
        rl = buf.sample_with_her("RL", 300, HerConfig(), reward_fn, rng)
        llm = buf.sample_with_her("LLM", 300, HerConfig(), reward_fn, rng)
        assert rl.provenance == "RL" and set(rl.episode_id) == {0}
        assert llm.provenance == "LLM" and set(llm.episode_id) == {1}

    def test_interleaved_episode_future_stays_within_buffer_episode(self):
        # One episode alternating provenance: each buffer sees a gappy but
        # contiguous slice of it; future lookups stay inside that slice.
        buf = DualReplay()
        for t in range(10):
            buf.push(transition(7, t, "LLM" if t % 2 else "RL"))
        her = HerConfig(k=10_000)
        batch = buf.sample_with_her("RL", 500, her, reward_fn,
                                    np.random.default_rng(7))
        sources = {int(batch.desired_goal[i][1])
                   for i in np.nonzero(batch.relabeled)[0]}
        assert sources <= {1, 3, 5, 7, 9}  # even steps stored, next index odd

    def test_slot_selection_uniformity(self):
        buf = DualReplay()
        fill_episode(buf, 0, 50)
        rng = np.random.default_rng(8)
        n = 100_000
        batch = buf.sample_with_her("RL", n, HerConfig(k=0), reward_fn, rng)
        counts = np.bincount(batch.step_index, minlength=50)
        p = 1 / 50
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) <= 4 * sigma)

    def test_batch_row_view(self):
        buf = DualReplay()
        fill_episode(buf, 3, 4)
        batch = buf.sample_with_her("RL", 5, HerConfig(k=0), reward_fn,
                                    np.random.default_rng(9))
        row = batch.row(0)
        assert row.provenance == "RL"
        assert row.episode_id == 3
        assert isinstance(row.reward, float)


class TestHerConfig:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            HerConfig(k=-1)
        with pytest.raises(ValueError):
            HerConfig(strategy="final")

    def test_relabel_probability(self):
        assert HerConfig(k=4).relabel_probability == pytest.approx(0.8)
        assert HerConfig(k=0).relabel_probability == 0.0


class TestSnapshot:
    def test_round_trip_preserves_content_and_behavior(self, tmp_path):
        buf = DualReplay(rl_capacity=64, llm_capacity=64)
        for ep in range(5):
            fill_episode(buf, ep, 10, "RL")
            fill_episode(buf, 100 + ep, 6, "LLM")
        path = tmp_path / "replay.npz"
        buf.save(path)
        restored = DualReplay.load(path)
        assert restored.sizes == buf.sizes
        her = HerConfig(k=4)
        a = buf.sample_with_her("RL", 64, her, reward_fn,
                                np.random.default_rng(42))
        b = restored.sample_with_her("RL", 64, her, reward_fn,
                                     np.random.default_rng(42))
        np.testing.assert_array_equal(a.observation, b.observation)
        np.testing.assert_array_equal(a.desired_goal, b.desired_goal)
        np.testing.assert_array_equal(a.reward, b.reward)
        # Continued pushes behave identically.
        buf.push(transition(999, 0))
        restored.push(transition(999, 0))
        assert restored.sizes == buf.sizes
