import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rlingua.controllers import (ControllerConstants, euler_to_quaternion,
                                 get_action, is_close, make_controller,
                                 normalize_euler_angle)
from rlingua.envs import GoalObservation, make_env


def run_episode(env, controller, seed):
    obs = env.reset(seed)
    for _ in range(env.spec.max_episode_steps):
        obs, reward, terminated, truncated = env.step(controller.act(obs))
        if reward == 1.0:
            return True
        if terminated or truncated:
            return False
    return False


class TestIsClose:
    def test_equal_points(self):
        assert is_close(np.zeros(3), np.zeros(3), 0.02)

    def test_boundary_is_closed(self):
        a = np.zeros(3)
        b = np.array([0.02, 0.0, 0.0])
        assert is_close(a, b, 0.02)

    def test_clearly_apart(self):
        assert not is_close(np.zeros(3), np.array([0.03, 0.0, 0.0]), 0.02)

    def test_invalid_tol(self):
        with pytest.raises(ValueError):
            is_close(np.zeros(3), np.zeros(3), 0.0)


class TestNormalizeEulerAngle:
    def test_identity(self):
        np.testing.assert_array_equal(normalize_euler_angle(np.zeros(3)),
                                      np.zeros(3))

    def test_wrapping_examples(self):
        out = normalize_euler_angle(np.array([2 * np.pi + 0.1, -2 * np.pi,
                                              3 * np.pi]))
        np.testing.assert_allclose(out, [0.1, 0.0, np.pi], rtol=0, atol=1e-12)

    def test_half_open_interval(self):
        # -pi maps to +pi: the wrapped range is (-pi, pi].
        out = normalize_euler_angle(np.array([-np.pi, np.pi, 0.0]))
        np.testing.assert_allclose(out, [np.pi, np.pi, 0.0], rtol=0, atol=1e-12)

    def test_symmetric_z(self):
        out = normalize_euler_angle(np.array([0.0, 0.0, np.pi]), symmetric_z=True)
        np.testing.assert_allclose(out, np.zeros(3), rtol=0, atol=1e-12)
        out = normalize_euler_angle(np.array([0.0, 0.0, 0.6 * np.pi]),
                                    symmetric_z=True)
        np.testing.assert_allclose(out[2], -0.4 * np.pi, rtol=1e-12)

    def test_modular_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            x = rng.uniform(-20, 20, 3)
            out = normalize_euler_angle(x)
            # Same angle modulo 2*pi, inside the wrapped interval.
            np.testing.assert_allclose(np.mod(out - x, 2 * np.pi), 0.0,
                                       rtol=0, atol=1e-9)
            assert np.all(out > -np.pi - 1e-12) and np.all(out <= np.pi + 1e-12)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            normalize_euler_angle(np.array([np.nan, 0.0, 0.0]))


class TestEulerToQuaternion:
    def test_identity_rotation(self):
        np.testing.assert_array_equal(euler_to_quaternion(np.zeros(3)),
                                      [0.0, 0.0, 0.0, 1.0])

    def test_half_turn_about_x(self):
        q = euler_to_quaternion(np.array([np.pi, 0.0, 0.0]))
        np.testing.assert_allclose(np.abs(q), [1.0, 0.0, 0.0, 0.0], rtol=0,
                                   atol=1e-12)

    def test_quarter_turn_about_z(self):
        q = euler_to_quaternion(np.array([0.0, 0.0, np.pi / 2]))
        np.testing.assert_allclose(q, [0.0, 0.0, np.sqrt(2) / 2, np.sqrt(2) / 2],
                                   rtol=0, atol=1e-12)

    def test_matches_rotation_matrix_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            angles = rng.uniform(-np.pi, np.pi, 3)
            q = euler_to_quaternion(angles)
            assert np.linalg.norm(q) == pytest.approx(1.0, abs=1e-12)
            # Extrinsic x-y-z composition, checked against scipy.
            expected = Rotation.from_euler("xyz", angles).as_quat()
            sign = np.sign(np.dot(q, expected)) or 1.0
            np.testing.assert_allclose(q, sign * expected, rtol=0, atol=1e-10)


class TestGetAction:
    def test_target_equals_current(self):
        pose = np.array([0.1, -0.2, 0.3, 0.0, 0.0, 0.5])
        env_action, raw = get_action(pose, pose, gripper_open=True)
        np.testing.assert_array_equal(env_action[:6], np.zeros(6))
        assert env_action[6] == 1.0
        np.testing.assert_array_equal(raw[:3], pose[:3])
        assert raw[7] == 1.0

    def test_far_target_clips_to_limit(self):
        cur = np.zeros(6)
        target = np.array([0.2, 0.0, 0.0, 0.0, 0.0, 0.0])
        env_action, raw = get_action(cur, target, gripper_open=False)
        assert env_action[0] == 1.0
        assert raw[0] == pytest.approx(0.05, abs=0)
        assert env_action[6] == -1.0
        assert raw[7] == 0.0

    def test_euler_mask_zeroes_channel(self):
        cur = np.zeros(6)
        target = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        env_action, _ = get_action(cur, target, gripper_open=True,
                                   euler_mask=np.array([0.0, 1.0, 1.0]))
        assert env_action[3] == 0.0
        assert env_action[4] != 0.0 and env_action[5] != 0.0

    def test_angular_limit_is_015(self):
        cur = np.zeros(6)
        target = np.array([0.0, 0.0, 0.0, 1.0, -1.0, 0.0])
        env_action, _ = get_action(cur, target, gripper_open=True)
        constants = ControllerConstants()
        limit = constants.max_move_distance * constants.euler_multiplier
        assert limit == pytest.approx(0.15)
        assert env_action[3] == 1.0 and env_action[4] == -1.0

    def test_normalization_exactness(self):
        # Physical deltas are normalized * scale by construction, bit-exact.
        rng = np.random.default_rng(6)
        constants = ControllerConstants()
        limit = constants.max_move_distance
        elimit = limit * constants.euler_multiplier
        for _ in range(200):
            cur = rng.uniform(-0.3, 0.3, 6)
            target = rng.uniform(-0.3, 0.3, 6)
            env_action, raw = get_action(cur, target, gripper_open=True)
            np.testing.assert_array_equal(raw[:3],
                                          cur[:3] + env_action[:3] * limit)
            assert np.all(np.abs(env_action[:6]) <= 1.0)
            assert np.all(np.abs(env_action[3:6] * elimit) <= elimit)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            get_action(np.full(6, np.nan), np.zeros(6), True)


class TestPhaseMachines:
    def test_reach_at_goal_emits_zero_displacement(self):
        env = make_env("reach")
        obs = env.reset(0)
        env.goal = env.gripper_pos.copy()
        obs = GoalObservation(obs.observation, obs.achieved_goal,
                              env.goal.copy())
        ctrl = make_controller("reach")
        np.testing.assert_array_equal(ctrl.act(obs), np.zeros(3))

    def test_pick_and_place_opens_closed_fingers_first(self):
        env = make_env("pick_and_place")
        env.reset(0)
        env.finger = 0.0  # closed, far from the cube
        env.gripper_pos = np.array([0.3, 0.3, 0.3])
        obs = env._observe()
        action = make_controller("pick_and_place").act(obs)
        assert action[-1] == 1.0
        np.testing.assert_array_equal(action[:3], np.zeros(3))

    def test_reach_success_rate_is_one_over_100_seeds(self):
        env = make_env("reach")
        ctrl = make_controller("reach")
        assert all(run_episode(env, ctrl, seed) for seed in range(100))

    @pytest.mark.parametrize("task", ["push", "slide", "pick_and_place",
                                      "pick_and_place_6d"])
    def test_nominal_controllers_solve_their_tasks(self, task):
        env = make_env(task)
        ctrl = make_controller(task)
        wins = sum(run_episode(env, ctrl, seed) for seed in range(50))
        assert wins == 50

    def test_noisy_pick_and_place_is_imperfect_but_useful(self):
        env = make_env("pick_and_place")
        ctrl = make_controller("pick_and_place", noise_scale=0.1, seed=123)
        wins = sum(run_episode(env, ctrl, seed) for seed in range(200))
        assert 0 < wins < 200
        assert wins / 200 >= 0.3

    def test_naive_variant_drops_the_cube(self):
        env = make_env("pick_and_place")
        ctrl = make_controller("pick_and_place", variant="naive")
        wins = sum(run_episode(env, ctrl, seed) for seed in range(30))
        assert wins == 0

    def test_actions_always_in_unit_box(self):
        env = make_env("pick_and_place_6d")
        ctrl = make_controller("pick_and_place_6d", noise_scale=0.5, seed=7)
        obs = env.reset(11)
        for _ in range(50):
            action = ctrl.act(obs)
            assert np.all(action >= -1.0) and np.all(action <= 1.0)
            obs, _, terminated, truncated = env.step(action)
            if terminated or truncated:
                break

    def test_determinism_with_noise_off(self):
        env = make_env("push")
        obs = env.reset(3)
        ctrl = make_controller("push")
        np.testing.assert_array_equal(ctrl.act(obs), ctrl.act(obs))

    def test_transport_holds_until_release_point(self):
        # Once carrying, the controller never opens the fingers until within
        # the proximal distance of the target.
        env = make_env("pick_and_place")
        ctrl = make_controller("pick_and_place")
        obs = env.reset(8)
        opened_early = False
        while True:
            action = ctrl.act(obs)
            if env.attached:
                near = np.linalg.norm(env.gripper_pos - env.goal) <= 0.02
                if action[-1] > 0 and not near:
                    opened_early = True
            obs, reward, terminated, truncated = env.step(action)
            if reward == 1.0 or terminated or truncated:
                break
        assert not opened_early
        assert reward == 1.0

    def test_unknown_task_or_variant_rejected(self):
        with pytest.raises(ValueError):
            make_controller("juggle")
        with pytest.raises(ValueError):
            make_controller("push", variant="naive")

    def test_provider_interface_accepts_drop_in(self):
        # Anything with act(obs) -> action works where a RuleController does.
        class Stationary:
            def act(self, obs):
                return np.zeros(3)

        env = make_env("reach")
        obs = env.reset(0)
        provider = Stationary()
        obs, reward, _, _ = env.step(provider.act(obs))
        assert reward in (0.0, 1.0)
