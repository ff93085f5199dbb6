"""Scripted rule-based controllers sharing the learned policy's action space.

Each controller is a stateless phase machine: every call re-derives the phase
from the current observation, builds a target gripper pose, and turns it into
a normalized action via :func:`get_action`.  A controller provider is any
object with ``act(obs: GoalObservation) -> np.ndarray``; drop-in replacements
(for instance code generated elsewhere) only need that method and can be
registered next to the built-in ones.

The optional imperfection knob adds Gaussian noise to the emitted action and
re-clips to [-1, 1], so an otherwise competent controller can be degraded in a
controlled, reproducible way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import envs
from .envs import GoalObservation, TaskSpec
from .geometry import euler_to_quaternion, is_close, normalize_euler_angle

__all__ = [
    "ControllerConstants", "RuleController", "make_controller", "get_action",
    "is_close", "normalize_euler_angle", "euler_to_quaternion",
]


@dataclass(frozen=True)
class ControllerConstants:
    """Motion limits and finger thresholds used by the phase machines."""

    max_move_distance: float = 0.05
    proximal_distance: float = 0.02
    close_finger_distance: float = 0.04
    open_finger_distance: float = 0.06
    finger_max_move: float = 0.05
    # 0.05 m x 3.0 = 0.15 rad matches the per-step angular limit.
    euler_multiplier: float = 3.0

    def __post_init__(self):
        if not 0 < self.close_finger_distance < self.open_finger_distance:
            raise ValueError("need 0 < close_finger_distance < open_finger_distance")
        for name in ("max_move_distance", "proximal_distance", "finger_max_move",
                     "euler_multiplier"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_CONSTANTS = ControllerConstants()

_HOVER_HEIGHT = 0.10          # transit height above the cube
_PUSH_STANDOFF = 0.04         # approach point behind the cube, along goal->cube
_PUSH_ADVANCE = 0.02          # per-step advance while pushing (< contact radius)
_SLIDE_KICK_GAIN = 11.0       # total cube travel per unit of kick displacement


def get_action(cur_pose, target_pose, gripper_open, constants=DEFAULT_CONSTANTS,
               euler_mask=None, symmetric_z=True):
    """Limited move from the current 6-D pose toward a target 6-D pose.

    Returns ``(env_action, raw_action)``:

    * ``env_action`` (7,): displacement and Euler deltas normalized to
      [-1, 1] per dimension, then the open flag as +1/-1.  The physical
      deltas are exactly ``normalized * limit`` by construction.
    * ``raw_action`` (8,): the absolute next position, the quaternion of the
      absolute next orientation, and the open flag as 1/0.
    """
    cur_pose = np.asarray(cur_pose, dtype=np.float64)
    target_pose = np.asarray(target_pose, dtype=np.float64)
    if cur_pose.shape != (6,) or target_pose.shape != (6,):
        raise ValueError("poses must be 6-vectors (position + Euler angles)")
    if not (np.all(np.isfinite(cur_pose)) and np.all(np.isfinite(target_pose))):
        raise ValueError("poses must be finite")
    if euler_mask is None:
        euler_mask = np.ones(3)
    euler_mask = np.asarray(euler_mask, dtype=np.float64)

    limit = constants.max_move_distance
    euler_limit = limit * constants.euler_multiplier

    norm_disp = np.clip((target_pose[:3] - cur_pose[:3]) / limit, -1.0, 1.0)
    displacement = norm_disp * limit

    euler_change = normalize_euler_angle(target_pose[3:] - cur_pose[3:], symmetric_z)
    euler_change = euler_change * euler_mask
    norm_euler = np.clip(euler_change / euler_limit, -1.0, 1.0)
    euler_delta = norm_euler * euler_limit

    next_euler = cur_pose[3:] + euler_delta
    raw_action = np.empty(8)
    raw_action[:3] = cur_pose[:3] + displacement
    raw_action[3:7] = euler_to_quaternion(next_euler)
    raw_action[7] = 1.0 if gripper_open else 0.0

    env_action = np.empty(7)
    env_action[:3] = norm_disp
    env_action[3:6] = norm_euler
    env_action[6] = 1.0 if gripper_open else -1.0
    return env_action, raw_action


class RuleController:
    """Phase-machine controller for one task from the registry.

    ``noise_scale`` > 0 turns on the imperfection knob.  The ``naive`` variant
    of ``pick_and_place`` reproduces a first-draft control flow that forgets
    it is holding the cube and reopens the fingers, included as a reference
    for how badly an uncorrected script can behave.
    """

    def __init__(self, task_id: str, noise_scale: float = 0.0, seed=None,
                 constants: ControllerConstants = DEFAULT_CONSTANTS,
                 variant: str = "default"):
        self.spec: TaskSpec = envs.task_spec(task_id)
        self.task_id = task_id
        self.constants = constants
        self.noise_scale = float(noise_scale)
        self.variant = variant
        self._rng = np.random.default_rng(seed)
        try:
            variants = _PHASE_MACHINES[task_id]
        except KeyError:
            raise ValueError(f"no controller registered for task {task_id!r}")
        try:
            self._phase_machine = variants[variant]
        except KeyError:
            raise ValueError(
                f"unknown variant {variant!r} for {task_id}; have {sorted(variants)}")

    def act(self, obs: GoalObservation) -> np.ndarray:
        if obs.observation.shape != (self.spec.obs_dim,):
            raise ValueError(
                f"observation has shape {obs.observation.shape}, expected "
                f"({self.spec.obs_dim},) for task {self.task_id}")
        action = self._phase_machine(self, obs)
        if self.noise_scale > 0.0:
            action = action + self._rng.normal(0.0, self.noise_scale, action.shape)
        return np.clip(action, -1.0, 1.0)

    # -- helpers shared by the phase machines -------------------------------

    def _fields(self, obs: GoalObservation) -> dict:
        lay = self.spec.layout
        v = obs.observation
        out = {name: v[sl].copy() for name, sl in lay.items()}
        out["finger"] = float(out["finger"][0]) if "finger" in out else 0.0
        out["goal"] = obs.desired_goal.copy()
        return out

    def _pose(self, fields) -> np.ndarray:
        euler = fields.get("grip_euler", np.zeros(3))
        return np.concatenate([fields["grip_pos"], euler])

    def _move(self, fields, target_pos, gripper_open, target_euler=None,
              euler_mask=None) -> np.ndarray:
        """Assemble a task-dim action that moves toward the target pose."""
        cur = self._pose(fields)
        if target_euler is None:
            target_euler = cur[3:]
        target = np.concatenate([np.asarray(target_pos, dtype=np.float64),
                                 np.asarray(target_euler, dtype=np.float64)])
        env_action, _ = get_action(cur, target, gripper_open, self.constants,
                                   euler_mask=euler_mask)
        return self._to_task_dims(env_action)

    def _to_task_dims(self, env_action) -> np.ndarray:
        spec = self.spec
        parts = [env_action[:3]]
        if spec.has_rotation:
            parts.append(env_action[3:6])
        if spec.has_finger:
            parts.append(env_action[6:7])
        return np.concatenate(parts)

    def _finger_only(self, open_fingers: bool) -> np.ndarray:
        action = np.zeros(self.spec.action_dim)
        action[-1] = 1.0 if open_fingers else -1.0
        return action


# -- phase machines ---------------------------------------------------------


def _reach_machine(ctl: RuleController, obs: GoalObservation) -> np.ndarray:
    f = ctl._fields(obs)
    return ctl._move(f, f["goal"][:3], gripper_open=True)


def _planar_unit(vec2):
    norm = np.linalg.norm(vec2)
    if norm < 1e-12:
        return np.array([1.0, 0.0]), 0.0
    return vec2 / norm, norm


def _approach_behind(ctl, f, standoff_xy):
    """Transit to a point behind the cube without bumping into it.

    Kept deliberately coarse (rise / travel high / descend) so the mapping
    from state to action stays easy for a network to imitate.
    """
    grip = f["grip_pos"]
    obj = f["obj_pos"]
    planar_to_obj = np.linalg.norm(grip[:2] - obj[:2])
    near_standoff = np.linalg.norm(grip[:2] - standoff_xy) <= 0.012
    if near_standoff:
        # Descend onto the standoff point.
        return ctl._move(f, np.array([standoff_xy[0], standoff_xy[1], envs.TABLE_Z]),
                         gripper_open=False)
    if grip[2] < 0.07 and planar_to_obj < 0.055:
        # Too low to travel sideways past the cube; one full step up leaves
        # the contact band.
        return ctl._move(f, np.array([grip[0], grip[1], _HOVER_HEIGHT]),
                         gripper_open=False)
    return ctl._move(f, np.array([standoff_xy[0], standoff_xy[1], _HOVER_HEIGHT]),
                     gripper_open=False)


def _push_machine(ctl: RuleController, obs: GoalObservation) -> np.ndarray:
    f = ctl._fields(obs)
    grip, obj, goal = f["grip_pos"], f["obj_pos"], f["goal"][:3]
    u, dist_to_goal = _planar_unit(goal[:2] - obj[:2])
    if dist_to_goal <= ctl.spec.pos_threshold * 0.6:
        return np.zeros(ctl.spec.action_dim)
    standoff_xy = obj[:2] - u * _PUSH_STANDOFF

    to_obj = obj[:2] - grip[:2]
    aligned = (np.dot(to_obj, u) > 0.0
               and np.linalg.norm(to_obj - np.dot(to_obj, u) * u) <= 0.008
               and np.linalg.norm(to_obj) <= _PUSH_STANDOFF + 0.015
               and abs(grip[2] - envs.TABLE_Z) <= 0.005)
    if aligned:
        # Advance in small increments so the gripper never crosses the cube
        # center, which would shove the cube backward.
        step = min(_PUSH_ADVANCE, max(dist_to_goal - envs.CONTACT_RADIUS, 0.0))
        target_xy = grip[:2] + u * step
        return ctl._move(f, np.array([target_xy[0], target_xy[1], envs.TABLE_Z]),
                         gripper_open=False)
    return _approach_behind(ctl, f, standoff_xy)


def _slide_machine(ctl: RuleController, obs: GoalObservation) -> np.ndarray:
    f = ctl._fields(obs)
    grip, obj, goal = f["grip_pos"], f["obj_pos"], f["goal"][:3]
    if np.linalg.norm(f["obj_vel"]) > 0.0:
        return np.zeros(ctl.spec.action_dim)  # cube is gliding, do not interfere
    u, dist_to_goal = _planar_unit(goal[:2] - obj[:2])
    if dist_to_goal <= ctl.spec.pos_threshold * 0.6:
        return np.zeros(ctl.spec.action_dim)
    standoff_xy = obj[:2] - u * _PUSH_STANDOFF

    to_obj = obj[:2] - grip[:2]
    aligned = (np.dot(to_obj, u) > 0.0
               and np.linalg.norm(to_obj - np.dot(to_obj, u) * u) <= 0.003
               and abs(np.linalg.norm(to_obj) - _PUSH_STANDOFF) <= 0.005
               and abs(grip[2] - envs.TABLE_Z) <= 0.003)
    if aligned:
        # One calibrated ram: the resolved shove travels roughly
        # _SLIDE_KICK_GAIN times its displacement before decaying away.
        kick = np.clip(dist_to_goal / _SLIDE_KICK_GAIN, 1e-3,
                       envs.CONTACT_RADIUS - 1e-3)
        gap = np.linalg.norm(to_obj)
        advance = gap - (envs.CONTACT_RADIUS - kick)
        if advance <= 0.0:
            return np.zeros(ctl.spec.action_dim)
        target_xy = grip[:2] + u * advance
        return ctl._move(f, np.array([target_xy[0], target_xy[1], envs.TABLE_Z]),
                         gripper_open=False)
    return _approach_behind(ctl, f, standoff_xy)


def _pick_machine(ctl: RuleController, obs: GoalObservation,
                  target_euler=None, euler_mask=None) -> np.ndarray:
    """Grasp-and-carry flow: open, center, descend, close, transport, release."""
    f = ctl._fields(obs)
    c = ctl.constants
    grip, obj, goal = f["grip_pos"], f["obj_pos"], f["goal"][:3]
    finger = f["finger"]
    grasped = (finger <= c.close_finger_distance
               and is_close(grip, obj, c.proximal_distance))
    if grasped:
        oriented = True
        if ctl.spec.goal_dim == 6:
            yaw_err = normalize_euler_angle(
                f["obj_euler"] - f["goal"][3:], symmetric_z=True)[2]
            oriented = abs(yaw_err) <= 0.05
        if oriented and is_close(grip, goal, c.proximal_distance):
            return ctl._finger_only(open_fingers=True)  # release
        # Hold firmly while transporting.
        action = ctl._move(f, goal, gripper_open=False,
                           target_euler=target_euler, euler_mask=euler_mask)
        action[-1] = -1.0
        return action
    if is_close(grip, obj, c.proximal_distance):
        # In grasp range: keep closing until the cube attaches; closing from
        # fully open takes two steps.  If the fingers already closed on
        # nothing, reopen and try again.
        if finger < c.close_finger_distance:
            return ctl._finger_only(open_fingers=True)
        return ctl._finger_only(open_fingers=False)
    if finger < c.open_finger_distance:
        return ctl._finger_only(open_fingers=True)  # open before approaching
    if np.linalg.norm(grip[:2] - obj[:2]) <= 0.012:
        action = ctl._move(f, obj, gripper_open=True)  # descend
    else:
        above = np.array([obj[0], obj[1], obj[2] + _HOVER_HEIGHT])
        action = ctl._move(f, above, gripper_open=True)  # center above the cube
    return action


def _pick_machine_naive(ctl: RuleController, obs: GoalObservation) -> np.ndarray:
    """First-draft flow without a grasp latch; reopens and drops the cube."""
    f = ctl._fields(obs)
    c = ctl.constants
    grip, obj, goal = f["grip_pos"], f["obj_pos"], f["goal"][:3]
    finger = f["finger"]
    if finger < c.open_finger_distance:
        return ctl._finger_only(open_fingers=True)
    if is_close(grip, obj, c.proximal_distance):
        if finger > c.close_finger_distance:
            return ctl._finger_only(open_fingers=False)
        return ctl._move(f, goal, gripper_open=False)
    return ctl._move(f, obj, gripper_open=True)


def _pick_6d_machine(ctl: RuleController, obs: GoalObservation) -> np.ndarray:
    f = ctl._fields(obs)
    # While carrying, rotate so the cube's yaw lands on the goal yaw; the cube
    # keeps its yaw offset relative to the gripper from the moment of grasp.
    yaw_offset = normalize_euler_angle(f["obj_euler"] - f["grip_euler"])[2]
    target_yaw = f["goal"][5] - yaw_offset
    target_euler = np.array([0.0, 0.0, target_yaw])
    return _pick_machine(ctl, obs, target_euler=target_euler,
                         euler_mask=np.array([0.0, 0.0, 1.0]))


_PHASE_MACHINES = {
    "reach": {"default": _reach_machine},
    "push": {"default": _push_machine},
    "slide": {"default": _slide_machine},
    "pick_and_place": {"default": _pick_machine, "naive": _pick_machine_naive},
    "pick_and_place_6d": {"default": _pick_6d_machine},
}


def make_controller(task_id: str, noise_scale: float = 0.0, seed=None,
                    variant: str = "default") -> RuleController:
    """Instantiate a scripted controller from the registry."""
    return RuleController(task_id, noise_scale=noise_scale, seed=seed,
                          variant=variant)
