"""Deterministic kinematic goal-conditioned manipulation environments.

Five tasks share one step engine: ``reach``, ``push``, ``slide``,
``pick_and_place`` and ``pick_and_place_6d``.  The gripper is a point with an
optional two-finger opening; per-step motion is limited to 0.05 m per axis and
0.15 rad per Euler axis.  Reward is sparse: 1 when the achieved goal matches
the desired goal within the task thresholds, else 0.

There is no physics engine.  Object interaction is reduced to two rules:

* overlap resolution: a non-open gripper that ends a step within the planar
  contact radius of a free cube (and near its height) shoves the cube outward
  until the planar distance equals the contact radius;
* grasping: the cube attaches when the fingers cross below the closed
  threshold while the gripper is within the grasp radius, then follows the
  gripper rigidly until the fingers open past the open threshold.

``slide`` additionally lets shove displacements persist as a decaying cube
velocity so the cube can glide beyond the gripper's reachable region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import angular_error, normalize_euler_angle

# Per-step action limits.
POSITION_STEP = 0.05          # m per axis
ANGLE_STEP = 0.15             # rad per axis
FINGER_STEP = 0.05            # m per step
FINGER_MAX = 0.1              # finger opening range [0, 0.1] m

# Table-top geometry.
CUBE_HALF = 0.02              # cube side 0.04 m
TABLE_Z = CUBE_HALF           # cube center height while on the table
CONTACT_RADIUS = 0.03         # planar overlap-resolution radius
CONTACT_Z_WINDOW = 0.03       # vertical band within which contact applies
CONTACT_MIN_OFFSET = 1e-9     # below this the push direction is undefined
GRASP_RADIUS = 0.02           # gripper-to-cube distance allowing attachment
GRASP_ALIGN = 0.005           # max planar offset for the cube to sit between the fingers
FINGER_CLOSED = 0.04          # fingers count as closed below this
FINGER_OPEN = 0.06            # fingers count as open above this
SLIDE_DECAY = 0.9             # cube velocity decay per step (slide only)
SLIDE_STOP = 1e-4             # cube velocity zeroed below this (m/step)

WORKSPACE_LOW = np.array([-0.5, -0.5, 0.0])
WORKSPACE_HIGH = np.array([0.5, 0.5, 0.5])


@dataclass
class GoalObservation:
    """One observation: flat state vector plus achieved and desired goals."""

    observation: np.ndarray
    achieved_goal: np.ndarray
    desired_goal: np.ndarray


@dataclass
class TaskSpec:
    """Static description of one task: dimensions, boxes, thresholds."""

    task_id: str
    obs_dim: int
    action_dim: int
    goal_dim: int
    has_object: bool
    has_finger: bool
    has_rotation: bool
    slide_momentum: bool
    pos_threshold: float
    ang_threshold: float | None
    max_episode_steps: int
    gripper_start_low: np.ndarray
    gripper_start_high: np.ndarray
    gripper_low: np.ndarray
    gripper_high: np.ndarray
    object_low: np.ndarray | None
    object_high: np.ndarray | None
    goal_low: np.ndarray
    goal_high: np.ndarray
    layout: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pos_threshold <= 0:
            raise ValueError("success threshold must be positive")
        if self.max_episode_steps <= 0:
            raise ValueError("max episode steps must be positive")


def _box(*vals):
    return np.asarray(vals, dtype=np.float64)


def _layout(*parts):
    out = {}
    i = 0
    for name, width in parts:
        out[name] = slice(i, i + width)
        i += width
    return out, i


def _reach_spec() -> TaskSpec:
    layout, dim = _layout(("grip_pos", 3), ("grip_vel", 3))
    return TaskSpec(
        task_id="reach", obs_dim=dim, action_dim=3, goal_dim=3,
        has_object=False, has_finger=False, has_rotation=False,
        slide_momentum=False, pos_threshold=0.05, ang_threshold=None,
        max_episode_steps=50,
        gripper_start_low=_box(-0.02, -0.02, 0.18),
        gripper_start_high=_box(0.02, 0.02, 0.22),
        gripper_low=WORKSPACE_LOW, gripper_high=WORKSPACE_HIGH,
        object_low=None, object_high=None,
        goal_low=_box(-0.2, -0.2, 0.05), goal_high=_box(0.2, 0.2, 0.35),
        layout=layout,
    )


def _push_spec() -> TaskSpec:
    layout, dim = _layout(("grip_pos", 3), ("grip_vel", 3), ("obj_pos", 3),
                          ("obj_euler", 3), ("obj_vel", 3), ("obj_rotvel", 3))
    return TaskSpec(
        task_id="push", obs_dim=dim, action_dim=3, goal_dim=3,
        has_object=True, has_finger=False, has_rotation=False,
        slide_momentum=False, pos_threshold=0.05, ang_threshold=None,
        max_episode_steps=50,
        # Start at table level, as pushing benchmarks do; exploration then
        # actually makes contact with the cube.
        gripper_start_low=_box(-0.02, -0.02, TABLE_Z),
        gripper_start_high=_box(0.02, 0.02, 0.04),
        gripper_low=WORKSPACE_LOW, gripper_high=WORKSPACE_HIGH,
        object_low=_box(-0.12, -0.12, TABLE_Z), object_high=_box(0.12, 0.12, TABLE_Z),
        goal_low=_box(-0.12, -0.12, TABLE_Z), goal_high=_box(0.12, 0.12, TABLE_Z),
        layout=layout,
    )


def _slide_spec() -> TaskSpec:
    layout, dim = _layout(("grip_pos", 3), ("grip_vel", 3), ("obj_pos", 3),
                          ("obj_euler", 3), ("obj_vel", 3), ("obj_rotvel", 3))
    # The gripper cannot go past x = 0.15, so goals at x >= 0.24 can only be
    # reached by launching the cube.
    return TaskSpec(
        task_id="slide", obs_dim=dim, action_dim=3, goal_dim=3,
        has_object=True, has_finger=False, has_rotation=False,
        slide_momentum=True, pos_threshold=0.05, ang_threshold=None,
        max_episode_steps=50,
        gripper_start_low=_box(-0.12, -0.02, TABLE_Z),
        gripper_start_high=_box(-0.08, 0.02, 0.04),
        gripper_low=WORKSPACE_LOW, gripper_high=_box(0.15, 0.5, 0.5),
        object_low=_box(-0.02, -0.04, TABLE_Z), object_high=_box(0.02, 0.04, TABLE_Z),
        goal_low=_box(0.24, -0.05, TABLE_Z), goal_high=_box(0.3, 0.05, TABLE_Z),
        layout=layout,
    )


def _pick_and_place_spec() -> TaskSpec:
    layout, dim = _layout(("grip_pos", 3), ("grip_vel", 3), ("finger", 1),
                          ("obj_pos", 3), ("obj_euler", 3), ("obj_vel", 3),
                          ("obj_rotvel", 3))
    return TaskSpec(
        task_id="pick_and_place", obs_dim=dim, action_dim=4, goal_dim=3,
        has_object=True, has_finger=True, has_rotation=False,
        slide_momentum=False, pos_threshold=0.05, ang_threshold=None,
        max_episode_steps=50,
        gripper_start_low=_box(-0.02, -0.02, 0.12),
        gripper_start_high=_box(0.02, 0.02, 0.18),
        gripper_low=WORKSPACE_LOW, gripper_high=WORKSPACE_HIGH,
        object_low=_box(-0.12, -0.12, TABLE_Z), object_high=_box(0.12, 0.12, TABLE_Z),
        goal_low=_box(-0.12, -0.12, TABLE_Z), goal_high=_box(0.12, 0.12, 0.25),
        layout=layout,
    )


def _pick_and_place_6d_spec() -> TaskSpec:
    layout, dim = _layout(("grip_pos", 3), ("grip_euler", 3), ("grip_vel", 3),
                          ("finger", 1), ("obj_pos", 3), ("obj_euler", 3),
                          ("obj_vel", 3), ("obj_rotvel", 3))
    return TaskSpec(
        task_id="pick_and_place_6d", obs_dim=dim, action_dim=7, goal_dim=6,
        has_object=True, has_finger=True, has_rotation=True,
        slide_momentum=False, pos_threshold=0.05, ang_threshold=0.1,
        max_episode_steps=50,
        gripper_start_low=_box(-0.02, -0.02, 0.12),
        gripper_start_high=_box(0.02, 0.02, 0.18),
        gripper_low=WORKSPACE_LOW, gripper_high=WORKSPACE_HIGH,
        object_low=_box(-0.12, -0.12, TABLE_Z), object_high=_box(0.12, 0.12, TABLE_Z),
        goal_low=_box(-0.12, -0.12, TABLE_Z), goal_high=_box(0.12, 0.12, 0.25),
        layout=layout,
    )


_TASK_FACTORIES = {
    "reach": _reach_spec,
    "push": _push_spec,
    "slide": _slide_spec,
    "pick_and_place": _pick_and_place_spec,
    "pick_and_place_6d": _pick_and_place_6d_spec,
}

TASK_IDS = tuple(_TASK_FACTORIES)


def task_spec(task_id: str) -> TaskSpec:
    try:
        factory = _TASK_FACTORIES[task_id]
    except KeyError:
        raise ValueError(f"unknown task {task_id!r}; known tasks: {', '.join(TASK_IDS)}")
    return factory()


def compute_reward(achieved, desired, spec: TaskSpec):
    """Sparse reward: 1 iff the goal is met, 0 otherwise.

    Pure function of (achieved, desired), reusable for relabeling.  Accepts
    single goals or batches of rows and returns a float or a float array.
    The position test is on the closed boundary: error <= threshold.
    """
    achieved = np.asarray(achieved, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    if achieved.shape != desired.shape:
        raise ValueError(f"goal shape mismatch: {achieved.shape} vs {desired.shape}")
    if achieved.shape[-1] != spec.goal_dim:
        raise ValueError(f"expected goal dim {spec.goal_dim}, got {achieved.shape[-1]}")
    pos_err = np.linalg.norm(achieved[..., :3] - desired[..., :3], axis=-1)
    ok = pos_err <= spec.pos_threshold
    if spec.goal_dim > 3:
        ok = ok & (angular_error(achieved[..., 3:], desired[..., 3:]) <= spec.ang_threshold)
    result = np.asarray(ok, dtype=np.float64)
    return float(result) if result.ndim == 0 else result


class ManipulationEnv:
    """Step engine for one task; state lives in plain attributes.

    Tests and debugging tools may set the state attributes directly between
    steps; :meth:`step` only reads and rewrites them.
    """

    def __init__(self, spec: TaskSpec):
        self.spec = spec
        self._rng = np.random.default_rng()
        self.gripper_pos = np.zeros(3)
        self.gripper_euler = np.zeros(3)
        self.gripper_vel = np.zeros(3)
        self.finger = 0.0
        self.object_pos = np.zeros(3)
        self.object_euler = np.zeros(3)
        self.object_vel = np.zeros(3)
        self.object_rotvel = np.zeros(3)
        self.attached = False
        self._attach_euler_offset = np.zeros(3)
        self.goal = np.zeros(spec.goal_dim)
        self.step_count = 0

    # -- episode control ---------------------------------------------------

    def reset(self, seed: int) -> GoalObservation:
        """Sample a fresh initial state and goal from the seeded stream."""
        spec = self.spec
        rng = np.random.default_rng(seed)
        self._rng = rng
        self.gripper_pos = rng.uniform(spec.gripper_start_low, spec.gripper_start_high)
        self.gripper_euler = np.zeros(3)
        self.gripper_vel = np.zeros(3)
        self.finger = float(rng.uniform(0.0, FINGER_MAX)) if spec.has_finger else 0.0
        self.object_vel = np.zeros(3)
        self.object_rotvel = np.zeros(3)
        self.attached = False
        self._attach_euler_offset = np.zeros(3)
        self.step_count = 0
        if spec.has_object:
            self.object_pos = rng.uniform(spec.object_low, spec.object_high)
            yaw = rng.uniform(-np.pi / 2, np.pi / 2) if spec.has_rotation else 0.0
            self.object_euler = np.array([0.0, 0.0, yaw])
        else:
            self.object_pos = np.zeros(3)
            self.object_euler = np.zeros(3)
        # Resample until the episode does not start solved.
        while True:
            goal_pos = rng.uniform(spec.goal_low, spec.goal_high)
            anchor = self.object_pos if spec.has_object else self.gripper_pos
            if np.linalg.norm(goal_pos - anchor) > spec.pos_threshold + 0.01:
                break
        if spec.goal_dim == 6:
            goal_yaw = rng.uniform(-np.pi / 2, np.pi / 2)
            self.goal = np.concatenate([goal_pos, [0.0, 0.0, goal_yaw]])
        else:
            self.goal = goal_pos
        return self._observe()

    def step(self, action):
        """Advance one step; returns (obs, reward, terminated, truncated)."""
        spec = self.spec
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (spec.action_dim,):
            raise ValueError(
                f"action has shape {action.shape}, expected ({spec.action_dim},)")
        if not np.all(np.isfinite(action)):
            raise ValueError(f"action must be finite, got {action}")
        action = np.clip(action, -1.0, 1.0)

        prev_object_pos = self.object_pos.copy()
        prev_object_euler = self.object_euler.copy()

        # Free cube motion (slide momentum) happens before the gripper moves.
        if spec.slide_momentum and not self.attached:
            if np.linalg.norm(self.object_vel) > 0.0:
                self.object_pos = self._clamp_object(self.object_pos + self.object_vel)
                self.object_vel = SLIDE_DECAY * self.object_vel
                if np.linalg.norm(self.object_vel) < SLIDE_STOP:
                    self.object_vel = np.zeros(3)

        # Gripper motion from the scaled, clipped action channels.
        dpos = action[:3] * POSITION_STEP
        new_pos = np.clip(self.gripper_pos + dpos, spec.gripper_low, spec.gripper_high)
        self.gripper_vel = new_pos - self.gripper_pos
        self.gripper_pos = new_pos
        if spec.has_rotation:
            dang = action[3:6] * ANGLE_STEP
            self.gripper_euler = normalize_euler_angle(self.gripper_euler + dang)
        prev_finger = self.finger
        if spec.has_finger:
            finger_channel = action[6] if spec.has_rotation else action[3]
            self.finger = float(np.clip(self.finger + finger_channel * FINGER_STEP,
                                        0.0, FINGER_MAX))

        if spec.has_object:
            self._update_object(prev_finger)
            if not spec.slide_momentum:
                self.object_vel = self.object_pos - prev_object_pos
            self.object_rotvel = normalize_euler_angle(
                self.object_euler - prev_object_euler)

        self.step_count += 1
        obs = self._observe()
        reward = compute_reward(obs.achieved_goal, obs.desired_goal, spec)
        terminated = reward == 1.0
        truncated = self.step_count >= spec.max_episode_steps
        return obs, reward, terminated, truncated

    # -- object rules ------------------------------------------------------

    def _update_object(self, prev_finger):
        spec = self.spec
        if self.attached:
            if spec.has_finger and self.finger > FINGER_OPEN:
                # Release: the cube drops straight to the table.
                self.attached = False
                self.object_pos = self._clamp_object(
                    np.array([self.object_pos[0], self.object_pos[1], TABLE_Z]))
                self.object_vel = np.zeros(3)
            else:
                self.object_pos = self.gripper_pos.copy()
                if spec.has_rotation:
                    self.object_euler = normalize_euler_angle(
                        self.gripper_euler + self._attach_euler_offset)
            return

        # Attachment: fingers cross below the closed threshold while the
        # gripper is within the grasp radius and the cube actually sits
        # between the fingers (small planar offset); closing on a cube that
        # is off the finger axis knocks it instead of gripping it.
        if (spec.has_finger and prev_finger >= FINGER_CLOSED
                and self.finger < FINGER_CLOSED
                and np.linalg.norm(self.gripper_pos - self.object_pos) < GRASP_RADIUS
                and np.linalg.norm(self.gripper_pos[:2] - self.object_pos[:2])
                <= GRASP_ALIGN):
            self.attached = True
            self._attach_euler_offset = normalize_euler_angle(
                self.object_euler - self.gripper_euler)
            self.object_pos = self.gripper_pos.copy()
            self.object_vel = np.zeros(3)
            return

        # Overlap resolution: an effectively solid gripper near cube height
        # shoves the cube outward to the contact radius.  Fingers wider than
        # the cube side straddle it without touching, so "solid" means closed
        # below the cube width.
        fingers_solid = (not spec.has_finger) or self.finger < FINGER_CLOSED
        planar = self.object_pos[:2] - self.gripper_pos[:2]
        planar_dist = np.linalg.norm(planar)
        if (fingers_solid
                and CONTACT_MIN_OFFSET < planar_dist < CONTACT_RADIUS
                and abs(self.gripper_pos[2] - self.object_pos[2]) <= CONTACT_Z_WINDOW):
            target_xy = self.gripper_pos[:2] + planar / planar_dist * CONTACT_RADIUS
            before = self.object_pos.copy()
            moved = self.object_pos.copy()
            moved[:2] = target_xy
            self.object_pos = self._clamp_object(moved)
            if spec.slide_momentum:
                self.object_vel = self.object_pos - before

    def _clamp_object(self, pos):
        low = WORKSPACE_LOW + CUBE_HALF
        high = WORKSPACE_HIGH - CUBE_HALF
        return np.clip(pos, low, high)

    # -- observations ------------------------------------------------------

    def _achieved(self) -> np.ndarray:
        spec = self.spec
        if not spec.has_object:
            return self.gripper_pos.copy()
        if spec.goal_dim == 6:
            return np.concatenate([self.object_pos, self.object_euler])
        return self.object_pos.copy()

    def _observe(self) -> GoalObservation:
        spec = self.spec
        vec = np.zeros(spec.obs_dim)
        lay = spec.layout
        vec[lay["grip_pos"]] = self.gripper_pos
        vec[lay["grip_vel"]] = self.gripper_vel
        if "grip_euler" in lay:
            vec[lay["grip_euler"]] = self.gripper_euler
        if "finger" in lay:
            vec[lay["finger"]] = self.finger
        if spec.has_object:
            vec[lay["obj_pos"]] = self.object_pos
            vec[lay["obj_euler"]] = self.object_euler
            vec[lay["obj_vel"]] = self.object_vel
            vec[lay["obj_rotvel"]] = self.object_rotvel
        return GoalObservation(vec, self._achieved(), self.goal.copy())

    def state_dict(self) -> dict:
        """JSON-friendly snapshot of the mutable state, for trajectory dumps."""
        return {
            "gripper_pos": self.gripper_pos.tolist(),
            "gripper_euler": self.gripper_euler.tolist(),
            "finger": self.finger,
            "object_pos": self.object_pos.tolist(),
            "object_euler": self.object_euler.tolist(),
            "object_vel": self.object_vel.tolist(),
            "attached": self.attached,
            "goal": self.goal.tolist(),
            "step_count": self.step_count,
        }


def make_env(task_id: str) -> ManipulationEnv:
    """Instantiate an environment from the task registry."""
    return ManipulationEnv(task_spec(task_id))


def record_episode(env: ManipulationEnv, policy, seed: int):
    """Roll one episode with ``policy(obs) -> action``; returns step records."""
    obs = env.reset(seed)
    records = []
    while True:
        action = np.asarray(policy(obs), dtype=np.float64)
        state = env.state_dict()
        obs, reward, terminated, truncated = env.step(action)
        records.append({
            "step": state["step_count"],
            "state": state,
            "action": action.tolist(),
            "reward": reward,
        })
        if terminated or truncated:
            return records


def write_trajectory(path, records) -> None:
    """Dump step records as line-delimited JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
