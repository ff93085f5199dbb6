"""Experiment configuration: flat key-value sections, strictly validated.

The file format is INI-style with four sections (``run``, ``agent``,
``mixing``, ``her``).  Unknown sections or keys are rejected, every value is
type-checked, and :func:`serialize_config` emits a canonical form so that
parse -> serialize is a stable round trip.  ``gamma`` and ``lambda_annl``
default to ``auto``, which resolves per task family: 0.975 / 0.99995 for the
position-only tasks and 0.96 / 0.999999 for the 6-DoF task.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from .agent import AgentConfig
from .envs import TASK_IDS
from .replay import HerConfig
from .trainer import TrainerConfig

ARMS = ("rlingua", "td3", "controller")

# Task-family defaults used when a field is "auto".
_FAMILY_DEFAULTS = {
    "gamma": {"default": 0.975, "pick_and_place_6d": 0.96},
    "lambda_annl": {"default": 0.99995, "pick_and_place_6d": 0.999999},
}


class ConfigError(ValueError):
    """Invalid configuration file, key, or value."""


def _parse_int(s):
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"expected an integer, got {s!r}")


def _parse_float(s):
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"expected a number, got {s!r}")


def _parse_auto_float(s):
    if s == "auto":
        return None
    return _parse_float(s)


def _parse_int_list(s):
    items = [p.strip() for p in str(s).split(",") if p.strip()]
    if not items:
        raise ConfigError(f"expected a comma-separated integer list, got {s!r}")
    return tuple(_parse_int(p) for p in items)


def _fmt(value):
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentConfig:
    # [run]
    task: str = "reach"
    arm: str = "rlingua"
    total_steps: int = 50_000
    seeds: tuple = (0, 1, 2, 3)
    controller_episodes: int = 100
    controller_noise: float = 0.0
    controller_variant: str = "default"
    eval_every: int = 2000
    eval_episodes: int = 20
    warmup_steps: int = 1000
    grad_steps_per_env_step: int = 1
    # [agent]
    gamma: float | None = None
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
    # [mixing]
    p0: float = 0.25
    lambda_annl: float | None = None
    # [her]
    her_k: int = 4
    her_strategy: str = "future"
    rl_capacity: int = 1_000_000
    llm_capacity: int = 1_000_000

    # -- derived views -----------------------------------------------------

    def resolved(self) -> "ExperimentConfig":
        """Concrete copy with task-family defaults filled in."""
        updates = {}
        for name, table in _FAMILY_DEFAULTS.items():
            if getattr(self, name) is None:
                updates[name] = table.get(self.task, table["default"])
        return dataclasses.replace(self, **updates) if updates else self

    def validate(self) -> None:
        if self.task not in TASK_IDS:
            raise ConfigError(
                f"unknown task {self.task!r}; known tasks: {', '.join(TASK_IDS)}")
        if self.arm not in ARMS:
            raise ConfigError(f"unknown arm {self.arm!r}; known arms: {', '.join(ARMS)}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.controller_episodes < 1:
            raise ConfigError("controller_episodes must be >= 1")
        if self.controller_noise < 0:
            raise ConfigError("controller_noise must be >= 0")
        try:
            self.agent_config()
            self.trainer_config()
            self.her_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def agent_config(self) -> AgentConfig:
        r = self.resolved()
        return AgentConfig(
            gamma=r.gamma, tau=r.tau, policy_delay=r.policy_delay,
            lambda_im=r.lambda_im, target_noise_sigma=r.target_noise_sigma,
            target_noise_clip=r.target_noise_clip,
            exploration_noise_sigma=r.exploration_noise_sigma,
            batch_size=r.batch_size, actor_lr=r.actor_lr, critic_lr=r.critic_lr,
            hidden_sizes=tuple(r.hidden_sizes),
        )

    def trainer_config(self) -> TrainerConfig:
        r = self.resolved()
        return TrainerConfig(
            total_steps=r.total_steps, p0=r.p0, lambda_annl=r.lambda_annl,
            warmup_steps=r.warmup_steps,
            grad_steps_per_env_step=r.grad_steps_per_env_step,
            eval_every=r.eval_every, eval_episodes=r.eval_episodes,
        )

    def her_config(self) -> HerConfig:
        return HerConfig(strategy=self.her_strategy, k=self.her_k)


# section -> [(key in file, attribute, parser)]
_SCHEMA = {
    "run": [
        ("task", "task", str),
        ("arm", "arm", str),
        ("total_steps", "total_steps", _parse_int),
        ("seeds", "seeds", _parse_int_list),
        ("controller_episodes", "controller_episodes", _parse_int),
        ("controller_noise", "controller_noise", _parse_float),
        ("controller_variant", "controller_variant", str),
        ("eval_every", "eval_every", _parse_int),
        ("eval_episodes", "eval_episodes", _parse_int),
        ("warmup_steps", "warmup_steps", _parse_int),
        ("grad_steps_per_env_step", "grad_steps_per_env_step", _parse_int),
    ],
    "agent": [
        ("gamma", "gamma", _parse_auto_float),
        ("tau", "tau", _parse_float),
        ("policy_delay", "policy_delay", _parse_int),
        ("lambda_im", "lambda_im", _parse_float),
        ("target_noise_sigma", "target_noise_sigma", _parse_float),
        ("target_noise_clip", "target_noise_clip", _parse_float),
        ("exploration_noise_sigma", "exploration_noise_sigma", _parse_float),
        ("batch_size", "batch_size", _parse_int),
        ("actor_lr", "actor_lr", _parse_float),
        ("critic_lr", "critic_lr", _parse_float),
        ("hidden_sizes", "hidden_sizes", _parse_int_list),
    ],
    "mixing": [
        ("p0", "p0", _parse_float),
        ("lambda_annl", "lambda_annl", _parse_auto_float),
    ],
    "her": [
        ("k", "her_k", _parse_int),
        ("strategy", "her_strategy", str),
        ("rl_capacity", "rl_capacity", _parse_int),
        ("llm_capacity", "llm_capacity", _parse_int),
    ],
}

_KEY_INDEX = {}
for _section, _entries in _SCHEMA.items():
    for _key, _attr, _conv in _entries:
        _KEY_INDEX[f"{_section}.{_key}"] = (_attr, _conv)
        # Bare keys are unique across sections, so both spellings work.
        _KEY_INDEX[_key] = (_attr, _conv)


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        known = {key: (attr, conv) for key, attr, conv in _SCHEMA[section]}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            attr, conv = known[key]
            try:
                setattr(cfg, attr, conv(raw))
            except ConfigError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form: fixed section and key order, full key set."""
    out = io.StringIO()
    for section, entries in _SCHEMA.items():
        out.write(f"[{section}]\n")
        for key, attr, _conv in entries:
            out.write(f"{key} = {_fmt(getattr(cfg, attr))}\n")
        out.write("\n")
    return out.getvalue()


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply ``key=value`` strings; keys may be bare or section-qualified."""
    cfg = dataclasses.replace(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _KEY_INDEX:
            raise ConfigError(f"unknown override key {key!r}")
        attr, conv = _KEY_INDEX[key]
        try:
            setattr(cfg, attr, conv(raw.strip()))
        except ConfigError as exc:
            raise ConfigError(f"override {key}: {exc}") from exc
    return cfg
