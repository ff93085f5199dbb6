"""Run orchestration: executes an experiment arm over its seeds and writes artifacts.

Output directory layout (documented, stable):

    <out>/effective.cfg          full configuration with defaults merged
    <out>/metrics_seed<N>.csv    one evaluation row per stamp, per seed
    <out>/checkpoint_seed<N>.npz agent checkpoint (training arms only)
    <out>/summary.json           per-seed and aggregate results

Metrics files carry a one-line ``# key=value`` header followed by a CSV body;
floats are written with ``repr`` so identical runs produce identical bytes.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .config import ConfigError, ExperimentConfig, serialize_config
from .controllers import make_controller
from .envs import make_env
from .trainer import (EmaSeries, TrainingRun, arm_configs, build_eval_report,
                      evaluate, steps_to_threshold, METRIC_COLUMNS)

SUCCESS_THRESHOLD = 0.8


class RunFailure(RuntimeError):
    """A seed failed mid-run; partial artifacts are flagged incomplete."""


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics(path, rows, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(METRIC_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(row[c]) for c in METRIC_COLUMNS) + "\n")


def read_metrics(path):
    """Returns (meta dict, list of row dicts) for one metrics file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise RunFailure(f"cannot read metrics file {path}: {exc}") from exc
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise RunFailure(f"corrupt metrics file {path}: missing header")
    meta = {}
    for part in lines[0][2:].split():
        key, _, value = part.partition("=")
        meta[key] = value
    columns = lines[1].split(",")
    if columns != list(METRIC_COLUMNS):
        raise RunFailure(f"corrupt metrics file {path}: unexpected columns {columns}")
    rows = []
    for ln in lines[2:]:
        if not ln:
            continue
        cells = ln.split(",")
        if len(cells) != len(columns):
            raise RunFailure(f"corrupt metrics file {path}: bad row {ln!r}")
        row = {}
        for col, cell in zip(columns, cells):
            row[col] = int(cell) if col in ("env_step", "rl_buffer_size",
                                            "llm_buffer_size") else float(cell)
        rows.append(row)
    return meta, rows


def _controller_rows(cfg: ExperimentConfig, seed: int):
    """Evaluate the scripted controller in chunks so a series still exists."""
    env = make_env(cfg.task)
    ss = np.random.SeedSequence(seed)
    ctrl_ss, eval_ss = ss.spawn(2)
    controller = make_controller(cfg.task, noise_scale=cfg.controller_noise,
                                 seed=np.random.default_rng(ctrl_ss),
                                 variant=cfg.controller_variant)
    eval_rng = np.random.default_rng(eval_ss)
    ema = EmaSeries()
    rows = []
    remaining = cfg.controller_episodes
    episodes_done = 0
    successes = 0.0
    while remaining > 0:
        chunk = min(cfg.eval_episodes, remaining)
        raw = evaluate(controller.act, env, chunk, eval_rng)
        successes += raw * chunk
        episodes_done += chunk
        remaining -= chunk
        rows.append({
            "env_step": episodes_done * env.spec.max_episode_steps,
            "raw_success": raw,
            "ema_success": ema.update(raw),
            "p_llm": 1.0,
            "critic_loss": float("nan"),
            "q_term": float("nan"),
            "bc_term": float("nan"),
            "rl_buffer_size": 0,
            "llm_buffer_size": 0,
        })
    return rows, successes / episodes_done


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Execute all seeds of one arm; returns the summary dict.

    Raises :class:`ConfigError` before any work on invalid configuration and
    :class:`RunFailure` after flagging partial artifacts on mid-run errors.
    """
    cfg.validate()
    effective = cfg.resolved()
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "effective.cfg"), "w", encoding="utf-8") as fh:
        fh.write(serialize_config(effective))

    summary = {
        "task": effective.task,
        "arm": effective.arm,
        "seeds": list(effective.seeds),
        "threshold": SUCCESS_THRESHOLD,
        "per_seed": {},
        "incomplete": False,
    }
    per_seed_ema = {}
    env_steps = None
    try:
        for seed in effective.seeds:
            meta = {"task": effective.task, "arm": effective.arm, "seed": seed}
            metrics_path = os.path.join(out_dir, f"metrics_seed{seed}.csv")
            if effective.arm == "controller":
                rows, success = _controller_rows(effective, seed)
                write_metrics(metrics_path, rows, meta)
                emas = [r["ema_success"] for r in rows]
                summary["per_seed"][str(seed)] = {
                    "success": success,
                    "final_ema": emas[-1],
                    "best_ema": max(emas),
                    "steps_to_threshold": None,
                }
            else:
                agent_cfg, trainer_cfg = arm_configs(
                    effective.arm, effective.agent_config(),
                    effective.trainer_config())
                run = TrainingRun(
                    effective.task, seed, agent_cfg, trainer_cfg,
                    effective.her_config(), rl_capacity=effective.rl_capacity,
                    llm_capacity=effective.llm_capacity,
                    controller_noise=effective.controller_noise,
                    controller_variant=effective.controller_variant)
                rows = run.run()
                write_metrics(metrics_path, rows, meta)
                run.agent.save(os.path.join(out_dir, f"checkpoint_seed{seed}.npz"))
                stamps = [r["env_step"] for r in rows]
                emas = [r["ema_success"] for r in rows]
                per_seed_ema[seed] = emas
                if env_steps is None:
                    env_steps = stamps
                summary["per_seed"][str(seed)] = {
                    "final_ema": emas[-1],
                    "best_ema": max(emas),
                    "steps_to_threshold": steps_to_threshold(
                        stamps, emas, SUCCESS_THRESHOLD),
                }
    except (ConfigError, RunFailure):
        raise
    except Exception as exc:  # noqa: BLE001 - flag and surface any seed failure
        summary["incomplete"] = True
        summary["error"] = f"{type(exc).__name__}: {exc}"
        _write_summary(out_dir, summary)
        raise RunFailure(summary["error"]) from exc

    if effective.arm == "controller":
        successes = [summary["per_seed"][str(s)]["success"]
                     for s in effective.seeds]
        summary["aggregate"] = {
            "success_mean": float(np.mean(successes)),
            "success_min": float(np.min(successes)),
            "success_max": float(np.max(successes)),
        }
    else:
        report = build_eval_report(env_steps, per_seed_ema)
        summary["aggregate"] = {
            "final_ema_mean": float(report.mean[-1]),
            "final_ema_min": float(report.min[-1]),
            "final_ema_max": float(report.max[-1]),
            "steps_to_threshold_mean_curve": steps_to_threshold(
                report.env_steps, report.mean, SUCCESS_THRESHOLD),
        }
    _write_summary(out_dir, summary)
    return summary


def _write_summary(out_dir, summary: dict) -> None:
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
