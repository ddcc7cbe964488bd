"""Training orchestration: per-seed runs, checkpoints, resume and manifests.

Layout under ``run.output_dir``::

    manifest.json
    config.yaml
    seed_<s>/metrics.jsonl      one JSON line per iteration
    seed_<s>/curve.csv          iteration, env_steps, win_rate, il_accuracy (for plotting)
    seed_<s>/checkpoints/ckpt_<iter>.imaxnet (+ .json sidecar)
    seed_<s>/trainer_state.npz  latest full trainer state (+ .json), for --resume
    seed_<s>/eval.json          final evaluation
"""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..config import RunConfig, from_dict, make_game_from_config
from ..fnapprox.checkpoint import CheckpointError, load_nets, save_nets
from ..imitation.local import ImitatorNets
from ..marl.agent import AllyAgent
from ..marl.trainer import Trainer, TrainingError
from .evaluate import EvalResult, evaluate_winrate

log = logging.getLogger(__name__)

CURVE_FIELDS = ("iter", "env_steps", "win_rate", "il_accuracy", "actor_loss", "critic_loss")


@dataclass
class RunManifest:
    config_hash: str
    code_version: str
    seeds: list
    algorithm: str
    env: str
    difficulty: str
    started: str
    finished: str | None = None
    status: str = "running"  # running | complete | partial
    artifacts: list = field(default_factory=list)
    final: dict = field(default_factory=dict)  # seed -> eval result

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, root: Path) -> Path:
        path = root / "manifest.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        os.replace(tmp, path)
        return path

    @classmethod
    def read(cls, path) -> RunManifest:
        path = Path(path)
        if path.is_dir():
            path = path / "manifest.json"
        if not path.exists():
            raise FileNotFoundError(f"{path}: no manifest")
        return cls(**json.loads(path.read_text()))


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _checkpoint_meta(trainer: Trainer) -> dict:
    return {"config": trainer.cfg.to_dict(), "seed": trainer.seed, "iteration": trainer.iteration, "env_steps": trainer.env_steps}


def _learning_setup(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    return {k: d[k] for k in ("env", "algorithm", "ppo", "imitator")}


def save_checkpoint(trainer: Trainer, path) -> Path:
    path = Path(path)
    save_nets(path, trainer.nets(), _checkpoint_meta(trainer))
    return path


def save_trainer_state(trainer: Trainer, path) -> Path:
    """Full state (nets, optimizers, buffer, envs, RNGs); written atomically."""
    path = Path(path)
    arrays, meta = trainer.state_arrays()
    meta["config"] = trainer.cfg.to_dict()
    tmp = path.with_name(path.name + ".tmp.npz")
    np.savez_compressed(tmp, **arrays)
    os.replace(tmp, path)
    side = path.with_name(path.name + ".json")
    side_tmp = side.with_name(side.name + ".tmp")
    side_tmp.write_text(json.dumps(meta))
    os.replace(side_tmp, side)
    return path


def load_trainer_state(path) -> Trainer:
    path = Path(path)
    side = path.with_name(path.name + ".json")
    if not path.exists() or not side.exists():
        raise CheckpointError(f"{path}: trainer state or its sidecar is missing")
    meta = json.loads(side.read_text())
    trainer = Trainer(from_dict(meta["config"]), int(meta["seed"]))
    with np.load(path) as data:
        trainer.load_state_arrays({k: data[k] for k in data.files}, meta)
    return trainer


def load_policy_checkpoint(path) -> tuple[RunConfig, AllyAgent, dict]:
    nets, meta = load_nets(path)
    cfg = from_dict(meta["config"])
    game = make_game_from_config(cfg.env, cfg.ppo.gamma)
    imitator = ImitatorNets(nets["psi_Q"], nets["psi_pi"], game.spec.ally_action_count)
    return cfg, AllyAgent(game, nets["policy"], imitator, cfg.algorithm), meta


def evaluate_trainer(trainer: Trainer, episodes: int, deterministic: bool = False) -> EvalResult:
    return evaluate_winrate(trainer.game, trainer.agent, episodes, trainer.rngs["eval"], deterministic)


def _truncate_metrics(path: Path, iteration: int) -> None:
    if not path.exists():
        return
    keep = [line for line in path.read_text().splitlines() if line and json.loads(line)["iter"] <= iteration]
    path.write_text("".join(line + "\n" for line in keep))


def _rewrite_curve(metrics: Path, curve: Path) -> None:
    with curve.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_FIELDS)
        for line in metrics.read_text().splitlines():
            m = json.loads(line)
            w.writerow(["" if m.get(k) is None else m[k] for k in CURVE_FIELDS])


def train_seed(cfg: RunConfig, seed: int, seed_dir: Path, resume=None, deterministic_eval: bool = False) -> tuple[list[Path], EvalResult | None]:
    """Train one seed to ``run.total_steps``; returns the files written and the final evaluation."""
    seed_dir.mkdir(parents=True, exist_ok=True)
    ckpt_dir = seed_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    metrics = seed_dir / "metrics.jsonl"
    state_path = seed_dir / "trainer_state.npz"
    written: set[Path] = set()

    if resume is not None:
        trainer = load_trainer_state(resume)
        if _learning_setup(trainer.cfg) != _learning_setup(cfg):
            raise TrainingError(f"{resume} was written with different env/algorithm/ppo/imitator settings")
        trainer.cfg = cfg  # the run section (budget, outputs) may change on resume
        _truncate_metrics(metrics, trainer.iteration)
        log.info("seed %d: resumed at iteration %d", seed, trainer.iteration)
    else:
        trainer = Trainer(cfg, seed)
        metrics.write_text("")
        written.add(save_checkpoint(trainer, ckpt_dir / "ckpt_000000.imaxnet"))
        written.add(save_trainer_state(trainer, state_path))
    written.add(metrics)

    every = cfg.run.checkpoint_every
    try:
        with metrics.open("a") as fh:
            while trainer.env_steps < cfg.run.total_steps:
                m = trainer.train_iteration()
                fh.write(json.dumps(m) + "\n")
                fh.flush()
                if every and trainer.iteration % every == 0:
                    written.add(save_checkpoint(trainer, ckpt_dir / f"ckpt_{trainer.iteration:06d}.imaxnet"))
                    written.add(save_trainer_state(trainer, state_path))
    except BaseException as exc:
        # the last periodic trainer_state.npz stays as the resume point; an
        # iteration that died half way is not a consistent state to save
        if isinstance(exc, TrainingError):
            raise
        if isinstance(exc, KeyboardInterrupt):
            raise TrainingError(f"seed {seed}: interrupted at iteration {trainer.iteration}") from exc
        raise TrainingError(f"seed {seed}: {type(exc).__name__} at iteration {trainer.iteration}: {exc}") from exc

    written.add(save_checkpoint(trainer, ckpt_dir / f"ckpt_{trainer.iteration:06d}.imaxnet"))
    written.add(save_trainer_state(trainer, state_path))
    curve = seed_dir / "curve.csv"
    _rewrite_curve(metrics, curve)
    written.add(curve)

    result = None
    if trainer.iteration > 0:
        result = evaluate_trainer(trainer, cfg.run.eval_episodes, deterministic_eval)
        ev = seed_dir / "eval.json"
        ev.write_text(json.dumps({"seed": seed, "iteration": trainer.iteration, **result.to_dict()}, indent=2))
        written.add(ev)
    return sorted(written), result


def _files_under(path: Path) -> set[str]:
    return {str(p) for p in path.rglob("*") if p.is_file()}


def run_train(cfg: RunConfig, output_dir=None, resume=None, deterministic_eval: bool = False) -> RunManifest:
    """Train every seed in ``cfg.run.seeds``; ``resume`` is a trainer_state.npz (single seed) or a run directory."""
    root = Path(output_dir or cfg.run.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    cfg_path = root / "config.yaml"
    cfg_path.write_text(cfg.dump())
    manifest = RunManifest(
        config_hash=cfg.config_hash(),
        code_version=__version__,
        seeds=list(cfg.run.seeds),
        algorithm=cfg.algorithm,
        env=cfg.env.name,
        difficulty=cfg.env.difficulty,
        started=_now(),
        artifacts=[str(cfg_path)],
    )
    manifest.write(root)
    resume = Path(resume) if resume is not None else None
    try:
        for seed in cfg.run.seeds:
            seed_dir = root / f"seed_{seed}"
            state = None
            if resume is not None:
                state = resume if resume.is_file() else resume / f"seed_{seed}" / "trainer_state.npz"
                if resume.is_file() and len(cfg.run.seeds) > 1:
                    raise TrainingError("resuming from a single state file needs a single-seed config")
            _, result = train_seed(cfg, seed, seed_dir, state, deterministic_eval)
            manifest.artifacts = sorted(set(manifest.artifacts) | _files_under(seed_dir))
            if result is not None:
                manifest.final[str(seed)] = result.to_dict()
            manifest.write(root)
    except BaseException:
        manifest.status = "partial"
        manifest.finished = _now()
        for seed in cfg.run.seeds:
            seed_dir = root / f"seed_{seed}"
            if seed_dir.exists():
                manifest.artifacts = sorted(set(manifest.artifacts) | _files_under(seed_dir))
        manifest.write(root)
        raise
    manifest.status = "complete"
    manifest.finished = _now()
    manifest.artifacts = sorted(set(manifest.artifacts) | {str(root / "manifest.json")})
    manifest.write(root)
    return manifest
