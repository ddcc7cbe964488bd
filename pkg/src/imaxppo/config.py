"""Run configuration: nested YAML sections, strict keys, validated defaults.

Every key is optional; an empty file yields the defaults below. Unknown
keys are rejected with their line and column.

    env:        which game and its layout/difficulty knobs
    algorithm:  imax_ppo | mappo_baseline | zero_mask
    ppo:        PPO / MAPPO hyperparameters (actor and critic)
    imitator:   next-enemy-state imitator
    run:        budget, evaluation, seeds, output and checkpoint cadence
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

ALGORITHMS = ("imax_ppo", "mappo_baseline", "zero_mask")


class ConfigError(ValueError):
    pass


@dataclass
class EnvConfig:
    name: str = "gridminer"  # gridminer | chain
    difficulty: str = "easy"  # gridminer enemies: easy | hard | random
    width: int = 8
    height: int = 8
    n_allies: int = 2
    n_enemies: int = 2
    gold_total: int = 12
    n_piles: int = 4
    horizon: int = 40
    radius: int = 3
    layout_seed: int | None = None  # None: a fresh layout every episode
    symmetric: bool = False
    n_positions: int = 8  # chain only
    enemy_script: str = "greedy"  # chain only: greedy | uniform | noisy


@dataclass
class PpoConfig:
    lr_actor: float = 5e-4
    lr_critic: float = 5e-4
    adam_eps: float = 1e-5
    weight_decay: float = 0.0
    clip_ratio: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    mini_epochs: int = 5
    minibatch_count: int = 1
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 10.0
    rollout_length: int = 1024  # env steps per iteration, summed over workers
    workers: int = 4
    hidden: list = field(default_factory=lambda: [64, 64])
    layer_norm: bool = False
    gain: float = 0.01  # orthogonal gain of the policy output layer
    value_norm: bool = True
    advantage_norm: bool = True


@dataclass
class ImitatorConfig:
    buffer_capacity: int = 100_000
    lr_q: float = 5e-4
    lr_pi: float = 5e-4
    batch_size: int = 256
    updates_per_iter: int = 5
    hidden: list = field(default_factory=lambda: [64, 64])
    train_prediction: str = "sample"  # sample | mode
    max_grad_norm: float = 10.0
    q_anchor: float = 0.01
    critic_value: str = "soft"  # soft | actor


@dataclass
class RunSection:
    total_steps: int = 200_000
    eval_episodes: int = 32
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "runs/default"
    checkpoint_every: int = 50


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    algorithm: str = "imax_ppo"
    ppo: PpoConfig = field(default_factory=PpoConfig)
    imitator: ImitatorConfig = field(default_factory=ImitatorConfig)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


SECTIONS = {"env": EnvConfig, "ppo": PpoConfig, "imitator": ImitatorConfig, "run": RunSection}


def _where(node, source) -> str:
    m = node.start_mark
    return f"{source}:{m.line + 1}:{m.column + 1}"


def _check_type(value, default, name, where):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int) and not isinstance(default, bool):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:  # Optional[int]
        ok = value is None or (isinstance(value, int) and not isinstance(value, bool))
    if not ok:
        raise ConfigError(f"{where}: {name} has the wrong type ({type(value).__name__})")
    return value


def _build_section(cls, node, source, section):
    if not isinstance(node, yaml.MappingNode):
        raise ConfigError(f"{_where(node, source)}: section '{section}' must be a mapping")
    obj = cls()
    known = {f.name for f in dataclasses.fields(cls)}
    seen = set()
    for k_node, v_node in node.value:
        key = k_node.value
        if key not in known:
            raise ConfigError(f"{_where(k_node, source)}: unknown key '{key}' in section '{section}'")
        if key in seen:
            raise ConfigError(f"{_where(k_node, source)}: duplicate key '{key}' in section '{section}'")
        seen.add(key)
        value = yaml.safe_load(yaml.serialize(v_node))
        setattr(obj, key, _check_type(value, getattr(obj, key), f"{section}.{key}", _where(v_node, source)))
    return obj


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{loc}: parse error: {getattr(exc, 'problem', exc)}") from None
    cfg = RunConfig()
    if root is None:
        return validate(cfg)
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError(f"{_where(root, source)}: top level must be a mapping")
    seen = set()
    for k_node, v_node in root.value:
        key = k_node.value
        if key in seen:
            raise ConfigError(f"{_where(k_node, source)}: duplicate section '{key}'")
        seen.add(key)
        if key in SECTIONS:
            setattr(cfg, key, _build_section(SECTIONS[key], v_node, source, key))
        elif key == "algorithm":
            cfg.algorithm = _check_type(yaml.safe_load(yaml.serialize(v_node)), "", "algorithm", _where(v_node, source))
        else:
            raise ConfigError(f"{_where(k_node, source)}: unknown key '{key}'")
    return validate(cfg)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{path}: no such file")
    return parse_config(path.read_text(), str(path))


def from_dict(data: dict) -> RunConfig:
    return parse_config(yaml.safe_dump(data), "<dict>")


def validate(cfg: RunConfig) -> RunConfig:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    p, e, im, r = cfg.ppo, cfg.env, cfg.imitator, cfg.run
    need(cfg.algorithm in ALGORITHMS, f"algorithm must be one of {ALGORITHMS}")
    need(e.name in ("gridminer", "chain"), "env.name must be gridminer or chain")
    need(e.difficulty in ("easy", "hard", "random"), "env.difficulty must be easy, hard or random")
    need(e.enemy_script in ("greedy", "uniform", "noisy"), "env.enemy_script must be greedy, uniform or noisy")
    for name in ("width", "height", "n_allies", "n_enemies", "gold_total", "n_piles", "horizon", "n_positions"):
        need(getattr(e, name) >= 1, f"env.{name} must be >= 1")
    need(e.radius >= 0, "env.radius must be >= 0")
    need(0.0 < p.gamma < 1.0, "gamma must be in (0,1)")
    need(0.0 <= p.gae_lambda <= 1.0, "gae_lambda must be in [0,1]")
    need(0.0 < p.clip_ratio < 1.0, "clip_ratio must be in (0,1)")
    for name in ("lr_actor", "lr_critic", "adam_eps", "weight_decay", "entropy_coef", "value_coef", "max_grad_norm", "gain"):
        v = getattr(p, name)
        need(math.isfinite(v) and v >= 0, f"ppo.{name} must be finite and >= 0")
    need(p.adam_eps > 0, "ppo.adam_eps must be > 0")
    for name in ("mini_epochs", "minibatch_count", "rollout_length", "workers"):
        need(getattr(p, name) >= 1, f"ppo.{name} must be >= 1")
    need(p.rollout_length % p.workers == 0, "ppo.rollout_length must be a multiple of ppo.workers")
    for section, hidden in (("ppo", p.hidden), ("imitator", im.hidden)):
        need(all(isinstance(h, int) and h >= 1 for h in hidden), f"{section}.hidden must list positive widths")
    for name in ("lr_q", "lr_pi", "max_grad_norm", "q_anchor"):
        v = getattr(im, name)
        need(math.isfinite(v) and v >= 0, f"imitator.{name} must be finite and >= 0")
    need(im.buffer_capacity >= 1 and im.batch_size >= 1 and im.updates_per_iter >= 0, "imitator sizes must be positive")
    need(im.train_prediction in ("sample", "mode"), "imitator.train_prediction must be sample or mode")
    need(im.critic_value in ("soft", "actor"), "imitator.critic_value must be soft or actor")
    need(r.total_steps >= 0, "run.total_steps must be >= 0")
    need(r.eval_episodes >= 1, "run.eval_episodes must be >= 1")
    need(r.checkpoint_every >= 1, "run.checkpoint_every must be >= 1")
    need(len(r.seeds) >= 1 and all(isinstance(s, int) and s >= 0 for s in r.seeds), "run.seeds must list nonnegative integers")
    return cfg


def make_game_from_config(env: EnvConfig, gamma: float):
    from .envs import ChainGame, ChainGameSpec, GridMiner, GridMinerSpec

    if env.name == "chain":
        return ChainGame(ChainGameSpec(n_positions=env.n_positions, horizon=env.horizon, gamma=gamma, enemy_script=env.enemy_script))
    return GridMiner(
        GridMinerSpec(
            width=env.width,
            height=env.height,
            n_allies=env.n_allies,
            n_enemies=env.n_enemies,
            gold_total=env.gold_total,
            n_piles=env.n_piles,
            horizon=env.horizon,
            radius=env.radius,
            gamma=gamma,
            difficulty=env.difficulty,
            layout_seed=env.layout_seed,
            symmetric=env.symmetric,
        )
    )
