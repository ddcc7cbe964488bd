from __future__ import annotations

import pytest

from imaxppo.config import ConfigError, RunConfig, from_dict, load_config, make_game_from_config, parse_config
from imaxppo.envs import ChainGame, GridMiner


def test_empty_text_gives_defaults():
    assert parse_config("") == RunConfig()


def test_roundtrip_through_dump():
    cfg = parse_config("algorithm: zero_mask\nppo: {gamma: 0.9, hidden: [8, 8]}\n")
    again = parse_config(cfg.dump())
    assert again == cfg
    assert from_dict(cfg.to_dict()) == cfg
    assert again.config_hash() == cfg.config_hash()
    assert parse_config("").config_hash() != cfg.config_hash()


def test_unknown_key_reports_line_and_column():
    with pytest.raises(ConfigError, match=r"<string>:3:3: unknown key 'gama'"):
        parse_config("ppo:\n  lr_actor: 0.001\n  gama: 0.9\n")
    with pytest.raises(ConfigError, match="unknown key 'extra'"):
        parse_config("extra: 1\n")


@pytest.mark.parametrize(
    "text",
    [
        "ppo: {gamma: 1.0}",
        "ppo: {gamma: 0}",
        "ppo: {clip_ratio: 0}",
        "ppo: {rollout_length: 10, workers: 3}",
        "ppo: {lr_actor: -1}",
        "ppo: {lr_actor: .nan}",
        "ppo: {hidden: [0]}",
        "algorithm: dqn",
        "env: {name: maze}",
        "env: {radius: -1}",
        "imitator: {critic_value: other}",
        "imitator: {q_anchor: -0.1}",
        "run: {seeds: []}",
        "run: {eval_episodes: 0}",
        "ppo: {workers: two}",
        "ppo: {workers: 2.5}",
        "ppo: {layer_norm: 1}",
        "ppo: 3",
        "[1, 2]",
        "ppo: {gamma: 0.9, gamma: 0.8}",
        "ppo: {a: [}",
    ],
)
def test_invalid_configs_are_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_int_accepted_for_float_fields():
    assert parse_config("ppo: {lr_actor: 1}").ppo.lr_actor == 1.0


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")


def test_game_factory():
    cfg = parse_config("env: {name: chain, n_positions: 6, enemy_script: noisy}\nppo: {gamma: 0.9}")
    g = make_game_from_config(cfg.env, cfg.ppo.gamma)
    assert isinstance(g, ChainGame) and g.spec.gamma == 0.9
    assert isinstance(make_game_from_config(RunConfig().env, 0.99), GridMiner)
