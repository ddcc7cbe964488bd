"""Ally-side acting: imitator prediction in the loop, then the augmented policy.

Rows are ordered env-major: row ``e * n_allies + i`` is ally ``i`` of env ``e``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fnapprox import ParamNet
from ..game import MarkovGame
from ..imitation.local import ImitatorNets, predict_joint_atoms
from .ppo import masked_probs, sample_actions

MODES = ("imax_ppo", "mappo_baseline", "zero_mask")


def aug_width(game: MarkovGame) -> int:
    return game.spec.n_enemies * game.n_atoms


def augment_input(obs: np.ndarray, slot_atoms: np.ndarray, obs_present: np.ndarray, n_atoms: int) -> np.ndarray:
    """obs ++ per-slot (one-hot over the move atoms, presence flag).

    A slot predicted to vanish, or absent from the observation, is all
    zeros. Predictions for a slot the observation does not show are
    rejected.
    """
    obs = np.atleast_2d(obs)
    slot_atoms = np.atleast_2d(slot_atoms)
    obs_present = np.atleast_2d(obs_present)
    if slot_atoms.shape != obs_present.shape or len(slot_atoms) != len(obs):
        raise ValueError(f"slot misalignment: atoms {slot_atoms.shape}, presence {obs_present.shape}, obs {obs.shape}")
    vanish = n_atoms - 1
    shown = slot_atoms != vanish
    if np.any(shown & ~obs_present):
        raise ValueError("slot misalignment: prediction for an enemy outside the neighborhood")
    R, M = slot_atoms.shape
    block = np.zeros((R, M, n_atoms))
    rows, slots = np.nonzero(shown)
    block[rows, slots, slot_atoms[rows, slots]] = 1.0
    block[:, :, vanish] = shown
    return np.concatenate([obs, block.reshape(R, M * n_atoms)], axis=1)


def policy_width(game: MarkovGame) -> int:
    return 2 * game.observation_width + aug_width(game) + game.spec.n_allies


def value_width(game: MarkovGame) -> int:
    return game.state_width + game.spec.n_allies


@dataclass
class Features:
    obs: np.ndarray  # (R, W)
    prev: np.ndarray  # (R, W)
    action_mask: np.ndarray  # (R, Ka)
    atom_mask: np.ndarray  # (R, J)
    present: np.ndarray  # (R, M)
    agent: np.ndarray  # (R,)
    onehot: np.ndarray  # (R, N)


def gather_features(game: MarkovGame, states, prevs) -> Features:
    n = game.spec.n_allies
    obs, am, jm, pres = [], [], [], []
    for s in states:
        for i in range(n):
            obs.append(game.observation_vector(s, i))
            am.append(game.action_mask(s, i))
            jm.append(game.atom_mask(s, i))
            pres.append(game.observe(s, i).enemy_present)
    R = len(states) * n
    agent = np.tile(np.arange(n), len(states))
    return Features(
        obs=np.stack(obs),
        prev=np.concatenate(prevs).reshape(R, -1),
        action_mask=np.stack(am),
        atom_mask=np.stack(jm),
        present=np.stack(pres),
        agent=agent,
        onehot=np.eye(n)[agent],
    )


def state_inputs(game: MarkovGame, states) -> np.ndarray:
    n = game.spec.n_allies
    enc = np.stack([game.encode_state(s) for s in states])
    return np.concatenate([np.repeat(enc, n, axis=0), np.tile(np.eye(n), (len(states), 1))], axis=1)


@dataclass
class AllyAgent:
    game: MarkovGame
    policy: ParamNet
    imitator: ImitatorNets | None = None
    mode: str = "imax_ppo"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode != "mappo_baseline" and self.imitator is None:
            raise ValueError(f"mode {self.mode} needs an imitator")

    def policy_input(self, f: Features, aug: np.ndarray) -> np.ndarray:
        return np.concatenate([f.obs, f.prev, aug, f.onehot], axis=1)

    def decide(self, f: Features, rngs, im_rng, deterministic=False, prediction="sample", draw_actions=True) -> dict:
        """Actions for every row.

        ``rngs`` holds one action stream per env; the imitator's draws
        (first-pass action and predicted atoms) come only from ``im_rng`` so
        that the zero-mask arm consumes exactly the baseline's action draws.
        """
        R = len(f.obs)
        n = self.game.spec.n_allies
        K = self.game.n_atoms
        zeros = np.zeros((R, aug_width(self.game)))
        joint = None
        if self.mode == "mappo_baseline":
            aug = zeros
        else:
            p0 = masked_probs(self.policy.forward(self.policy_input(f, zeros)), f.action_mask)
            first = np.argmax(p0, axis=1) if deterministic else sample_actions(p0, im_rng)
            pred_mode = "mode" if deterministic else prediction
            joint = predict_joint_atoms(self.imitator, f.obs, first, f.atom_mask, pred_mode, im_rng)
            if self.mode == "imax_ppo":
                atoms = self.game.split_joint_atom(joint)
                aug = augment_input(np.zeros((R, 0)), atoms, f.present, K)
            else:
                aug = zeros
        x = self.policy_input(f, aug)
        probs = masked_probs(self.policy.forward(x), f.action_mask)
        if not draw_actions:
            return {"x": x, "probs": probs, "joint": joint}
        if deterministic:
            actions = np.argmax(probs, axis=1)
        else:
            actions = np.concatenate([sample_actions(probs[e * n : (e + 1) * n], rngs[e]) for e in range(R // n)])
        logp = np.log(probs[np.arange(R), actions])
        return {"x": x, "probs": probs, "actions": actions, "logp": logp, "joint": joint}


@dataclass
class RandomAgent:
    """Uniform over the valid actions; used as a reference policy."""

    game: MarkovGame

    def decide(self, f: Features, rngs, im_rng, deterministic=False, prediction="sample", draw_actions=True) -> dict:
        probs = f.action_mask / f.action_mask.sum(axis=1, keepdims=True)
        n = self.game.spec.n_allies
        actions = np.concatenate([sample_actions(probs[e * n : (e + 1) * n], rngs[e]) for e in range(len(probs) // n)])
        return {"probs": probs, "actions": actions}
