"""Competitive Markov game abstraction.

Scripted enemies are folded into the environment: a game supplies a
deterministic ``dynamics`` function for a full (ally, enemy) joint action and
an ``enemy_distribution`` over joint enemy actions, and this module turns the
pair into the ally-only transition kernel P(S' | S, A).
"""

from __future__ import annotations

import abc
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels


class GameError(ValueError):
    """Invalid call into a game (bad action, terminal state, bad index)."""


class UnsupportedOperationError(RuntimeError):
    """The operation needs an enumerable state space."""


@dataclass(frozen=True)
class GameSpec:
    n_allies: int
    n_enemies: int
    ally_action_count: int
    enumerable: bool
    horizon: int
    gamma: float
    neighborhood_radius: int

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0,1)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for name in ("n_allies", "n_enemies", "ally_action_count"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.neighborhood_radius < 0:
            raise ValueError("neighborhood_radius must be >= 0")

    @property
    def joint_action_count(self) -> int:
        return self.ally_action_count**self.n_allies


@dataclass(frozen=True, eq=False)
class GlobalState:
    """Full game state.

    ``allies`` / ``enemies`` hold one integer local-state row per agent; the
    first two columns (or one, in 1-D games) are the agent's position.
    ``env`` carries environment scalars (e.g. a flattened gold map).
    """

    allies: np.ndarray
    enemies: np.ndarray
    env: np.ndarray
    step: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def key(self) -> tuple:
        return (
            tuple(self.allies.ravel().tolist()),
            tuple(self.enemies.ravel().tolist()),
            tuple(self.env.ravel().tolist()),
        )

    def __eq__(self, other):
        if not isinstance(other, GlobalState):
            return NotImplemented
        return self.step == other.step and self.key() == other.key()

    def __hash__(self):
        return hash((self.key(), self.step))


@dataclass(frozen=True, eq=False)
class Observation:
    """One ally's neighborhood-limited view; masked slots hold zeros."""

    agent: int
    self_state: np.ndarray
    ally_present: np.ndarray
    ally_states: np.ndarray
    enemy_present: np.ndarray
    enemy_states: np.ndarray
    context: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __eq__(self, other):
        if not isinstance(other, Observation):
            return NotImplemented
        return self.agent == other.agent and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("self_state", "ally_present", "ally_states", "enemy_present", "enemy_states", "context")
        )


@dataclass(frozen=True, eq=False)
class Transition:
    state: GlobalState
    action: tuple
    next_state: GlobalState
    rewards: np.ndarray
    observations: list
    next_observations: list
    # per ally: (enemy present in N(i) before the step, next local state rows)
    enemy_next_present: np.ndarray
    enemy_next_states: np.ndarray
    enemy_atoms: np.ndarray
    enemy_action: tuple
    terminal: bool

    def __eq__(self, other):
        if not isinstance(other, Transition):
            return NotImplemented
        return (
            self.state == other.state
            and self.action == other.action
            and self.next_state == other.next_state
            and np.array_equal(self.rewards, other.rewards)
            and self.observations == other.observations
            and self.next_observations == other.next_observations
            and np.array_equal(self.enemy_next_present, other.enemy_next_present)
            and np.array_equal(self.enemy_next_states, other.enemy_next_states)
            and np.array_equal(self.enemy_atoms, other.enemy_atoms)
            and self.enemy_action == other.enemy_action
            and self.terminal == other.terminal
        )


class MarkovGame(abc.ABC):
    """Base class for games with scripted enemies.

    Subclasses implement the deterministic environment response to a full
    joint action, the enemy script, and the feature encoders.
    """

    spec: GameSpec
    #: names of the relative-move atoms for enemy next-state prediction;
    #: the last atom is always "vanish" (slot masked before the step).
    atom_names: tuple = ()
    #: displacement of each non-vanish atom, same dimension as positions
    atom_moves: tuple = ()

    # --- to implement -------------------------------------------------
    @abc.abstractmethod
    def reset(self, rng: np.random.Generator) -> GlobalState: ...

    @abc.abstractmethod
    def enemy_distribution(self, state: GlobalState) -> list[tuple[tuple, float]]:
        """Joint enemy actions with their probabilities under the script."""

    @abc.abstractmethod
    def dynamics(self, state: GlobalState, ally_action: tuple, enemy_action: tuple) -> tuple[GlobalState, np.ndarray]:
        """Deterministic next state (step index advanced) and per-ally rewards."""

    @abc.abstractmethod
    def encode_observation(self, obs: Observation) -> np.ndarray: ...

    @abc.abstractmethod
    def encode_state(self, state: GlobalState) -> np.ndarray: ...

    def context(self, state: GlobalState, agent: int) -> np.ndarray:
        return np.zeros(0)

    def position_dims(self) -> int:
        return 2

    def action_mask(self, state: GlobalState, agent: int) -> np.ndarray:
        return np.ones(self.spec.ally_action_count, dtype=bool)

    def position_in_bounds(self, pos: np.ndarray) -> bool:
        return True

    # --- shared machinery ---------------------------------------------
    @property
    def n_atoms(self) -> int:
        return len(self.atom_names)

    @property
    def vanish_atom(self) -> int:
        return self.n_atoms - 1

    def win_check(self, state: GlobalState) -> str:
        raise UnsupportedOperationError(f"{type(self).__name__} defines no episode outcome")

    def is_terminal(self, state: GlobalState) -> bool:
        return state.step >= self.spec.horizon

    def _others(self, agent: int) -> list[int]:
        return [k for k in range(self.spec.n_allies) if k != agent]

    def visible(self, state: GlobalState, agent: int) -> tuple[np.ndarray, np.ndarray]:
        """(ally mask over the other allies, enemy mask) for ally ``agent``."""
        key = ("visible", agent)
        hit = state._cache.get(key)
        if hit is not None:
            return hit
        r = self.spec.neighborhood_radius
        d = self.position_dims()
        centre = state.allies[agent, :d]
        ally_vis = _kernels.chebyshev_visible(centre, state.allies[self._others(agent), :d], r)
        enemy_vis = _kernels.chebyshev_visible(centre, state.enemies[:, :d], r)
        out = (np.asarray(ally_vis, dtype=bool), np.asarray(enemy_vis, dtype=bool))
        state._cache[key] = out
        return out

    def observe(self, state: GlobalState, agent: int) -> Observation:
        if not 0 <= agent < self.spec.n_allies:
            raise GameError(f"agent index {agent} out of range [0, {self.spec.n_allies})")
        hit = state._cache.get(("obs", agent))
        if hit is not None:
            return hit
        ally_vis, enemy_vis = self.visible(state, agent)
        others = self._others(agent)
        ally_states = np.where(ally_vis[:, None], state.allies[others], 0)
        enemy_states = np.where(enemy_vis[:, None], state.enemies, 0)
        obs = state._cache[("obs", agent)] = Observation(
            agent=agent,
            self_state=state.allies[agent].copy(),
            ally_present=ally_vis,
            ally_states=ally_states,
            enemy_present=enemy_vis,
            enemy_states=enemy_states,
            context=self.context(state, agent),
        )
        return obs

    def observation_vector(self, state: GlobalState, agent: int) -> np.ndarray:
        key = ("obs_vec", agent)
        hit = state._cache.get(key)
        if hit is None:
            hit = self.encode_observation(self.observe(state, agent))
            state._cache[key] = hit
        return hit

    @property
    def observation_width(self) -> int:
        probe = self.reset(np.random.default_rng(0))
        return len(self.observation_vector(probe, 0))

    @property
    def state_width(self) -> int:
        probe = self.reset(np.random.default_rng(0))
        return len(self.encode_state(probe))

    def move_atom(self, before: np.ndarray, after: np.ndarray) -> int:
        delta = tuple(int(x) for x in (after[: self.position_dims()] - before[: self.position_dims()]))
        return self.atom_moves.index(delta)

    def apply_atom(self, enemy_state: np.ndarray, atom: int) -> np.ndarray:
        out = np.array(enemy_state, copy=True)
        if atom != self.vanish_atom:
            move = np.asarray(self.atom_moves[atom])
            out[: self.position_dims()] = out[: self.position_dims()] + move
        return out

    @property
    def n_joint_atoms(self) -> int:
        return self.n_atoms**self.spec.n_enemies

    def joint_atom_index(self, atoms) -> int:
        return int(np.ravel_multi_index(tuple(int(a) for a in atoms), (self.n_atoms,) * self.spec.n_enemies))

    def split_joint_atom(self, index) -> np.ndarray:
        """Per-slot atoms of joint atom ``index`` (scalar or array) along the last axis."""
        return np.stack(np.unravel_index(np.asarray(index), (self.n_atoms,) * self.spec.n_enemies), axis=-1)

    def slot_atom_mask(self, obs: Observation) -> np.ndarray:
        """(n_enemies, n_atoms) feasibility: absent slots may only vanish;
        present slots may take any in-bounds move."""
        d = self.position_dims()
        out = np.zeros((self.spec.n_enemies, self.n_atoms), dtype=bool)
        for j in range(self.spec.n_enemies):
            if not obs.enemy_present[j]:
                out[j, self.vanish_atom] = True
                continue
            pos = obs.enemy_states[j, :d]
            for k, move in enumerate(self.atom_moves):
                out[j, k] = self.position_in_bounds(pos + np.asarray(move))
        return out

    def atom_mask(self, state: GlobalState, agent: int) -> np.ndarray:
        """Flat mask over joint atoms that are feasible from ally ``agent``'s view."""
        key = ("atom_mask", agent)
        hit = state._cache.get(key)
        if hit is not None:
            return hit
        out = state._cache[key] = joint_mask(self.slot_atom_mask(self.observe(state, agent)))
        return out

    def enemy_targets(self, state: GlobalState, next_state: GlobalState, agent: int):
        """Next local states and move atoms of the enemies in N(agent) at ``state``."""
        _, enemy_vis = self.visible(state, agent)
        atoms = np.full(self.spec.n_enemies, self.vanish_atom, dtype=np.int64)
        nxt = np.zeros_like(state.enemies)
        for j in range(self.spec.n_enemies):
            if enemy_vis[j]:
                atoms[j] = self.move_atom(state.enemies[j], next_state.enemies[j])
                nxt[j] = next_state.enemies[j]
        return enemy_vis, nxt, atoms

    def validate_action(self, action: Sequence[int]) -> tuple:
        action = tuple(int(a) for a in action)
        if len(action) != self.spec.n_allies:
            raise GameError(f"expected {self.spec.n_allies} ally actions, got {len(action)}")
        for i, a in enumerate(action):
            if not 0 <= a < self.spec.ally_action_count:
                raise GameError(f"ally {i}: action index {a} outside [0, {self.spec.ally_action_count})")
        return action

    def sample_enemy_action(self, state: GlobalState, rng: np.random.Generator) -> tuple:
        dist = self.enemy_distribution(state)
        if len(dist) == 1:
            return dist[0][0]
        u = rng.random()
        acc = 0.0
        for joint, p in dist:
            acc += p
            if u < acc:
                return joint
        return dist[-1][0]

    def step(self, state: GlobalState, action: Sequence[int], rng: np.random.Generator) -> Transition:
        if self.is_terminal(state):
            raise GameError("cannot step a terminal state")
        action = self.validate_action(action)
        enemy_action = self.sample_enemy_action(state, rng)
        next_state, rewards = self.dynamics(state, action, enemy_action)
        n = self.spec.n_allies
        obs = [self.observe(state, i) for i in range(n)]
        next_obs = [self.observe(next_state, i) for i in range(n)]
        targets = [self.enemy_targets(state, next_state, i) for i in range(n)]
        return Transition(
            state=state,
            action=action,
            next_state=next_state,
            rewards=np.asarray(rewards, dtype=np.float64),
            observations=obs,
            next_observations=next_obs,
            enemy_next_present=np.stack([t[0] for t in targets]),
            enemy_next_states=np.stack([t[1] for t in targets]),
            enemy_atoms=np.stack([t[2] for t in targets]),
            enemy_action=enemy_action,
            terminal=self.is_terminal(next_state),
        )

    # --- enumerable games ---------------------------------------------
    def enumerate_states(self) -> list[GlobalState]:
        raise UnsupportedOperationError(f"{type(self).__name__} has no enumerable state space")

    def state_index(self, state: GlobalState) -> int:
        raise UnsupportedOperationError(f"{type(self).__name__} has no enumerable state space")

    def initial_distribution(self) -> np.ndarray:
        raise UnsupportedOperationError(f"{type(self).__name__} has no enumerable state space")

    def joint_actions(self) -> list[tuple]:
        return list(itertools.product(range(self.spec.ally_action_count), repeat=self.spec.n_allies))


def joint_mask(per_slot: np.ndarray) -> np.ndarray:
    """Flatten per-slot atom feasibility into a mask over joint atoms (slot 0 most significant)."""
    joint = per_slot[0]
    for j in range(1, len(per_slot)):
        joint = np.logical_and.outer(joint, per_slot[j]).ravel()
    return joint


def marginalized_transition_matrix(game: MarkovGame) -> np.ndarray:
    """Exact P[S, A, S'] = sum over enemy joint actions of Pi_e(A_e|S) P(S'|A_e, A, S).

    States are the game's horizon-free enumeration; the step index is
    ignored. Raises ``UnsupportedOperationError`` for generative games.
    """
    if not game.spec.enumerable:
        raise UnsupportedOperationError(f"{type(game).__name__} is generative-only")
    states = game.enumerate_states()
    actions = game.joint_actions()
    n = len(states)
    P = np.zeros((n, len(actions), n))
    for s_idx, s in enumerate(states):
        dist = game.enemy_distribution(s)
        for a_idx, a in enumerate(actions):
            for enemy_action, p in dist:
                nxt, _ = game.dynamics(s, a, enemy_action)
                P[s_idx, a_idx, game.state_index(nxt)] += p
    return P


def expected_reward_matrix(game: MarkovGame) -> np.ndarray:
    """Team reward r[S, A] averaged over the enemy script (enumerable games)."""
    if not game.spec.enumerable:
        raise UnsupportedOperationError(f"{type(game).__name__} is generative-only")
    states = game.enumerate_states()
    actions = game.joint_actions()
    out = np.zeros((len(states), len(actions)))
    for s_idx, s in enumerate(states):
        for a_idx, a in enumerate(actions):
            for enemy_action, p in game.enemy_distribution(s):
                _, rew = game.dynamics(s, a, enemy_action)
                out[s_idx, a_idx] += p * float(np.sum(rew))
    return out
