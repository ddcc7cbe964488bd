"""ChainGame: one ally, one chasing enemy on a line of cells.

The enemy chases greedily, moves uniformly at random, or mixes the two
("noisy"). The ally scores +1 when it reaches the rightmost cell and is then sent back
to cell 0; if both agents land on the same cell the ally is caught and also
sent back, without reward. Small enough that every state can be enumerated,
which is what the exact solvers and bound checks need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..game import GameError, GameSpec, GlobalState, MarkovGame, Observation

LEFT, STAY, RIGHT = 0, 1, 2
_MOVES = (-1, 0, 1)


@dataclass(frozen=True)
class ChainGameSpec:
    n_positions: int = 8
    horizon: int = 20
    gamma: float = 0.9
    radius: int | None = None
    enemy_script: str = "greedy"  # "greedy" | "uniform" | "noisy"
    noise: float = 0.3  # chance of a uniform move under the "noisy" script

    def __post_init__(self):
        if self.n_positions < 2:
            raise ValueError("n_positions must be >= 2")
        if self.enemy_script not in ("greedy", "uniform", "noisy"):
            raise ValueError(f"unknown enemy_script {self.enemy_script!r}")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must be in [0, 1]")


def greedy_chase(ally: int, enemy: int, n_positions: int) -> int:
    """Enemy action minimising distance to the ally; ties go left."""
    best, best_d = LEFT, None
    for a in (LEFT, STAY, RIGHT):
        e = min(max(enemy + _MOVES[a], 0), n_positions - 1)
        d = abs(e - ally)
        if best_d is None or d < best_d:
            best, best_d = a, d
    return best


class ChainGame(MarkovGame):
    atom_names = ("left", "stay", "right", "vanish")
    atom_moves = ((-1,), (0,), (1,))

    def __init__(self, spec: ChainGameSpec | None = None, **kwargs):
        self.chain = spec or ChainGameSpec(**kwargs)
        n = self.chain.n_positions
        radius = self.chain.radius if self.chain.radius is not None else n
        self.spec = GameSpec(
            n_allies=1,
            n_enemies=1,
            ally_action_count=3,
            enumerable=True,
            horizon=self.chain.horizon,
            gamma=self.chain.gamma,
            neighborhood_radius=radius,
        )
        self.goal = n - 1

    def position_dims(self) -> int:
        return 1

    def position_in_bounds(self, pos) -> bool:
        return 0 <= int(pos[0]) < self.chain.n_positions

    def make_state(self, ally: int, enemy: int, step: int = 0, goals: int = 0) -> GlobalState:
        """``env`` carries the goals scored so far; state indices ignore it."""
        return GlobalState(
            allies=np.array([[ally]], dtype=np.int64),
            enemies=np.array([[enemy]], dtype=np.int64),
            env=np.array([goals], dtype=np.int64),
            step=step,
        )

    def _start_cells(self) -> range:
        n = self.chain.n_positions
        return range(n // 2, n)

    def reset(self, rng: np.random.Generator) -> GlobalState:
        cells = self._start_cells()
        enemy = int(cells[rng.integers(len(cells))])
        return self.make_state(0, enemy)

    def enemy_distribution(self, state):
        if self.chain.enemy_script == "uniform":
            return [((a,), 1.0 / 3.0) for a in (LEFT, STAY, RIGHT)]
        ally, enemy = int(state.allies[0, 0]), int(state.enemies[0, 0])
        chase = greedy_chase(ally, enemy, self.chain.n_positions)
        if self.chain.enemy_script == "greedy":
            return [((chase,), 1.0)]
        eps = self.chain.noise
        return [((a,), eps / 3.0 + (1.0 - eps) * (a == chase)) for a in (LEFT, STAY, RIGHT)]

    def dynamics(self, state, ally_action, enemy_action):
        n = self.chain.n_positions
        ally = min(max(int(state.allies[0, 0]) + _MOVES[ally_action[0]], 0), n - 1)
        enemy = min(max(int(state.enemies[0, 0]) + _MOVES[enemy_action[0]], 0), n - 1)
        reward = 0.0
        if ally == enemy:
            ally = 0
        elif ally == self.goal:
            reward = 1.0
            ally = 0
        goals = int(state.env[0]) + int(reward)
        return self.make_state(ally, enemy, state.step + 1, goals), np.array([reward])

    def win_check(self, state: GlobalState) -> str:
        """Ally wins an episode by reaching the goal at least once."""
        if state.step < self.spec.horizon:
            raise GameError("win_check needs a terminal state")
        return "ally_win" if int(state.env[0]) > 0 else "enemy_win"

    # --- enumeration --------------------------------------------------
    def enumerate_states(self) -> list[GlobalState]:
        n = self.chain.n_positions
        return [self.make_state(a, e) for a in range(n) for e in range(n)]

    def state_index(self, state: GlobalState) -> int:
        n = self.chain.n_positions
        a, e = int(state.allies[0, 0]), int(state.enemies[0, 0])
        if not (0 <= a < n and 0 <= e < n):
            raise GameError(f"state ({a}, {e}) outside the chain")
        return a * n + e

    def state_from_index(self, idx: int) -> GlobalState:
        n = self.chain.n_positions
        if not 0 <= idx < n * n:
            raise GameError(f"state index {idx} out of range")
        return self.make_state(idx // n, idx % n)

    def initial_distribution(self) -> np.ndarray:
        n = self.chain.n_positions
        mu = np.zeros(n * n)
        cells = self._start_cells()
        for e in cells:
            mu[self.state_index(self.make_state(0, e))] = 1.0 / len(cells)
        return mu

    # --- features -----------------------------------------------------
    def encode_observation(self, obs: Observation) -> np.ndarray:
        scale = float(self.chain.n_positions - 1)
        me = obs.self_state[0] / scale
        flag = float(obs.enemy_present[0])
        enemy = obs.enemy_states[0, 0] / scale
        rel = (obs.enemy_states[0, 0] - obs.self_state[0]) / scale if flag else 0.0
        return np.array([me, flag, enemy, rel])

    def encode_state(self, state: GlobalState) -> np.ndarray:
        scale = float(self.chain.n_positions - 1)
        return np.array([state.allies[0, 0] / scale, state.enemies[0, 0] / scale])


def enumerate_states(spec: ChainGameSpec | None = None) -> list[GlobalState]:
    return ChainGame(spec).enumerate_states()
