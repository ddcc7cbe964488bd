"""GridMiner: two allies race two scripted enemies to mine gold on a grid.

Agents move simultaneously (off-grid moves clamp in place) or mine one unit
from the pile under them. When a pile cannot serve every miner in the same
step, allies are served first, in id order, then enemies. The episode ends at
the horizon; the side with more mined gold wins.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from .._kernels import DOWN, LEFT, MINE, RIGHT, UP
from ..game import GameError, GameSpec, GlobalState, MarkovGame, Observation

ACTION_NAMES = ("up", "down", "left", "right", "mine")
DIFFICULTIES = ("easy", "hard", "random")

ALLY_WIN, ENEMY_WIN, DRAW = "ally_win", "enemy_win", "draw"

# local-state columns
ROW, COL, MINED = 0, 1, 2


@dataclass(frozen=True)
class GridMinerSpec:
    width: int = 8
    height: int = 8
    n_allies: int = 2
    n_enemies: int = 2
    gold_total: int = 12
    n_piles: int = 4
    horizon: int = 40
    radius: int = 3
    gamma: float = 0.99
    difficulty: str = "easy"
    layout_seed: int | None = None
    symmetric: bool = False
    mask_mine: bool = True

    def __post_init__(self):
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"difficulty must be one of {DIFFICULTIES}, got {self.difficulty!r}")
        if self.width < 2 or self.height < 2:
            raise ValueError("grid must be at least 2x2")
        if not 1 <= self.n_piles <= self.gold_total:
            raise ValueError("need 1 <= n_piles <= gold_total")
        if self.symmetric and (self.n_piles % 2 or self.gold_total % 2):
            raise ValueError("symmetric layouts need an even pile count and gold total")


def start_cells(height: int, width: int, n: int, column: int) -> list[tuple[int, int]]:
    rows = np.linspace(0, height - 1, n).round().astype(int) if n > 1 else [height // 2]
    return [(int(r), column) for r in rows]


def random_layout(spec: GridMinerSpec, rng: np.random.Generator) -> np.ndarray:
    """Gold map with ``n_piles`` piles summing to ``gold_total``; start cells stay empty."""
    H, W = spec.height, spec.width
    blocked = set(start_cells(H, W, spec.n_allies, 0)) | set(start_cells(H, W, spec.n_enemies, W - 1))
    gold = np.zeros((H, W), dtype=np.int64)
    if spec.symmetric:
        half = [(r, c) for r in range(H) for c in range(W // 2) if (r, c) not in blocked and (r, W - 1 - c) not in blocked]
        n, total = spec.n_piles // 2, spec.gold_total // 2
        picks = rng.choice(len(half), size=n, replace=False)
        amounts = 1 + rng.multinomial(total - n, np.full(n, 1.0 / n))
        for k, p in enumerate(picks):
            r, c = half[p]
            gold[r, c] = amounts[k]
            gold[r, W - 1 - c] = amounts[k]
        return gold
    free = [(r, c) for r in range(H) for c in range(W) if (r, c) not in blocked]
    picks = rng.choice(len(free), size=spec.n_piles, replace=False)
    amounts = 1 + rng.multinomial(spec.gold_total - spec.n_piles, np.full(spec.n_piles, 1.0 / spec.n_piles))
    for k, p in enumerate(picks):
        gold[free[p]] = amounts[k]
    return gold


def greedy_enemy_action(state: GlobalState, enemy: int, difficulty: str, height: int, width: int) -> int:
    """Scripted action of one enemy (deterministic for easy/hard)."""
    gold = state.env.reshape(height, width)
    r, c = int(state.enemies[enemy, ROW]), int(state.enemies[enemy, COL])
    if difficulty == "easy":
        return int(_kernels.greedy_action(r, c, gold))
    if difficulty == "hard":
        return int(_kernels.lookahead_action(r, c, gold))
    raise GameError(f"difficulty {difficulty!r} has no deterministic script")


def win_check(state: GlobalState, horizon: int | None = None) -> str:
    if horizon is not None and state.step < horizon:
        raise GameError("win_check needs a terminal state")
    allies = int(state.allies[:, MINED].sum())
    enemies = int(state.enemies[:, MINED].sum())
    if allies > enemies:
        return ALLY_WIN
    if allies < enemies:
        return ENEMY_WIN
    return DRAW


class GridMiner(MarkovGame):
    atom_names = ("up", "down", "left", "right", "stay", "vanish")
    atom_moves = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))

    def __init__(self, spec: GridMinerSpec | None = None, **kwargs):
        self.grid = spec or GridMinerSpec(**kwargs)
        g = self.grid
        self.spec = GameSpec(
            n_allies=g.n_allies,
            n_enemies=g.n_enemies,
            ally_action_count=len(ACTION_NAMES),
            enumerable=False,
            horizon=g.horizon,
            gamma=g.gamma,
            neighborhood_radius=g.radius,
        )
        self._fixed_layout = random_layout(g, np.random.default_rng(g.layout_seed)) if g.layout_seed is not None else None
        self._enemy_joint = list(itertools.product(range(len(ACTION_NAMES)), repeat=g.n_enemies))

    def gold(self, state: GlobalState) -> np.ndarray:
        return state.env.reshape(self.grid.height, self.grid.width)

    def reset(self, rng: np.random.Generator) -> GlobalState:
        g = self.grid
        gold = self._fixed_layout.copy() if self._fixed_layout is not None else random_layout(g, rng)
        allies = np.array([[r, c, 0] for r, c in start_cells(g.height, g.width, g.n_allies, 0)], dtype=np.int64)
        enemies = np.array([[r, c, 0] for r, c in start_cells(g.height, g.width, g.n_enemies, g.width - 1)], dtype=np.int64)
        return GlobalState(allies=allies, enemies=enemies, env=gold.ravel(), step=0)

    def enemy_distribution(self, state):
        g = self.grid
        if g.difficulty == "random":
            p = 1.0 / len(self._enemy_joint)
            return [(joint, p) for joint in self._enemy_joint]
        joint = tuple(greedy_enemy_action(state, j, g.difficulty, g.height, g.width) for j in range(g.n_enemies))
        return [(joint, 1.0)]

    def dynamics(self, state, ally_action, enemy_action):
        g = self.grid
        gold = self.gold(state).copy()
        allies = state.allies.copy()
        enemies = state.enemies.copy()
        rewards = np.zeros(g.n_allies)
        # mining resolves on the pre-move cells; miners do not move
        miners: dict[tuple[int, int], list[tuple[str, int]]] = {}
        for i, a in enumerate(ally_action):
            if a == MINE:
                miners.setdefault((int(allies[i, ROW]), int(allies[i, COL])), []).append(("ally", i))
        for j, a in enumerate(enemy_action):
            if a == MINE:
                miners.setdefault((int(enemies[j, ROW]), int(enemies[j, COL])), []).append(("enemy", j))
        for cell, who in miners.items():
            for side, k in who:  # allies were appended first
                if gold[cell] <= 0:
                    break
                gold[cell] -= 1
                if side == "ally":
                    allies[k, MINED] += 1
                    rewards[k] += 1.0
                else:
                    enemies[k, MINED] += 1
        for i, a in enumerate(ally_action):
            allies[i, ROW], allies[i, COL] = _kernels.clamp_move(int(allies[i, ROW]), int(allies[i, COL]), int(a), g.height, g.width)
        for j, a in enumerate(enemy_action):
            enemies[j, ROW], enemies[j, COL] = _kernels.clamp_move(int(enemies[j, ROW]), int(enemies[j, COL]), int(a), g.height, g.width)
        nxt = GlobalState(allies=allies, enemies=enemies, env=gold.ravel(), step=state.step + 1)
        return nxt, rewards

    def position_in_bounds(self, pos) -> bool:
        return 0 <= int(pos[0]) < self.grid.height and 0 <= int(pos[1]) < self.grid.width

    def action_mask(self, state, agent):
        mask = np.ones(self.spec.ally_action_count, dtype=bool)
        if self.grid.mask_mine:
            r, c = int(state.allies[agent, ROW]), int(state.allies[agent, COL])
            mask[MINE] = self.gold(state)[r, c] > 0
        return mask

    def win_check(self, state: GlobalState) -> str:
        return win_check(state, self.spec.horizon)

    # --- features -----------------------------------------------------
    def context(self, state, agent):
        """Egocentric gold window, offset to the nearest pile, and game progress."""
        g = self.grid
        gold = self.gold(state)
        r, c = int(state.allies[agent, ROW]), int(state.allies[agent, COL])
        k = g.radius
        padded = np.pad(gold, k).astype(np.float64)
        window = padded[r : r + 2 * k + 1, c : c + 2 * k + 1].ravel() / 4.0
        d, tr, tc = _kernels.nearest_gold(r, c, gold)
        if d < 0:
            nearest = [0.0, 0.0, 0.0]
        else:
            nearest = [1.0, (tr - r) / (g.height - 1), (tc - c) / (g.width - 1)]
        remaining = gold.sum() / g.gold_total
        diff = (state.allies[:, MINED].sum() - state.enemies[:, MINED].sum()) / g.gold_total
        return np.concatenate([window, nearest, [remaining, state.step / g.horizon, diff]])

    def _slot(self, present, row, me):
        g = self.grid
        if not present:
            return [0.0] * 6
        return [
            1.0,
            row[ROW] / (g.height - 1),
            row[COL] / (g.width - 1),
            (row[ROW] - me[ROW]) / (g.height - 1),
            (row[COL] - me[COL]) / (g.width - 1),
            row[MINED] / g.gold_total,
        ]

    def encode_observation(self, obs: Observation) -> np.ndarray:
        g = self.grid
        me = obs.self_state
        parts = [me[ROW] / (g.height - 1), me[COL] / (g.width - 1), me[MINED] / g.gold_total]
        for k in range(len(obs.ally_present)):
            parts += self._slot(obs.ally_present[k], obs.ally_states[k], me)
        for k in range(len(obs.enemy_present)):
            parts += self._slot(obs.enemy_present[k], obs.enemy_states[k], me)
        return np.concatenate([np.asarray(parts, dtype=np.float64), obs.context])

    def encode_state(self, state: GlobalState) -> np.ndarray:
        g = self.grid
        rows = np.concatenate([state.allies, state.enemies]).astype(np.float64)
        scale = np.array([g.height - 1, g.width - 1, g.gold_total], dtype=np.float64)
        return np.concatenate([(rows / scale).ravel(), state.env / 4.0, [state.step / g.horizon]])
