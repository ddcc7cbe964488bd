"""Pure-Python versions of the hot kernels.

Every function here has a compiled twin in ``_core.pyx`` with the same
signature and bit-identical results; the package picks one at import time.
"""

from __future__ import annotations

import numpy as np

# GridMiner action codes, shared with the compiled core.
UP, DOWN, LEFT, RIGHT, MINE = 0, 1, 2, 3, 4
_DR = (-1, 1, 0, 0, 0)
_DC = (0, 0, -1, 1, 0)


def gae(rewards, values, dones, gamma, lam):
    """Reverse-recursion GAE over a (T, K) block.

    ``values`` has T + 1 rows; the last row is the bootstrap value.
    ``dones[t]`` marks that the state after step t is terminal.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    T, K = rewards.shape
    adv = np.zeros((T, K), dtype=np.float64)
    for k in range(K):
        last = 0.0
        for t in range(T - 1, -1, -1):
            nonterminal = 1.0 - dones[t, k]
            delta = rewards[t, k] + gamma * values[t + 1, k] * nonterminal - values[t, k]
            last = delta + gamma * lam * nonterminal * last
            adv[t, k] = last
    return adv


def clamp_move(r, c, action, height, width):
    if action >= MINE:
        return r, c
    nr = r + _DR[action]
    nc = c + _DC[action]
    if nr < 0 or nr >= height or nc < 0 or nc >= width:
        return r, c
    return nr, nc


def nearest_gold(r, c, gold):
    """(distance, row, col) of the nearest pile; ties go to the smaller column, then row."""
    height, width = gold.shape
    best = (-1, -1, -1)
    for cc in range(width):
        for rr in range(height):
            if gold[rr, cc] <= 0:
                continue
            d = abs(rr - r) + abs(cc - c)
            if best[0] < 0 or d < best[0]:
                best = (d, rr, cc)
    return best


def greedy_action(r, c, gold):
    """Easy script: mine if standing on gold, else step toward the nearest pile.

    Horizontal moves are taken before vertical ones.
    """
    if gold[r, c] > 0:
        return MINE
    d, tr, tc = nearest_gold(r, c, gold)
    if d < 0:
        return MINE
    if tc < c:
        return LEFT
    if tc > c:
        return RIGHT
    if tr < r:
        return UP
    return DOWN


def gold_potential(r, c, gold):
    height, width = gold.shape
    total = 0.0
    for rr in range(height):
        for cc in range(width):
            if gold[rr, cc] > 0:
                total += gold[rr, cc] / (1.0 + abs(rr - r) + abs(cc - c))
    return total


def lookahead_action(r, c, gold):
    """Hard script: best first action of an exhaustive two-step plan.

    A plan scores ``10 * mined + gold_potential(final cell)`` with the
    other agents held still; ties keep the lexicographically first plan.
    """
    gold = np.array(gold, dtype=np.int64)
    height, width = gold.shape
    best_score = -1.0
    best_action = MINE
    for a1 in range(5):
        r1, c1 = clamp_move(r, c, a1, height, width)
        mined1 = 1 if (a1 == MINE and gold[r1, c1] > 0) else 0
        for a2 in range(5):
            r2, c2 = clamp_move(r1, c1, a2, height, width)
            left = gold[r2, c2] - (mined1 if (r2 == r1 and c2 == c1) else 0)
            mined2 = 1 if (a2 == MINE and left > 0) else 0
            if mined1:
                gold[r1, c1] -= 1
            if mined2:
                gold[r2, c2] -= 1
            score = 10.0 * (mined1 + mined2) + gold_potential(r2, c2, gold)
            if mined2:
                gold[r2, c2] += 1
            if mined1:
                gold[r1, c1] += 1
            if score > best_score:
                best_score = score
                best_action = a1
    return best_action


def chebyshev_visible(center, others, radius):
    """Boolean mask of rows of ``others`` within Chebyshev distance ``radius``."""
    out = np.zeros(len(others), dtype=bool)
    for j in range(len(others)):
        d = 0
        for k in range(len(center)):
            d = max(d, abs(int(others[j][k]) - int(center[k])))
        out[j] = d <= radius
    return out
