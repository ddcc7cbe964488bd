# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_fallback.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef enum:
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    MINE = 4

cdef int _DR[5]
cdef int _DC[5]
_DR[:] = [-1, 1, 0, 0, 0]
_DC[:] = [0, 0, -1, 1, 0]


def gae(rewards, values, dones, double gamma, double lam):
    cdef double[:, :] r = np.ascontiguousarray(rewards, dtype=np.float64)
    cdef double[:, :] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[:, :] d = np.ascontiguousarray(dones, dtype=np.float64)
    cdef Py_ssize_t T = r.shape[0]
    cdef Py_ssize_t K = r.shape[1]
    out = np.zeros((T, K), dtype=np.float64)
    cdef double[:, :] adv = out
    cdef Py_ssize_t t, k
    cdef double last, nonterminal, delta
    for k in range(K):
        last = 0.0
        for t in range(T - 1, -1, -1):
            nonterminal = 1.0 - d[t, k]
            delta = r[t, k] + gamma * v[t + 1, k] * nonterminal - v[t, k]
            last = delta + gamma * lam * nonterminal * last
            adv[t, k] = last
    return out


cdef inline void _clamp(int r, int c, int action, int height, int width, int* nr, int* nc) nogil:
    cdef int rr, cc
    if action >= MINE:
        nr[0] = r
        nc[0] = c
        return
    rr = r + _DR[action]
    cc = c + _DC[action]
    if rr < 0 or rr >= height or cc < 0 or cc >= width:
        nr[0] = r
        nc[0] = c
    else:
        nr[0] = rr
        nc[0] = cc


def clamp_move(int r, int c, int action, int height, int width):
    cdef int nr, nc
    _clamp(r, c, action, height, width, &nr, &nc)
    return nr, nc


cdef void _nearest(int r, int c, long[:, :] gold, int* bd, int* br, int* bc) nogil:
    cdef int height = gold.shape[0]
    cdef int width = gold.shape[1]
    cdef int rr, cc, dd
    bd[0] = -1
    br[0] = -1
    bc[0] = -1
    for cc in range(width):
        for rr in range(height):
            if gold[rr, cc] <= 0:
                continue
            dd = abs(rr - r) + abs(cc - c)
            if bd[0] < 0 or dd < bd[0]:
                bd[0] = dd
                br[0] = rr
                bc[0] = cc


def nearest_gold(int r, int c, gold):
    cdef long[:, :] g = np.ascontiguousarray(gold, dtype=np.int64)
    cdef int d, tr, tc
    _nearest(r, c, g, &d, &tr, &tc)
    return d, tr, tc


def greedy_action(int r, int c, gold):
    cdef long[:, :] g = np.ascontiguousarray(gold, dtype=np.int64)
    cdef int d, tr, tc
    if g[r, c] > 0:
        return MINE
    _nearest(r, c, g, &d, &tr, &tc)
    if d < 0:
        return MINE
    if tc < c:
        return LEFT
    if tc > c:
        return RIGHT
    if tr < r:
        return UP
    return DOWN


cdef double _potential(int r, int c, long[:, :] gold) nogil:
    cdef int height = gold.shape[0]
    cdef int width = gold.shape[1]
    cdef int rr, cc
    cdef double total = 0.0
    for rr in range(height):
        for cc in range(width):
            if gold[rr, cc] > 0:
                total += gold[rr, cc] / (1.0 + abs(rr - r) + abs(cc - c))
    return total


def gold_potential(int r, int c, gold):
    cdef long[:, :] g = np.ascontiguousarray(gold, dtype=np.int64)
    return _potential(r, c, g)


def lookahead_action(int r, int c, gold):
    g_arr = np.array(gold, dtype=np.int64)
    cdef long[:, :] g = g_arr
    cdef int height = g.shape[0]
    cdef int width = g.shape[1]
    cdef int a1, a2, r1, c1, r2, c2, mined1, mined2, left
    cdef double score
    cdef double best_score = -1.0
    cdef int best_action = MINE
    for a1 in range(5):
        _clamp(r, c, a1, height, width, &r1, &c1)
        mined1 = 1 if (a1 == MINE and g[r1, c1] > 0) else 0
        for a2 in range(5):
            _clamp(r1, c1, a2, height, width, &r2, &c2)
            left = g[r2, c2] - (mined1 if (r2 == r1 and c2 == c1) else 0)
            mined2 = 1 if (a2 == MINE and left > 0) else 0
            if mined1:
                g[r1, c1] -= 1
            if mined2:
                g[r2, c2] -= 1
            score = 10.0 * (mined1 + mined2) + _potential(r2, c2, g)
            if mined2:
                g[r2, c2] += 1
            if mined1:
                g[r1, c1] += 1
            if score > best_score:
                best_score = score
                best_action = a1
    return best_action


def chebyshev_visible(center, others, int radius):
    if len(others) == 0:
        return np.zeros(0, dtype=bool)
    cdef long[:] ctr = np.ascontiguousarray(center, dtype=np.int64).reshape(-1)
    cdef long[:, :] oth = np.ascontiguousarray(others, dtype=np.int64).reshape(len(others), -1)
    cdef Py_ssize_t n = oth.shape[0]
    cdef Py_ssize_t dim = oth.shape[1]
    out = np.zeros(n, dtype=bool)
    cdef Py_ssize_t j, k
    cdef long d, x
    for j in range(n):
        d = 0
        for k in range(dim):
            x = oth[j, k] - ctr[k]
            if x < 0:
                x = -x
            if x > d:
                d = x
        out[j] = d <= radius
    return out
