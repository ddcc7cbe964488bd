"""Fixed-capacity ring buffer for expert tuples."""

from __future__ import annotations

import numpy as np


class EmptyBufferError(ValueError):
    pass


class ExpertBuffer:
    """Overwrite-oldest ring buffer with named, fixed-shape fields.

    ``add_batch`` writes whole rows before bumping the size, so a reader
    never sees a partially written slot. Every row carries a ``start`` flag
    marking episode-start tuples (used for the initial-state term).
    """

    def __init__(self, capacity: int, fields: dict[str, tuple[tuple, type]]):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.fields = dict(fields)
        self.fields.setdefault("start", ((), bool))
        self.data = {k: np.zeros((self.capacity, *shape), dtype=dt) for k, (shape, dt) in self.fields.items()}
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add_batch(self, **rows) -> None:
        missing = set(self.fields) - set(rows) - {"start"}
        if missing:
            raise KeyError(f"missing fields {sorted(missing)}")
        n = len(next(iter(rows.values())))
        if "start" not in rows:
            rows["start"] = np.zeros(n, dtype=bool)
        if n == 0:
            return
        if n > self.capacity:
            rows = {k: np.asarray(v)[-self.capacity :] for k, v in rows.items()}
            n = self.capacity
        idx = (self.cursor + np.arange(n)) % self.capacity
        for k in self.fields:
            self.data[k][idx] = rows[k]
        self.cursor = int((self.cursor + n) % self.capacity)
        self.size = min(self.capacity, self.size + n)

    def view(self) -> dict[str, np.ndarray]:
        """All valid rows, oldest first."""
        if self.size < self.capacity:
            return {k: v[: self.size] for k, v in self.data.items()}
        order = (self.cursor + np.arange(self.capacity)) % self.capacity
        return {k: v[order] for k, v in self.data.items()}

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        if self.size == 0:
            raise EmptyBufferError("expert buffer is empty")
        idx = rng.integers(0, self.size, size=batch_size)
        return {k: v[idx] for k, v in self.data.items()}

    def starts(self) -> dict[str, np.ndarray]:
        v = self.view()
        mask = v["start"]
        return {k: a[mask] for k, a in v.items()}

    def state_dict(self) -> dict:
        return {"cursor": self.cursor, "size": self.size, "data": {k: v.copy() for k, v in self.data.items()}}

    def load_state_dict(self, state: dict) -> None:
        self.cursor, self.size = int(state["cursor"]), int(state["size"])
        for k in self.fields:
            self.data[k][...] = state["data"][k]


def tabular_buffer(capacity: int = 100_000) -> ExpertBuffer:
    return ExpertBuffer(capacity, {"s": ((), np.int64), "a": ((), np.int64), "s_next": ((), np.int64)})


def empirical_measures(buf: ExpertBuffer, n_states: int, n_actions: int) -> tuple[np.ndarray, np.ndarray]:
    """Empirical rho_E[S, A, S'] over all triples and mu0 over the tagged starts."""
    if len(buf) == 0:
        raise EmptyBufferError("expert buffer is empty")
    v = buf.view()
    rho = np.zeros((n_states, n_actions, n_states))
    np.add.at(rho, (v["s"], v["a"], v["s_next"]), 1.0)
    rho /= len(buf)
    starts = v["s"][v["start"]]
    if len(starts) == 0:
        raise EmptyBufferError("no episode-start tuples in the buffer")
    mu0 = np.bincount(starts, minlength=n_states).astype(np.float64) / len(starts)
    return rho, mu0


def collect_tabular_expert(game, ally_policy: np.ndarray, n_samples: int, rng: np.random.Generator, buf: ExpertBuffer | None = None) -> ExpertBuffer:
    """Roll the game under ``ally_policy`` with geometric termination (prob 1 - gamma).

    Triples are then distributed as the normalized discounted occupancy. The
    step index is ignored (horizon-free enumeration).
    """
    gamma = game.spec.gamma
    actions = game.joint_actions()
    buf = buf or tabular_buffer(max(n_samples, 1))
    s_l, a_l, n_l, st_l = [], [], [], []
    state = None
    while len(s_l) < n_samples:
        if state is None:
            state = game.reset(rng)
            start = True
        s = game.state_index(state)
        a = int(rng.choice(len(actions), p=ally_policy[s]))
        enemy = game.sample_enemy_action(state, rng)
        nxt, _ = game.dynamics(state, actions[a], enemy)
        nxt = type(state)(allies=nxt.allies, enemies=nxt.enemies, env=nxt.env, step=0)
        s_l.append(s)
        a_l.append(a)
        n_l.append(game.state_index(nxt))
        st_l.append(start)
        start = False
        state = nxt if rng.random() < gamma else None
    buf.add_batch(s=np.array(s_l), a=np.array(a_l), s_next=np.array(n_l), start=np.array(st_l))
    return buf


def local_buffer(capacity: int, obs_width: int, n_actions: int, n_joint: int) -> ExpertBuffer:
    """Per-ally local tuples (o, a, joint enemy atom, o', ...) for the imitator."""
    return ExpertBuffer(
        capacity,
        {
            "obs": ((obs_width,), np.float64),
            "action": ((), np.int64),
            "target": ((), np.int64),
            "mask": ((n_joint,), bool),
            "probs": ((n_actions,), np.float64),
            "next_obs": ((obs_width,), np.float64),
            "next_mask": ((n_joint,), bool),
            "next_probs": ((n_actions,), np.float64),
            "done": ((), bool),
            "agent": ((), np.int64),
            "t": ((), np.int64),
        },
    )


def collect_local_expert(game, n_steps: int, rng: np.random.Generator, ally_probs=None, buf: ExpertBuffer | None = None) -> ExpertBuffer:
    """Play ``n_steps`` game steps and store one local tuple per ally per step.

    ``ally_probs(obs_vector) -> action probabilities`` defaults to uniform over
    the ally's valid actions. Episodes run to the horizon.
    """
    n = game.spec.n_allies
    K = game.spec.ally_action_count
    buf = buf or local_buffer(max(n_steps * n, 1), game.observation_width, K, game.n_joint_atoms)

    def probs(state, i):
        mask = game.action_mask(state, i)
        p = mask / mask.sum() if ally_probs is None else np.asarray(ally_probs(game.observation_vector(state, i)), dtype=np.float64)
        return p

    rows = {k: [] for k in ("obs", "action", "target", "mask", "probs", "next_obs", "next_mask", "next_probs", "done", "agent", "start", "t")}
    state = game.reset(rng)
    for _ in range(n_steps):
        p = [probs(state, i) for i in range(n)]
        action = tuple(int(rng.choice(K, p=p[i])) for i in range(n))
        tr = game.step(state, action, rng)
        nxt = tr.next_state
        for i in range(n):
            rows["obs"].append(game.observation_vector(state, i))
            rows["action"].append(action[i])
            rows["target"].append(game.joint_atom_index(tr.enemy_atoms[i]))
            rows["mask"].append(game.atom_mask(state, i))
            rows["probs"].append(p[i])
            rows["next_obs"].append(game.observation_vector(nxt, i))
            rows["next_mask"].append(game.atom_mask(nxt, i))
            rows["next_probs"].append(probs(nxt, i))
            rows["done"].append(tr.terminal)
            rows["agent"].append(i)
            rows["start"].append(state.step == 0)
            rows["t"].append(state.step)
        state = game.reset(rng) if tr.terminal else nxt
    buf.add_batch(**{k: np.asarray(v) for k, v in rows.items()})
    return buf
