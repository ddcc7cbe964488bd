"""Win-rate evaluation of a frozen ally policy."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binomtest

from ..marl.agent import gather_features


@dataclass
class EvalResult:
    episodes: int
    wins: int
    draws: int
    losses: int
    win_rate: float
    ci_low: float
    ci_high: float
    deterministic: bool

    def to_dict(self) -> dict:
        return asdict(self)


def wilson_interval(wins: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    ci = binomtest(int(wins), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def evaluate_winrate(game, agent, episodes: int, seed_seq, deterministic: bool = True) -> EvalResult:
    """Play ``episodes`` independent games side by side and count outcomes.

    Episode k draws its layout, enemy moves and (when stochastic) ally moves
    from the k-th child of ``seed_seq``; the imitator gets one more child.
    """
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    seed_seq = seed_seq if isinstance(seed_seq, np.random.SeedSequence) else np.random.SeedSequence(seed_seq)
    children = seed_seq.spawn(2 * episodes + 1)
    env_rngs = [np.random.default_rng(s) for s in children[:episodes]]
    act_rngs = [np.random.default_rng(s) for s in children[episodes : 2 * episodes]]
    im_rng = np.random.default_rng(children[-1])
    n = game.spec.n_allies
    states = [game.reset(r) for r in env_rngs]
    prevs = [np.zeros((n, game.observation_width)) for _ in range(episodes)]
    live = list(range(episodes))
    outcome = [None] * episodes
    while live:
        f = gather_features(game, [states[k] for k in live], [prevs[k] for k in live])
        d = agent.decide(f, [act_rngs[k] for k in live], im_rng, deterministic=deterministic, prediction="mode")
        still = []
        for j, k in enumerate(live):
            tr = game.step(states[k], d["actions"][j * n : (j + 1) * n], env_rngs[k])
            prevs[k] = f.obs[j * n : (j + 1) * n]
            states[k] = tr.next_state
            if tr.terminal:
                outcome[k] = game.win_check(tr.next_state)
            else:
                still.append(k)
        live = still
    wins = sum(o == "ally_win" for o in outcome)
    draws = sum(o == "draw" for o in outcome)
    lo, hi = wilson_interval(wins, episodes)
    return EvalResult(episodes, wins, draws, episodes - wins - draws, wins / episodes, lo, hi, deterministic)
