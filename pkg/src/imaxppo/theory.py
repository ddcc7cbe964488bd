"""Numerical checks of the imitation objective's structural guarantees.

Everything here runs on enumerable games with exact occupancy measures. The
checks return ``CheckReport`` objects; ``run_suite`` bundles them into the
JSON report the ``verify`` command writes. KL divergences are measured in
bits so that the ``sqrt(2 ln2 eps)`` factor of the perturbation bound is the
Pinsker constant.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .envs import ChainGame, ChainGameSpec
from .game import MarkovGame, UnsupportedOperationError, marginalized_transition_matrix
from .imitation.tabular import (
    fit_tabular,
    inverse_soft_bellman,
    j_compact,
    j_compact_parts,
    j_occupancy,
    l_occupancy,
    occupancy,
    policy_from_q,
    soft_bellman,
    solve_fixed_point,
    state_occupancy,
    v_policy,
    v_soft,
)

KL_LOG_BASE = 2
SUITES = ("chain", "operators", "reward_equivalence", "telescoping", "concavity", "bounds", "monte_carlo", "selftest")


# --- types ----------------------------------------------------------------
@dataclass
class PhiEvaluation:
    value: float
    expected_q: float
    discounted_next_value: float
    initial_value: float

    def terms(self) -> tuple[float, float, float]:
        return self.expected_q, self.discounted_next_value, self.initial_value


@dataclass
class BoundInputs:
    """Everything the perturbation bound needs, with its preconditions checked.

    ``entropy_floor`` is a lower bound on E_Pi[ln Pi] over (S, A) for an
    explicit enemy actor; the continuous form uses it in place of -ln|S|.
    """

    policy: np.ndarray
    perturbed: np.ndarray
    Q: np.ndarray
    gamma: float
    kl_eps: float
    q_max: float
    n_states: int
    entropy_floor: float

    @classmethod
    def build(cls, policy, perturbed, Q, gamma, kl_eps, explicit=None) -> BoundInputs:
        Q = np.asarray(Q, dtype=np.float64)
        n = Q.shape[-1]
        floor = -math.log(n) if explicit is None else float(np.min(neg_entropy(explicit)))
        out = cls(np.asarray(policy), np.asarray(perturbed), Q, float(gamma), float(kl_eps), float(Q.max()), n, floor)
        out.validate()
        return out

    def validate(self, slack: float = 1e-12) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if self.kl_eps < 0:
            raise ValueError("kl_eps must be >= 0")
        if self.q_max != float(self.Q.max()):
            raise ValueError("q_max must be the largest Q entry")
        kl = kl_per_state_max(self.policy, self.perturbed)
        if kl > self.kl_eps + slack:
            raise ValueError(f"per-state KL {kl:.3e} bits exceeds the cap {self.kl_eps:.3e}")


@dataclass
class CheckReport:
    check_name: str
    trials: int
    violations: int
    worst_ratio: float
    runtime_ms: float
    details: dict = field(default_factory=dict)
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1000.0 * (time.perf_counter() - self.t0)


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# --- the objective as a function of the allies' policy --------------------
def phi_objective(Q, ally_policy, enemy_dynamics, initial_dist, gamma, Pi=None) -> PhiEvaluation:
    """Exact value of the imitation objective when the data comes from the true enemies.

    The occupancy is the one induced by ``ally_policy`` under
    ``enemy_dynamics[S, A, S']``; V uses Pi^Q unless an explicit ``Pi`` is given.
    """
    P = np.asarray(enemy_dynamics, dtype=np.float64)
    if P.ndim != 3 or np.shape(Q) != P.shape:
        raise ValueError(f"Q {np.shape(Q)} and dynamics {P.shape} must both be (S, A, S')")
    rho = occupancy(ally_policy, P, initial_dist, gamma)
    parts = j_compact_parts(Q, ally_policy, rho, initial_dist, gamma, Pi)
    value = parts["expected_q"] + parts["discounted_next_value"] + parts["initial_value"]
    return PhiEvaluation(value, parts["expected_q"], parts["discounted_next_value"], parts["initial_value"])


def phi_for_game(game: MarkovGame, Q, ally_policy, Pi=None) -> PhiEvaluation:
    if not game.spec.enumerable:
        raise UnsupportedOperationError("exact evaluation needs an enumerable game")
    P = marginalized_transition_matrix(game)
    return phi_objective(Q, ally_policy, P, game.initial_distribution(), game.spec.gamma, Pi)


def phi_supremum(ally_policy, enemy_dynamics, initial_dist, gamma) -> float:
    """sup over Q of the objective, in closed form.

    With rho coming from the true dynamics the objective reduces to
    sum_S d(S) sum_A pi(A|S) (<P, Q> - lse Q), whose supremum per block is
    -H(P(.|S,A)) (Gibbs). It is attained at Q = ln P, or approached when P
    has zeros.
    """
    P = np.asarray(enemy_dynamics, dtype=np.float64)
    d = state_occupancy(ally_policy, P, initial_dist, gamma)
    return float(-np.sum(d[:, None] * ally_policy * entropy(P)))


def phi_supremum_ascent(ally_policy, enemy_dynamics, initial_dist, gamma, rng, restarts=10, n_steps=4000) -> float:
    """Best objective value reached by preconditioned ascent from random starts."""
    rho = occupancy(ally_policy, enemy_dynamics, initial_dist, gamma)
    best = -np.inf
    for _ in range(restarts):
        fit = fit_tabular(ally_policy, rho, initial_dist, gamma, n_steps=n_steps, tol=1e-10, Q0=rng.normal(size=rho.shape))
        best = max(best, j_compact(fit.Q, ally_policy, rho, initial_dist, gamma))
    return float(best)


# --- KL, entropies and the bound ------------------------------------------
def _xlogy(p, q):
    return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0) / np.where(q > 0, q, 1.0)), 0.0)


def kl_per_state(policy, perturbed) -> np.ndarray:
    """KL(policy(.|S) || perturbed(.|S)) in bits for every S; inf on support mismatch."""
    p = np.asarray(policy, dtype=np.float64)
    q = np.asarray(perturbed, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"policy shapes differ: {p.shape} vs {q.shape}")
    kl = _xlogy(p, q).sum(axis=-1)
    bad = ((p > 0) & (q <= 0)).any(axis=-1)
    return np.where(bad, np.inf, np.maximum(kl, 0.0))


def kl_per_state_max(policy, perturbed) -> float:
    return float(np.max(kl_per_state(policy, perturbed)))


def entropy(P) -> np.ndarray:
    """Shannon entropy (nats) over the last axis."""
    P = np.asarray(P, dtype=np.float64)
    return -np.sum(np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0), axis=-1)


def neg_entropy(P) -> np.ndarray:
    return -entropy(P)


def bound_coefficients(gamma: float) -> tuple[float, float]:
    if not gamma < 1.0:
        raise ValueError(f"the bound needs gamma < 1, got {gamma}")
    c = 1.0 - gamma
    return (gamma + 1.0 + c**3) / c**2, (1.0 + c**3) / c**2


def bound_rhs(inputs: BoundInputs, form: str = "discrete") -> float:
    """Right-hand side of the perturbation bound.

    discrete:   [a Q_max + b ln|S|] sqrt(2 ln2 eps)
    continuous: [a Q_max - b H]     sqrt(2 ln2 eps)
    with a = (gamma + 1 + (1-gamma)^3)/(1-gamma)^2, b = (1 + (1-gamma)^3)/(1-gamma)^2.
    """
    a, b = bound_coefficients(inputs.gamma)
    if form == "discrete":
        size_term = math.log(inputs.n_states)
    elif form == "continuous":
        size_term = -inputs.entropy_floor
    else:
        raise ValueError(f"form must be 'discrete' or 'continuous', got {form!r}")
    return (a * inputs.q_max + b * size_term) * math.sqrt(2.0 * math.log(2.0) * inputs.kl_eps)


def tilt(policy, direction, magnitude) -> np.ndarray:
    z = np.log(np.maximum(policy, 1e-300)) + magnitude * direction
    z -= z.max(axis=-1, keepdims=True)
    p = np.exp(z) * (policy > 0)
    return p / p.sum(axis=-1, keepdims=True)


def tilted_pair(policy, rng, kl_eps, max_iter=200) -> tuple[np.ndarray, float]:
    """Exponentially tilted copy of ``policy`` with max per-state KL in [0.9 eps, eps].

    Returns ``(perturbed, achieved_kl)``. ``kl_eps = 0`` returns the policy itself.
    """
    if kl_eps <= 0:
        return policy.copy(), 0.0
    direction = rng.normal(size=policy.shape)
    lo, hi = 0.0, 1.0
    while kl_per_state_max(policy, tilt(policy, direction, hi)) < kl_eps:
        hi *= 2.0
        if hi > 1e6:
            raise RuntimeError("tilt cannot reach the KL target")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        kl = kl_per_state_max(policy, tilt(policy, direction, mid))
        if kl > kl_eps:
            hi = mid
        elif kl < 0.9 * kl_eps:
            lo = mid
        else:
            return tilt(policy, direction, mid), kl
    kl = kl_per_state_max(policy, tilt(policy, direction, lo))
    return tilt(policy, direction, lo), kl


# --- checks ---------------------------------------------------------------
def default_game(enemy_script: str = "noisy") -> ChainGame:
    return ChainGame(ChainGameSpec(enemy_script=enemy_script))


def _tables(game):
    if not game.spec.enumerable:
        raise UnsupportedOperationError("theory checks need an enumerable game")
    return marginalized_transition_matrix(game), game.initial_distribution(), game.spec.gamma


def _policy(rng, n_states, n_actions):
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def verify_operators(game=None, n_pairs=100, seed=0) -> list[CheckReport]:
    """Contraction of B, validity and shift invariance of Pi^Q, equal-logit values."""
    game = game or default_game()
    P, mu0, gamma = _tables(game)
    S, A, _ = P.shape
    rng = np.random.default_rng(seed)
    out = []

    with _Timer() as t:
        worst, bad = 0.0, 0
        pi = _policy(rng, S, A)
        R = rng.normal(size=P.shape)
        for _ in range(n_pairs):
            Q1, Q2 = rng.normal(scale=rng.uniform(0.1, 5.0), size=(2, *P.shape))
            ratio = np.max(np.abs(soft_bellman(Q1, R, pi, gamma) - soft_bellman(Q2, R, pi, gamma))) / np.max(np.abs(Q1 - Q2))
            worst = max(worst, ratio / gamma)
            bad += ratio > gamma + 1e-9
    out.append(CheckReport("contraction", n_pairs, int(bad), float(worst), t.ms, {"gamma": gamma}))

    with _Timer() as t:
        bad, worst = 0, 0.0
        for _ in range(n_pairs):
            Q = rng.normal(scale=10.0, size=(4, 3, 7))
            c = rng.normal(scale=100.0, size=(4, 3, 1))
            p = policy_from_q(Q)
            err = max(abs(p.sum(-1) - 1).max(), np.abs(policy_from_q(Q + c) - p).max())
            worst = max(worst, err / 1e-12)
            bad += bool((p < 0).any() or err > 1e-12)
    out.append(CheckReport("policy_validity_shift", n_pairs, int(bad), float(worst), t.ms))

    with _Timer() as t:
        bad, worst = 0, 0.0
        for _ in range(n_pairs):
            N = int(rng.integers(1, 200))
            c = float(rng.normal(scale=50.0))
            Q = np.full((2, 2, N), c)
            V = v_soft(Q, np.full((2, 2), 0.5))
            err = np.max(np.abs(V - (c + math.log(N))))
            worst = max(worst, err / 1e-12)
            bad += err > 1e-12
    out.append(CheckReport("equal_logits_value", n_pairs, int(bad), float(worst), t.ms))
    return out


def verify_reward_equivalence(game=None, n_trials=50, seed=1) -> CheckReport:
    """Loss on a reward equals the objective at that reward's soft fixed point, and T recovers R."""
    game = game or default_game()
    P, mu0, gamma = _tables(game)
    S, A, N = P.shape
    bad, worst, examples = 0, 0.0, []
    with _Timer() as t:
        for k, rng in enumerate(_streams(seed, n_trials)):
            pi = _policy(rng, S, A)
            Pi = rng.dirichlet(np.ones(N), size=(S, A))
            R = rng.normal(size=P.shape) if k else np.zeros(P.shape)
            Qs, _ = solve_fixed_point(R, pi, gamma, Pi)
            rho = occupancy(pi, P, mu0, gamma)
            gap = abs(l_occupancy(Pi, R, pi, P, mu0, gamma) - j_compact(Qs, pi, rho, mu0, gamma, Pi))
            rec = float(np.max(np.abs(inverse_soft_bellman(Qs, pi, gamma, Pi) - R)))
            worst = max(worst, gap / 1e-6, rec / 1e-8)
            if gap >= 1e-6 or rec >= 1e-8:
                bad += 1
                examples.append({"trial": k, "loss_gap": gap, "reward_error": rec})
    return CheckReport("reward_equivalence", n_trials, bad, float(worst), t.ms, counterexamples=examples)


def verify_telescoping(game=None, n_trials=50, seed=2) -> CheckReport:
    """Compact and occupancy forms of the objective agree."""
    game = game or default_game()
    P, mu0, gamma = _tables(game)
    S, A, _ = P.shape
    bad, worst = 0, 0.0
    with _Timer() as t:
        for rng in _streams(seed, n_trials):
            pi = _policy(rng, S, A)
            Q = rng.normal(scale=rng.uniform(0.1, 5.0), size=P.shape)
            gap = abs(j_compact(Q, pi, occupancy(pi, P, mu0, gamma), mu0, gamma) - j_occupancy(Q, pi, P, mu0, gamma))
            worst = max(worst, gap / 1e-6)
            bad += gap >= 1e-6
    return CheckReport("telescoping", n_trials, int(bad), float(worst), t.ms)


def verify_concavity(game=None, n_pairs=100, seed=3, tol=1e-9) -> CheckReport:
    """Midpoint test of g(Q) = J(Pi^Q, Q)."""
    game = game or default_game()
    P, mu0, gamma = _tables(game)
    S, A, _ = P.shape
    bad, worst = 0, 0.0
    with _Timer() as t:
        for rng in _streams(seed, n_pairs):
            pi = _policy(rng, S, A)
            rho = occupancy(pi, P, mu0, gamma)
            Q1, Q2 = rng.normal(scale=rng.uniform(0.1, 5.0), size=(2, *P.shape))
            mid = j_compact(0.5 * (Q1 + Q2), pi, rho, mu0, gamma)
            chord = 0.5 * (j_compact(Q1, pi, rho, mu0, gamma) + j_compact(Q2, pi, rho, mu0, gamma))
            shortfall = chord - mid
            worst = max(worst, shortfall / tol)
            bad += shortfall > tol
    return CheckReport("concavity", n_pairs, int(bad), float(worst), t.ms)


def _bound_trial(rng, P, mu0, gamma, eps, rhs):
    S, A, N = P.shape
    pi = _policy(rng, S, A)
    pert, kl = tilted_pair(pi, rng, eps)
    Q = rng.uniform(0.0, 1.0, size=P.shape)
    Pi = rng.dirichlet(np.ones(N), size=(S, A))
    out = {"kl": kl}
    # discrete form, Pi = Pi^Q
    inputs = BoundInputs.build(pi, pert, Q, gamma, eps)
    lhs = abs(phi_objective(Q, pi, P, mu0, gamma).value - phi_objective(Q, pert, P, mu0, gamma).value)
    out["discrete"] = (lhs, rhs(inputs, "discrete"))
    # continuous form with an explicit actor
    inputs_c = BoundInputs.build(pi, pert, Q, gamma, eps, explicit=Pi)
    lhs = abs(phi_objective(Q, pi, P, mu0, gamma, Pi).value - phi_objective(Q, pert, P, mu0, gamma, Pi).value)
    out["continuous"] = (lhs, rhs(inputs_c, "continuous"))
    # maximized objectives; ln P has max 0 after the shift that leaves Pi^Q fixed
    lhs = abs(phi_supremum(pi, P, mu0, gamma) - phi_supremum(pert, P, mu0, gamma))
    inputs_s = BoundInputs.build(pi, pert, np.zeros(P.shape), gamma, eps)
    out["maximized"] = (lhs, rhs(inputs_s, "discrete"))
    return out, (pi, pert, Q, Pi)


def verify_perturbation_bound(
    game=None,
    n_trials: int = 100,
    eps_grid=(1e-4, 1e-3, 1e-2),
    seed: int = 4,
    rhs: Callable = bound_rhs,
    max_slope: float = 0.6,
    ascent_checks: int = 3,
    map_fn: Callable = map,
) -> list[CheckReport]:
    """Perturbation bound (discrete and continuous forms), its maximized version, and the sqrt(eps) slope.

    ``rhs`` is injectable so the mutation self-test can hand in a broken bound.
    ``map_fn`` runs the independent trials; pass a pool's ``map`` to fan out.
    """
    game = game or default_game()
    P, mu0, gamma = _tables(game)
    forms = ("discrete", "continuous", "maximized")
    reports = {f: {"bad": 0, "worst": 0.0, "examples": [], "ms": 0.0} for f in forms}
    mean_lhs = {f: [] for f in forms}
    with _Timer() as total:
        for e_idx, eps in enumerate(eps_grid):
            rngs = _streams(seed * 1000 + e_idx, n_trials)
            t0 = time.perf_counter()
            results = list(map_fn(lambda r: _bound_trial(r, P, mu0, gamma, eps, rhs), rngs))
            per_trial_ms = 1000.0 * (time.perf_counter() - t0) / len(forms)
            for f in forms:
                lhs_vals = []
                for k, (res, instance) in enumerate(results):
                    lhs, r = res[f]
                    lhs_vals.append(lhs)
                    ratio = lhs / r if r > 0 else (0.0 if lhs == 0 else math.inf)
                    reports[f]["worst"] = max(reports[f]["worst"], ratio)
                    if lhs > r:
                        reports[f]["bad"] += 1
                        if len(reports[f]["examples"]) < 5:
                            pi, pert, Q, Pi = instance
                            reports[f]["examples"].append(
                                {"eps": eps, "trial": k, "lhs": lhs, "rhs": r, "policy": pi, "perturbed": pert, "Q": Q, "gamma": gamma}
                            )
                reports[f]["ms"] += per_trial_ms
                mean_lhs[f].append(float(np.mean(lhs_vals)))

    out = []
    for f in forms:
        rep = reports[f]
        out.append(
            CheckReport(
                f"perturbation_bound_{f}",
                n_trials * len(eps_grid),
                rep["bad"],
                float(rep["worst"]),
                rep["ms"],
                {"eps_grid": list(eps_grid), "mean_lhs": mean_lhs[f], "kl_log_base": KL_LOG_BASE},
                rep["examples"],
            )
        )

    with _Timer() as t:
        eps_arr = np.asarray(eps_grid, dtype=np.float64)
        pos = eps_arr > 0
        slopes = {}
        for f in forms:
            y = np.asarray(mean_lhs[f])[pos]
            ok = pos.sum() > 1 and np.all(y > 0)
            slopes[f] = float(np.polyfit(np.log(eps_arr[pos]), np.log(y), 1)[0]) if ok else 0.0
        bad = sum(s > max_slope for s in slopes.values())
    out.append(CheckReport("sqrt_eps_slope", len(forms), int(bad), max(slopes.values()) / max_slope, t.ms, {"slopes": slopes, "limit": max_slope}))

    # the closed-form supremum is cross-checked against the concave ascent on a few policies
    with _Timer() as t:
        bad, worst, details = 0, 0.0, []
        S, A, _ = P.shape
        for rng in _streams(seed + 77, ascent_checks):
            pi = _policy(rng, S, A)
            closed = phi_supremum(pi, P, mu0, gamma)
            ascent = phi_supremum_ascent(pi, P, mu0, gamma, rng, restarts=2)
            gap = closed - ascent
            details.append({"closed": closed, "ascent": ascent})
            worst = max(worst, abs(gap) / 1e-3)
            bad += gap < -1e-9 or gap > 1e-3
    out.append(CheckReport("supremum_cross_check", ascent_checks, int(bad), float(worst), t.ms, {"pairs": details}))
    return out


def monte_carlo_phi(game, Q, ally_policy, n_rollouts, rng, Pi=None, batch=200_000) -> tuple[float, float]:
    """Monte-Carlo estimate of the objective and its standard error.

    Each rollout starts from the game's initial distribution, stops after a
    Geometric(1 - gamma) number of steps, and scores the last transition, so
    that transition is a draw from the normalized occupancy. States are
    advanced in bulk through the game's enumerated transition table.
    """
    P = marginalized_transition_matrix(game)
    gamma = game.spec.gamma
    mu0 = game.initial_distribution()
    V = v_soft(Q, ally_policy) if Pi is None else v_policy(Q, ally_policy, Pi)
    S, A, _ = P.shape
    pi_cdf = np.cumsum(ally_policy, axis=1)
    P_cdf = np.cumsum(P, axis=2)
    mu_cdf = np.cumsum(mu0)
    total, total_sq, n_done = 0.0, 0.0, 0
    while n_done < n_rollouts:
        m = min(batch, n_rollouts - n_done)
        s0 = np.minimum(np.searchsorted(mu_cdf, rng.random(m) * mu_cdf[-1], side="right"), S - 1)
        s = s0.copy()
        stop = rng.geometric(1.0 - gamma, size=m) - 1  # steps before the scored one
        score = np.zeros(m)
        alive = np.ones(m, dtype=bool)
        t = 0
        while alive.any():
            idx = np.flatnonzero(alive)
            u = rng.random(len(idx))
            a = np.minimum((pi_cdf[s[idx]] <= (u * pi_cdf[s[idx], -1])[:, None]).sum(axis=1), A - 1)
            u = rng.random(len(idx))
            cdf = P_cdf[s[idx], a]
            nxt = np.minimum((cdf <= (u * cdf[:, -1])[:, None]).sum(axis=1), S - 1)
            last = stop[idx] == t
            hit = idx[last]
            score[hit] = Q[s[hit], a[last], nxt[last]] - gamma * V[nxt[last]]
            alive[hit] = False
            s[idx] = nxt
            t += 1
        x = score - (1.0 - gamma) * V[s0]
        total += x.sum()
        total_sq += (x**2).sum()
        n_done += m
    mean = total / n_done
    var = max(total_sq / n_done - mean**2, 0.0)
    return float(mean), float(math.sqrt(var / n_done))


def simulate_phi(game, Q, ally_policy, n_rollouts, rng) -> tuple[float, float]:
    """Slow twin of ``monte_carlo_phi`` that samples the game's own scripts and dynamics.

    The horizon is ignored, matching the stationary tabular model.
    """
    gamma = game.spec.gamma
    V = v_soft(Q, ally_policy)
    xs = np.empty(n_rollouts)
    for i in range(n_rollouts):
        state = game.reset(rng)
        s0 = game.state_index(state)
        for _ in range(rng.geometric(1.0 - gamma)):
            s = game.state_index(state)
            a = int(rng.choice(ally_policy.shape[1], p=ally_policy[s]))
            state, _ = game.dynamics(state, (a,), game.sample_enemy_action(state, rng))
        nxt = game.state_index(state)
        xs[i] = Q[s, a, nxt] - gamma * V[nxt] - (1.0 - gamma) * V[s0]
    return float(xs.mean()), float(xs.std() / math.sqrt(n_rollouts))


def verify_monte_carlo(game=None, n_rollouts=1_000_000, n_simulated=20_000, seed=5) -> CheckReport:
    """Exact objective vs sampled estimates (vectorized and step-by-step), 3 standard errors."""
    game = game or default_game()
    P, mu0, gamma = _tables(game)
    S, A, _ = P.shape
    rng = np.random.default_rng(seed)
    pi = _policy(rng, S, A)
    Q = rng.normal(size=P.shape)
    with _Timer() as t:
        exact = phi_objective(Q, pi, P, mu0, gamma).value
        fast, se_fast = monte_carlo_phi(game, Q, pi, n_rollouts, rng)
        slow, se_slow = simulate_phi(game, Q, pi, n_simulated, rng)
    z = [abs(fast - exact) / se_fast, abs(slow - exact) / se_slow]
    details = {"exact": exact, "vectorized": [fast, se_fast], "simulated": [slow, se_slow], "z": z}
    return CheckReport("monte_carlo_phi", 2, int(sum(v > 3.0 for v in z)), max(z) / 3.0, t.ms, details)


def mutation_selftest(game=None, n_trials=10, seed=6) -> CheckReport:
    """The bound suite must reject a sign-flipped right-hand side."""
    with _Timer() as t:
        mutant = verify_perturbation_bound(game, n_trials, rhs=lambda i, f: -bound_rhs(i, f), seed=seed, ascent_checks=0)
        caught = sum(r.violations for r in mutant if r.check_name.startswith("perturbation_bound"))
    return CheckReport("mutation_selftest", 1, int(caught == 0), 0.0 if caught else math.inf, t.ms, {"mutant_violations": caught})


def run_suite(name: str = "chain", game: MarkovGame | None = None) -> dict:
    """Run a named group of checks and assemble the report."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    game = game or default_game()
    reports: list[CheckReport] = []
    if name in ("chain", "operators"):
        reports += verify_operators(game)
    if name in ("chain", "reward_equivalence"):
        reports.append(verify_reward_equivalence(game))
    if name in ("chain", "telescoping"):
        reports.append(verify_telescoping(game))
    if name in ("chain", "concavity"):
        reports.append(verify_concavity(game))
    if name in ("chain", "bounds"):
        reports += verify_perturbation_bound(game)
    if name in ("chain", "monte_carlo"):
        reports.append(verify_monte_carlo(game))
    if name in ("chain", "selftest"):
        reports.append(mutation_selftest(game))
    return {
        "suite": name,
        "kl_log_base": KL_LOG_BASE,
        "passed": all(r.passed for r in reports),
        "checks": [r.to_dict() for r in reports],
    }


REPORT_KEYS = ("check_name", "trials", "violations", "worst_ratio", "runtime_ms")


def validate_report(report: dict) -> None:
    """Raise ValueError unless ``report`` has the documented verify-report shape."""
    for key in ("suite", "kl_log_base", "passed", "checks"):
        if key not in report:
            raise ValueError(f"report is missing {key!r}")
    for check in report["checks"]:
        for key in REPORT_KEYS:
            if key not in check:
                raise ValueError(f"check {check.get('check_name')} is missing {key!r}")
        if not isinstance(check["trials"], int) or not isinstance(check["violations"], int):
            raise ValueError("trials and violations must be integers")
