"""IMAX-PPO / MAPPO trainer.

One iteration collects ``rollout_length`` env steps with the imitator in the
loop. It then updates, in order, the imitator's Q-net, the imitator's
policy net, the shared ally policy and the centralized critic.

Randomness is split from one root seed (``np.random.SeedSequence``):

    root -> env      -> worker k   (layouts and enemy draws of worker k)
         -> init                   (all parameter initialization)
         -> worker   -> worker k   (ally action draws of worker k)
         -> eval                   (evaluation episodes)
         -> imitator               (first-pass actions, predicted atoms, replay minibatches)
         -> update                 (PPO minibatch shuffles)

The imitator stream is never shared with the action streams, so the
zero-mask arm draws exactly the same actions as the MAPPO baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..config import RunConfig, make_game_from_config
from ..fnapprox import Adam, RunningNorm, clip_global_norm, make_net
from ..game import GlobalState
from ..imitation.buffer import local_buffer
from ..imitation.local import ImitatorNets, critic_update, predict_joint_atoms, sac_actor_update
from .agent import AllyAgent, gather_features, policy_width, state_inputs, value_width
from .ppo import categorical_kl, gae, masked_probs, ppo_actor_loss, ppo_critic_loss

STREAMS = ("env", "init", "worker", "eval", "imitator", "update")


class TrainingError(RuntimeError):
    def __init__(self, msg, dump=None):
        super().__init__(msg)
        self.dump = dump or {}


def seed_streams(seed: int, workers: int) -> dict:
    root = np.random.SeedSequence(seed)
    children = dict(zip(STREAMS, root.spawn(len(STREAMS))))
    return {
        "env": [np.random.default_rng(s) for s in children["env"].spawn(workers)],
        "worker": [np.random.default_rng(s) for s in children["worker"].spawn(workers)],
        "init": np.random.default_rng(children["init"]),
        "eval": children["eval"],
        "imitator": np.random.default_rng(children["imitator"]),
        "update": np.random.default_rng(children["update"]),
    }


@dataclass
class Rollout:
    x: np.ndarray  # (T * R, policy width), t-major
    actions: np.ndarray
    logp: np.ndarray
    probs: np.ndarray
    action_mask: np.ndarray
    values: np.ndarray  # (T + 1, R) critic outputs (normalized space when value_norm is on)
    rewards: np.ndarray  # (T, R)
    dones: np.ndarray  # (T, R)
    states: np.ndarray  # (T * R, value width)
    wins: int
    episodes: int
    il_accuracy: float | None


class Trainer:
    def __init__(self, cfg: RunConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        p, im = cfg.ppo, cfg.imitator
        self.game = g = make_game_from_config(cfg.env, p.gamma)
        self.n_workers = p.workers
        self.T = p.rollout_length // p.workers
        self.rngs = seed_streams(seed, p.workers)
        init = self.rngs["init"]
        self.policy = make_net([policy_width(g), *p.hidden, g.spec.ally_action_count], init, gain=p.gain, layer_norm=p.layer_norm)
        self.value = make_net([value_width(g), *p.hidden, 1], init, gain=1.0, layer_norm=p.layer_norm)
        self.imitator = ImitatorNets.build(g.observation_width, g.spec.ally_action_count, g.n_joint_atoms, init, tuple(im.hidden), p.gain, p.layer_norm)
        opt = dict(eps=p.adam_eps, weight_decay=p.weight_decay)
        self.opt_policy = Adam.for_params(self.policy.params(), lr=p.lr_actor, **opt)
        self.opt_value = Adam.for_params(self.value.params(), lr=p.lr_critic, **opt)
        self.opt_q = Adam.for_params(self.imitator.q_net.params(), lr=im.lr_q, **opt)
        self.opt_pi = Adam.for_params(self.imitator.pi_net.params(), lr=im.lr_pi, **opt)
        self.value_norm = RunningNorm()
        self.buffer = local_buffer(im.buffer_capacity, g.observation_width, g.spec.ally_action_count, g.n_joint_atoms)
        self.agent = AllyAgent(g, self.policy, self.imitator, cfg.algorithm)
        self.iteration = 0
        self.env_steps = 0
        self.states = [g.reset(self.rngs["env"][k]) for k in range(self.n_workers)]
        self.prevs = [np.zeros((g.spec.n_allies, g.observation_width)) for _ in range(self.n_workers)]
        self.starts = [True] * self.n_workers

    @property
    def uses_imitator(self) -> bool:
        return self.cfg.algorithm != "mappo_baseline"

    def optimizers(self) -> dict[str, Adam]:
        return {"policy": self.opt_policy, "value": self.opt_value, "psi_Q": self.opt_q, "psi_pi": self.opt_pi}

    def nets(self) -> dict:
        return {"policy": self.policy, "value": self.value, "psi_Q": self.imitator.q_net, "psi_pi": self.imitator.pi_net}

    # --- rollout ----------------------------------------------------------
    def collect(self) -> Rollout:
        g, n = self.game, self.game.spec.n_allies
        im_rng = self.rngs["imitator"]
        pred = self.cfg.imitator.train_prediction
        cols = {k: [] for k in ("x", "actions", "logp", "probs", "action_mask", "values", "rewards", "dones", "states")}
        tuples = {k: [] for k in ("obs", "action", "target", "mask", "probs", "next_obs", "next_mask", "next_probs", "done", "agent", "start", "t")}
        wins = episodes = 0
        f = gather_features(g, self.states, self.prevs)
        d = self.agent.decide(f, self.rngs["worker"], im_rng, prediction=pred)
        for t in range(self.T):
            s_in = state_inputs(g, self.states)
            v = self.value.forward(s_in)[:, 0]
            R = len(f.obs)
            reward = np.zeros(R)
            done = np.zeros(R, dtype=bool)
            target = np.zeros(R, dtype=np.int64)
            post_obs, post_mask = [], []
            start_rows = np.repeat(np.array(self.starts), n)
            step_rows = np.repeat([st.step for st in self.states], n)
            for e in range(self.n_workers):
                rows = slice(e * n, (e + 1) * n)
                tr = g.step(self.states[e], d["actions"][rows], self.rngs["env"][e])
                reward[rows] = tr.rewards
                for i in range(n):
                    target[e * n + i] = g.joint_atom_index(tr.enemy_atoms[i])
                    post_obs.append(g.observation_vector(tr.next_state, i))
                    post_mask.append(g.atom_mask(tr.next_state, i))
                if tr.terminal:
                    done[rows] = True
                    episodes += 1
                    wins += g.win_check(tr.next_state) == "ally_win"
                    self.states[e] = g.reset(self.rngs["env"][e])
                    self.prevs[e] = np.zeros_like(self.prevs[e])
                    self.starts[e] = True
                else:
                    self.states[e] = tr.next_state
                    self.prevs[e] = f.obs[rows]
                    self.starts[e] = False
            f_next = gather_features(g, self.states, self.prevs)
            d_next = self.agent.decide(f_next, self.rngs["worker"], im_rng, prediction=pred, draw_actions=t < self.T - 1)
            if self.uses_imitator:
                # probs at the post-step state: the next decision's, except on reset rows
                # where the imitator's value term is masked by ``done`` anyway
                for k, val in (
                    ("obs", f.obs),
                    ("action", d["actions"]),
                    ("target", target),
                    ("mask", f.atom_mask),
                    ("probs", d["probs"]),
                    ("next_obs", np.stack(post_obs)),
                    ("next_mask", np.stack(post_mask)),
                    ("next_probs", d_next["probs"]),
                    ("done", done),
                    ("agent", f.agent),
                    ("start", start_rows),
                    ("t", step_rows),
                ):
                    tuples[k].append(val)
            for k, val in (
                ("x", d["x"]),
                ("actions", d["actions"]),
                ("logp", d["logp"]),
                ("probs", d["probs"]),
                ("action_mask", f.action_mask),
                ("values", v),
                ("rewards", reward),
                ("dones", done),
                ("states", s_in),
            ):
                cols[k].append(val)
            f, d = f_next, d_next
        cols["values"].append(self.value.forward(state_inputs(g, self.states))[:, 0])
        self.env_steps += self.T * self.n_workers
        il_acc = None
        if self.uses_imitator:
            batch = {k: np.concatenate(v) for k, v in tuples.items()}
            il_acc = self.imitator_accuracy(batch)
            self.buffer.add_batch(**batch)
        stack = ("values", "rewards", "dones")
        return Rollout(
            **{k: (np.stack(v) if k in stack else np.concatenate(v)) for k, v in cols.items()},
            wins=int(wins),
            episodes=int(episodes),
            il_accuracy=il_acc,
        )

    def imitator_accuracy(self, batch: dict) -> float | None:
        """Top-1 joint-atom accuracy on rows where the ally sees at least one enemy."""
        informative = batch["mask"].sum(axis=1) > 1
        if not informative.any():
            return None
        pred = predict_joint_atoms(self.imitator, batch["obs"][informative], batch["action"][informative], batch["mask"][informative], "mode")
        return float(np.mean(pred == batch["target"][informative]))

    # --- updates ----------------------------------------------------------
    def update_imitator(self) -> dict:
        im = self.cfg.imitator
        out = {"il_loss": None, "il_actor_loss": None}
        if not self.uses_imitator or len(self.buffer) == 0 or im.updates_per_iter == 0:
            return out
        rng = self.rngs["imitator"]
        view = self.buffer.data
        start_idx = np.flatnonzero(view["start"][: len(self.buffer)])
        if len(start_idx) == 0:
            return out
        for _ in range(im.updates_per_iter):
            batch = self.buffer.sample(im.batch_size, rng)
            pick = start_idx[rng.integers(0, len(start_idx), size=min(im.batch_size, len(start_idx)))]
            starts = {k: v[pick] for k, v in view.items()}
            c = critic_update(self.imitator, self.opt_q, batch, starts, self.cfg.ppo.gamma, im.max_grad_norm, im.q_anchor, self.game.spec.horizon, im.critic_value)
            a = sac_actor_update(self.imitator, self.opt_pi, batch, im.max_grad_norm)
            for val in (c["il_loss"], a["actor_loss"]):
                if not np.isfinite(val):
                    raise TrainingError("imitator loss is not finite", {"batch": batch})
        out.update(il_loss=c["il_loss"], il_actor_loss=a["actor_loss"], il_kl=a["kl"])
        return out

    def update_ppo(self, ro: Rollout) -> dict:
        p = self.cfg.ppo
        values = self.value_norm.denormalize(ro.values) if p.value_norm else ro.values
        adv, ret = gae(ro.rewards, values, ro.dones, p.gamma, p.gae_lambda)
        adv, ret = adv.ravel(), ret.ravel()
        if p.value_norm:
            self.value_norm.update(ret)
            targets = self.value_norm.normalize(ret)
        else:
            targets = ret
        old_v = ro.values[:-1].ravel()
        if p.advantage_norm:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        rng = self.rngs["update"]
        B = len(adv)
        actor_losses, critic_losses = [], []
        for _ in range(p.mini_epochs):
            perm = rng.permutation(B)
            for idx in np.array_split(perm, p.minibatch_count):
                la, ga, _ = ppo_actor_loss(self.policy, ro.x[idx], ro.actions[idx], ro.logp[idx], adv[idx], ro.action_mask[idx], p.clip_ratio, p.entropy_coef)
                lc, gc = ppo_critic_loss(self.value, ro.states[idx], targets[idx], old_v[idx], p.clip_ratio)
                if not (np.isfinite(la) and np.isfinite(lc)):
                    raise TrainingError("PPO loss is not finite", {"x": ro.x[idx], "adv": adv[idx], "targets": targets[idx]})
                ga, _ = clip_global_norm(ga, p.max_grad_norm)
                self.opt_policy.step(self.policy.params(), ga)
                gc, _ = clip_global_norm([p.value_coef * gr for gr in gc], p.max_grad_norm)
                self.opt_value.step(self.value.params(), gc)
                actor_losses.append(la)
                critic_losses.append(lc)
        new_probs = masked_probs(self.policy.forward(ro.x), ro.action_mask)
        kl = float(np.mean(categorical_kl(ro.probs, new_probs)))
        return {"actor_loss": float(np.mean(actor_losses)), "critic_loss": float(np.mean(critic_losses)), "kl_old_new": kl}

    def train_iteration(self) -> dict:
        t0 = time.perf_counter()
        ro = self.collect()
        il = self.update_imitator()
        ppo = self.update_ppo(ro)
        self.iteration += 1
        return {
            "iter": self.iteration,
            "env_steps": self.env_steps,
            "actor_loss": ppo["actor_loss"],
            "critic_loss": ppo["critic_loss"],
            "il_loss": il["il_loss"],
            "il_accuracy": ro.il_accuracy,
            "win_rate": ro.wins / ro.episodes if ro.episodes else None,
            "episodes": ro.episodes,
            "kl_old_new": ppo["kl_old_new"],
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        }

    # --- persistence ------------------------------------------------------
    def state_arrays(self) -> tuple[dict, dict]:
        arrays, meta = {}, {}
        for role, net in self.nets().items():
            for name, p in zip(net.param_names(), net.params()):
                arrays[f"{role}/{name}"] = p.copy()
        for role, opt in self.optimizers().items():
            for k, (m, v) in enumerate(zip(opt.m, opt.v)):
                arrays[f"opt/{role}/m{k}"] = m.copy()
                arrays[f"opt/{role}/v{k}"] = v.copy()
            meta[f"opt/{role}/t"] = opt.t
        bs = self.buffer.state_dict()
        for k, v in bs["data"].items():
            arrays[f"buffer/{k}"] = v
        for e, s in enumerate(self.states):
            arrays[f"env{e}/allies"] = s.allies
            arrays[f"env{e}/enemies"] = s.enemies
            arrays[f"env{e}/env"] = s.env
            arrays[f"env{e}/prev"] = self.prevs[e]
        meta.update(
            iteration=self.iteration,
            env_steps=self.env_steps,
            seed=self.seed,
            buffer_cursor=bs["cursor"],
            buffer_size=bs["size"],
            value_norm=self.value_norm.state(),
            env_steps_index=[int(s.step) for s in self.states],
            starts=[bool(x) for x in self.starts],
            rng={
                "env": [r.bit_generator.state for r in self.rngs["env"]],
                "worker": [r.bit_generator.state for r in self.rngs["worker"]],
                "imitator": self.rngs["imitator"].bit_generator.state,
                "update": self.rngs["update"].bit_generator.state,
            },
        )
        return arrays, meta

    def load_state_arrays(self, arrays: dict, meta: dict) -> None:
        for role, net in self.nets().items():
            for name, p in zip(net.param_names(), net.params()):
                p[...] = arrays[f"{role}/{name}"]
        for role, opt in self.optimizers().items():
            for k in range(len(opt.m)):
                opt.m[k][...] = arrays[f"opt/{role}/m{k}"]
                opt.v[k][...] = arrays[f"opt/{role}/v{k}"]
            opt.t = int(meta[f"opt/{role}/t"])
        self.buffer.load_state_dict(
            {"cursor": meta["buffer_cursor"], "size": meta["buffer_size"], "data": {k: arrays[f"buffer/{k}"] for k in self.buffer.fields}}
        )
        self.states = [
            GlobalState(
                allies=np.asarray(arrays[f"env{e}/allies"], dtype=np.int64),
                enemies=np.asarray(arrays[f"env{e}/enemies"], dtype=np.int64),
                env=np.asarray(arrays[f"env{e}/env"], dtype=np.int64),
                step=int(meta["env_steps_index"][e]),
            )
            for e in range(self.n_workers)
        ]
        self.prevs = [np.array(arrays[f"env{e}/prev"], dtype=np.float64) for e in range(self.n_workers)]
        self.starts = list(meta["starts"])
        vn = meta["value_norm"]
        self.value_norm = RunningNorm(vn["mean"], vn["var"], vn["count"])
        for k in ("env", "worker"):
            for r, st in zip(self.rngs[k], meta["rng"][k]):
                r.bit_generator.state = st
        self.rngs["imitator"].bit_generator.state = meta["rng"]["imitator"]
        self.rngs["update"].bit_generator.state = meta["rng"]["update"]
        self.iteration = int(meta["iteration"])
        self.env_steps = int(meta["env_steps"])
