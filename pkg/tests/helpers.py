from __future__ import annotations

from imaxppo.config import parse_config

SMALL = """
env: {{name: gridminer, difficulty: {difficulty}, width: 6, height: 6, horizon: 12, gold_total: 6, n_piles: 3}}
algorithm: {algorithm}
ppo: {{rollout_length: 48, workers: 2, hidden: [16], mini_epochs: 2}}
imitator: {{hidden: [16], batch_size: 32, updates_per_iter: 2, buffer_capacity: 2000}}
run: {{total_steps: {steps}, eval_episodes: 4, seeds: {seeds}, checkpoint_every: 2, output_dir: {out}}}
"""


def small_config(algorithm="imax_ppo", steps=192, seeds=(0,), out="runs/test", difficulty="easy"):
    return parse_config(SMALL.format(algorithm=algorithm, difficulty=difficulty, steps=steps, seeds=list(seeds), out=out))
