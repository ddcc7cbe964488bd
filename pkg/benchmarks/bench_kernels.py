"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the per-call time of each backend and the
speedup. Inputs are fixed-seed and shaped like the training workload
(8x8 GridMiner boards, 256-step GAE over 4 workers).
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from imaxppo._kernels import backends


def workloads(rng):
    gold = rng.integers(0, 4, size=(8, 8)) * (rng.random((8, 8)) < 0.2)
    rewards, values = rng.normal(size=(256, 4)), rng.normal(size=(257, 4))
    dones = rng.random((256, 4)) < 0.03
    center, others = rng.integers(0, 8, 2), rng.integers(0, 8, (4, 2))
    return {
        "gae": lambda m: m.gae(rewards, values, dones, 0.99, 0.95),
        "greedy_action": lambda m: m.greedy_action(3, 4, gold),
        "lookahead_action": lambda m: m.lookahead_action(3, 4, gold),
        "gold_potential": lambda m: m.gold_potential(3, 4, gold),
        "chebyshev_visible": lambda m: m.chebyshev_visible(center, others, 3),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    mods = backends()
    if "compiled" not in mods:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':<20}" + "".join(f"{name + ' (us)':>16}" for name in mods) + f"{'speedup':>10}")
    for name, call in workloads(np.random.default_rng(0)).items():
        times = {}
        for backend, mod in mods.items():
            timer = timeit.Timer(lambda: call(mod))
            n, _ = timer.autorange()
            times[backend] = min(timer.repeat(args.repeat, n)) / n * 1e6
        speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{name:<20}" + "".join(f"{t:>16.2f}" for t in times.values()) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
