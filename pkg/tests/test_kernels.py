from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imaxppo import _kernels
from imaxppo._kernels import _fallback

BACKENDS = _kernels.backends()
needs_compiled = pytest.mark.skipif("compiled" not in BACKENDS, reason="compiled extension not built")
compiled = BACKENDS.get("compiled")


def test_backend_selected_at_import():
    assert _kernels.BACKEND in BACKENDS
    assert _kernels.BACKEND == ("compiled" if compiled is not None else "python")


def gold_grids():
    return st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s).integers(0, 3, size=(5, 7)) * (np.random.default_rng(s + 1).random((5, 7)) < 0.3))


@needs_compiled
@settings(max_examples=200, deadline=None)
@given(gold=gold_grids(), r=st.integers(0, 4), c=st.integers(0, 6))
def test_gridminer_scripts_agree(gold, r, c):
    for name in ("nearest_gold", "greedy_action", "lookahead_action"):
        assert getattr(compiled, name)(r, c, gold) == getattr(_fallback, name)(r, c, gold), name
    assert compiled.gold_potential(r, c, gold) == _fallback.gold_potential(r, c, gold)
    for a in range(5):
        assert compiled.clamp_move(r, c, a, 5, 7) == _fallback.clamp_move(r, c, a, 5, 7)


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 20), K=st.integers(1, 4))
def test_gae_agrees_bitwise(seed, T, K):
    rng = np.random.default_rng(seed)
    r, v, d = rng.normal(size=(T, K)), rng.normal(size=(T + 1, K)), rng.random((T, K)) < 0.2
    assert np.array_equal(compiled.gae(r, v, d, 0.99, 0.95), _fallback.gae(r, v, d, 0.99, 0.95))


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 6), radius=st.integers(0, 4))
def test_visibility_agrees(seed, n, radius):
    rng = np.random.default_rng(seed)
    center = rng.integers(0, 8, 2)
    others = rng.integers(0, 8, (n, 2))
    assert np.array_equal(compiled.chebyshev_visible(center, others, radius), _fallback.chebyshev_visible(center, others, radius))


def _trace(pure: bool) -> list:
    code = (
        "import json, sys; sys.path.insert(0, 'tests');"
        "from helpers import small_config; from imaxppo.marl.trainer import Trainer; from imaxppo import _kernels;"
        "t = Trainer(small_config(difficulty='hard')); rows = [t.train_iteration() for _ in range(3)];"
        "[r.pop('wall_ms') for r in rows]; print(json.dumps({'backend': _kernels.BACKEND, 'rows': rows}))"
    )
    env = dict(os.environ, IMAXPPO_PURE_PYTHON="1" if pure else "0")
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = subprocess.run([sys.executable, "-c", code], env=env, cwd=root, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


@needs_compiled
def test_training_trace_is_backend_independent():
    a, b = _trace(False), _trace(True)
    assert (a["backend"], b["backend"]) == ("compiled", "python")
    assert a["rows"] == b["rows"]


def test_benchmark_runs(capsys):
    sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "benchmarks"))
    import bench_kernels

    bench_kernels.main(["--repeat", "1"])
    out = capsys.readouterr().out
    assert "gae" in out and "lookahead_action" in out
