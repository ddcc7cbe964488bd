"""Hot kernels with a compiled core and a pure-Python fallback.

The compiled extension ``_core`` is used when it imports; setting
``IMAXPPO_PURE_PYTHON=1`` forces the fallback. Both backends return
bit-identical results, so the choice never changes a training trace.
"""

from __future__ import annotations

import os

from . import _fallback

_FUNCS = (
    "gae",
    "clamp_move",
    "nearest_gold",
    "greedy_action",
    "gold_potential",
    "lookahead_action",
    "chebyshev_visible",
)

try:
    if os.environ.get("IMAXPPO_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _core as _impl

    BACKEND = "compiled"
except ImportError:
    _impl = _fallback
    BACKEND = "python"

gae = _impl.gae
clamp_move = _impl.clamp_move
nearest_gold = _impl.nearest_gold
greedy_action = _impl.greedy_action
gold_potential = _impl.gold_potential
lookahead_action = _impl.lookahead_action
chebyshev_visible = _impl.chebyshev_visible

UP, DOWN, LEFT, RIGHT, MINE = _fallback.UP, _fallback.DOWN, _fallback.LEFT, _fallback.RIGHT, _fallback.MINE


def backends():
    """Map of available backend name -> module, for tests and benchmarks."""
    out = {"python": _fallback}
    try:
        from . import _core

        out["compiled"] = _core
    except ImportError:
        pass
    return out
