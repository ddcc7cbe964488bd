"""Cross-run summary table (one row per env, difficulty and algorithm)."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .evaluate import wilson_interval
from .runner import RunManifest

SUMMARY_FIELDS = ("env", "difficulty", "algorithm", "mean_win_rate", "ci_low", "ci_high", "seeds", "episodes")


class MissingMetricsError(FileNotFoundError):
    pass


def read_final_evals(run_dir) -> tuple[RunManifest, list[dict]]:
    run_dir = Path(run_dir)
    manifest = RunManifest.read(run_dir)
    evals = []
    for seed in manifest.seeds:
        path = run_dir / f"seed_{seed}" / "eval.json"
        if not path.exists():
            raise MissingMetricsError(f"{path}: missing evaluation metrics")
        evals.append(json.loads(path.read_text()))
    return manifest, evals


def summary_rows(run_dirs) -> list[dict]:
    """Group runs by (env, difficulty, algorithm); mean of per-seed win rates, Wilson CI on pooled episodes."""
    if not run_dirs:
        raise ValueError("need at least one run directory")
    groups: dict[tuple, list[dict]] = {}
    for d in run_dirs:
        manifest, evals = read_final_evals(d)
        groups.setdefault((manifest.env, manifest.difficulty, manifest.algorithm), []).extend(evals)
    rows = []
    for (env, difficulty, algorithm), evals in groups.items():
        wins = sum(e["wins"] for e in evals)
        episodes = sum(e["episodes"] for e in evals)
        lo, hi = wilson_interval(wins, episodes)
        rows.append(
            {
                "env": env,
                "difficulty": difficulty,
                "algorithm": algorithm,
                "mean_win_rate": float(np.mean([e["win_rate"] for e in evals])),
                "ci_low": lo,
                "ci_high": hi,
                "seeds": " ".join(str(e["seed"]) for e in evals),
                "episodes": episodes,
            }
        )
    return rows


def emit_summary(run_dirs, out=None) -> str:
    """CSV text of ``summary_rows``; also written to ``out`` when given."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in summary_rows(run_dirs):
        w.writerow(row)
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text
