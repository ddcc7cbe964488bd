"""Run a theory check suite and write its JSON report."""

from __future__ import annotations

import json
from pathlib import Path

from ..theory import run_suite, validate_report


def run_verify(suite: str = "chain", out=None) -> dict:
    report = run_suite(suite)
    validate_report(report)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2))
    return report
