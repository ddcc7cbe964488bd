from .evaluate import EvalResult, evaluate_winrate, wilson_interval
from .runner import RunManifest, load_policy_checkpoint, load_trainer_state, run_train, save_trainer_state
from .summary import emit_summary, summary_rows
from .verify import run_verify

__all__ = [
    "EvalResult",
    "RunManifest",
    "emit_summary",
    "evaluate_winrate",
    "load_policy_checkpoint",
    "load_trainer_state",
    "run_train",
    "run_verify",
    "save_trainer_state",
    "summary_rows",
    "wilson_interval",
]
