from .config import ConfigError, RunConfig, build_config, read_config_file
from .metrics import exact_match, f1_score, normalize_answer, sample_std
from .runner import (
    EvalReport,
    FixtureError,
    QAReport,
    TrainReport,
    evaluate,
    make_env,
    make_gateway,
    qa_eval,
    recompute_from_trace,
    run,
    train,
)

__all__ = [
    "ConfigError", "EvalReport", "FixtureError", "QAReport", "RunConfig", "TrainReport", "build_config",
    "evaluate", "exact_match", "f1_score", "make_env", "make_gateway", "normalize_answer", "qa_eval",
    "read_config_file", "recompute_from_trace", "run", "sample_std", "train",
]
