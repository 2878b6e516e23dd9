"""Experiment plumbing: flat-key configs, RFC-4180 CSV logs, the run/sweep
drivers, the named verification suites, and the ``irelab`` command."""

from ..records import CheckResult, TrajectoryLog
from .config import ConfigError, ExperimentConfig, parse_config, to_text
from .csvio import FLOAT_FMT, read_log_csv, write_log_csv, write_rows_csv
from .main import main
from .runner import (
    OUT_ENV,
    SWEEP_KEYS,
    build_landscape,
    default_theta0,
    resolve_out,
    run,
    sweep,
)
from .verify import SUITES, verify

__all__ = [
    "CheckResult",
    "TrajectoryLog",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "to_text",
    "FLOAT_FMT",
    "read_log_csv",
    "write_log_csv",
    "write_rows_csv",
    "main",
    "OUT_ENV",
    "SWEEP_KEYS",
    "build_landscape",
    "default_theta0",
    "resolve_out",
    "run",
    "sweep",
    "SUITES",
    "verify",
]
