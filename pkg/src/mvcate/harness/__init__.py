from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .report import emit_plot, emit_table
from .run import ExperimentResult, ResultRow, read_results, results_to_csv, run, write_results

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "ResultRow",
    "emit_plot",
    "emit_table",
    "load_config",
    "parse_config",
    "read_results",
    "results_to_csv",
    "run",
    "write_results",
]
