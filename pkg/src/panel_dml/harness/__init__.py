"""Monte Carlo experiments: grids, runner, summaries, reports and timing."""

from .config import ExperimentConfig, GridCell, config_from_dict, load_config, spec_from_entry
from .presets import PRESETS, preset, preset_names
from .report import REPORT_KINDS, emit_report
from .runner import (
    RESULTS_HEADER,
    ExperimentResult,
    ResultRow,
    read_results,
    replication_seed,
    run_experiment,
    run_replication,
    write_outputs,
)
from .summary import SUMMARY_HEADER, Summary, box_stats, summarize
from .timing import TimingRow, timing_benchmark

__all__ = [
    "ExperimentConfig",
    "GridCell",
    "config_from_dict",
    "load_config",
    "spec_from_entry",
    "PRESETS",
    "preset",
    "preset_names",
    "REPORT_KINDS",
    "emit_report",
    "RESULTS_HEADER",
    "ExperimentResult",
    "ResultRow",
    "read_results",
    "replication_seed",
    "run_experiment",
    "run_replication",
    "write_outputs",
    "SUMMARY_HEADER",
    "Summary",
    "box_stats",
    "summarize",
    "TimingRow",
    "timing_benchmark",
]
