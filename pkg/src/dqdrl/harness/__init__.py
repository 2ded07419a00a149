"""Experiment configs, runner, metrics, plots and the command line."""
from .config import (ExperimentConfig, build_config, default_min_objective, load_config,
                     load_config_text, parse_config_text)
from .metrics import (METRICS_HEADER, MetricsRow, mean_elite_robustness, metrics_csv_text,
                      qd_score_auc, read_metrics_csv, rescore)
from .plots import emit_heatmap, emit_histogram, heatmap_csv_text, histogram_counts
from .runner import RunResult, load_grid_json, run_experiment, run_trials

__all__ = [
    "ExperimentConfig", "build_config", "default_min_objective", "load_config",
    "load_config_text", "parse_config_text",
    "METRICS_HEADER", "MetricsRow", "mean_elite_robustness", "metrics_csv_text",
    "qd_score_auc", "read_metrics_csv", "rescore",
    "emit_heatmap", "emit_histogram", "heatmap_csv_text", "histogram_counts",
    "RunResult", "load_grid_json", "run_experiment", "run_trials",
]
