"""Experiment orchestration: calibration, crime sweeps and reporting."""
from ..seeding import mask_seed_for
from .config import ExperimentConfig, config_from_dict, load_config
from .report import load_table, read_results_csv, report, write_results_csv
from .runner import (CaseFailure, CaseResult, ResultsTable, SummaryRow, calibrate_cs,
                     calibrate_dictl, run_crime, run_crime1, run_crime2, run_mask_stats)

__all__ = [
    "ExperimentConfig", "config_from_dict", "load_config", "mask_seed_for",
    "calibrate_cs", "calibrate_dictl", "run_crime", "run_crime1", "run_crime2", "run_mask_stats",
    "CaseFailure", "CaseResult", "ResultsTable", "SummaryRow",
    "report", "load_table", "read_results_csv", "write_results_csv",
]
