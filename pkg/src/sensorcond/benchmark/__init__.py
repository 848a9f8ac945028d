"""Metrics, evaluation protocols, the benchmark grid, and report emission."""

from .metrics import error_rate, rmse
from .protocols import (EvalProtocol, fine_tune_eval, overlap_fine_tune_eval,
                        overlap_score, predict_dataset, sample_eval_combinations,
                        scratch_eval, select_overlap_combination, zero_shot_eval)
from .report import (group_records, records_jsonl, render_table, summarize,
                     welch_pvalues, write_report)
from .runner import (ALL_VARIANTS, BenchConfig, BenchReport, cell_key,
                     enumerate_cells, report_digest, run_benchmark, run_cell)

__all__ = [
    "ALL_VARIANTS", "BenchConfig", "BenchReport", "EvalProtocol", "cell_key",
    "enumerate_cells", "error_rate", "fine_tune_eval", "group_records",
    "overlap_fine_tune_eval", "overlap_score", "predict_dataset",
    "records_jsonl", "render_table", "report_digest", "rmse",
    "run_benchmark", "run_cell", "sample_eval_combinations", "scratch_eval",
    "select_overlap_combination", "summarize", "welch_pvalues",
    "write_report", "zero_shot_eval",
]
