"""Benchmark harness, report schema, task registry and CLI."""
from .harness import (
    CSV_COLUMNS, TRADEOFF_COLUMNS, BenchReport, SuiteConfig, attention_op_peak, check_contract, config_hash,
    measure_memory, measure_throughput, run_suite,
)
from .schema import load_schema, validate
from .tasks import TASKS, TaskInfo, load_task_data, random_batch, synthetic_task_data, task_info

__all__ = [
    "CSV_COLUMNS", "TRADEOFF_COLUMNS", "BenchReport", "SuiteConfig", "TASKS", "TaskInfo", "attention_op_peak",
    "check_contract", "config_hash", "load_schema", "load_task_data", "measure_memory", "measure_throughput",
    "random_batch", "run_suite", "synthetic_task_data", "task_info", "validate",
]
