"""Scenario configuration, Monte Carlo sweep drivers, dataset export, and
result persistence."""

from .config import ScenarioConfig, load_config, parse_config_text  # noqa: F401
from .results import SweepResult, SweepRow, write_result  # noqa: F401
from .sweeps import (  # noqa: F401
    run_baseline_comparison,
    run_cpf_eval,
    run_mse_scaling,
    run_ser_sweep,
)
from .dataset import export_training_dataset, simulate_temporal_series  # noqa: F401
