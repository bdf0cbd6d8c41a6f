"""Experiment runner: configuration, per-cell runs, table output, reference checks and plotting."""

from .cells import SEED_TAGS, CellRecord, derive_seed, run_cell
from .config import OUTPUT_ENV, Cell, ExperimentConfig, default_config, load_config
from .plot import plot_figure2
from .tables import TablesResult, read_csv, reproduce_tables, run_cells, write_csv
from .verify import RowCheck, VerificationReport, load_fixture, verify_reference_rows

__all__ = [
    "Cell", "CellRecord", "ExperimentConfig", "OUTPUT_ENV", "RowCheck", "SEED_TAGS", "TablesResult",
    "VerificationReport", "default_config", "derive_seed", "load_config", "load_fixture", "plot_figure2",
    "read_csv", "reproduce_tables", "run_cell", "run_cells", "verify_reference_rows", "write_csv",
]
