"""Adapters between run configurations, the numerical core and output files."""

from .config_loader import dump_config, load_config, parse_config
from .csv_export import ResultWriter, config_hash, read_provenance, read_table
from .presets import build_coupling, build_initial_data, piecewise_from_spec, piecewise_to_spec, tune_vanishing_mode

__all__ = [
    "load_config",
    "parse_config",
    "dump_config",
    "ResultWriter",
    "config_hash",
    "read_provenance",
    "read_table",
    "build_coupling",
    "build_initial_data",
    "piecewise_from_spec",
    "piecewise_to_spec",
    "tune_vanishing_mode",
]
