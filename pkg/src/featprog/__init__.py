"""Programmable hierarchical feature generation for multivariate time series,
with a spin-gas Glauber dynamics simulator for synthetic data and model checks."""

from .dsl import FeatureProgram, OrderBlock, order_of, parse_expr, parse_program
from .engine import GenerationReport, evaluate_lineage, export_features, generate
from .kernels import WindowStat, difference, ratio, shift, square, window
from .programs import default_program, identity_program, resemblance_program
from .series import FeatureMatrix, FeatureSeries, Panel, drop_warmup, make_panel, read_panel_csv

__version__ = "0.1.0"

__all__ = [
    "FeatureMatrix", "FeatureProgram", "FeatureSeries", "GenerationReport", "OrderBlock",
    "Panel", "WindowStat", "default_program", "difference", "drop_warmup", "evaluate_lineage",
    "export_features", "generate", "identity_program", "make_panel", "order_of", "parse_expr",
    "parse_program", "ratio", "read_panel_csv", "resemblance_program", "shift", "square", "window",
]
