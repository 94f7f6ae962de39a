"""Finite-volume simulator for oxytactic cells in an incompressible fluid.

Cells diffuse with a porous-medium law, drift up oxygen gradients and grow;
oxygen is transported, diffuses and is consumed; the fluid is driven by the
weight of the cells.  See the README for the command line.
"""
from .config import Config, load_config, parse_config
from .coupler import RunConfig, SimState, advance, run, step
from .errors import (BiofluxError, CFLViolation, CompatibilityError, ConfigError, DomainError,
                     HypothesisError, InsufficientHorizon, InvalidParameter, RangeError,
                     SnapshotFormatError, SolverError, UnsupportedVersion)
from .grid import Faces, Grid
from .model import (Consumption, Growth, ModelParams, Potential, Purpose, Regime, Sensitivity,
                    Table, validate_hypotheses)
from .scenarios import scenario

__version__ = "0.1.0"

__all__ = [
    "BiofluxError", "CFLViolation", "CompatibilityError", "Config", "ConfigError", "Consumption",
    "DomainError", "Faces", "Grid", "Growth", "HypothesisError", "InsufficientHorizon",
    "InvalidParameter", "ModelParams", "Potential", "Purpose", "RangeError", "Regime", "RunConfig",
    "Sensitivity", "SimState", "SnapshotFormatError", "SolverError", "Table", "UnsupportedVersion",
    "advance", "load_config", "parse_config", "run", "scenario", "step", "validate_hypotheses",
]
