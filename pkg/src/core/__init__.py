"""Core package initialization."""

from .config import BlockSource, CCPConfig, RunConfig, Settings, load_run_config, settings
from .errors import ConfigError, DivasError, IngestionError, NumericError
from .models import (
    BlockCollection,
    BlockInference,
    DataBlock,
    JointStructure,
    MPLaw,
    SignalEstimate,
    SubspaceBasis,
    SynthSpec,
)
from .report import DiagnosticsReport

__all__ = [
    "BlockSource",
    "CCPConfig",
    "RunConfig",
    "Settings",
    "load_run_config",
    "settings",
    "ConfigError",
    "DivasError",
    "IngestionError",
    "NumericError",
    "BlockCollection",
    "BlockInference",
    "DataBlock",
    "JointStructure",
    "MPLaw",
    "SignalEstimate",
    "SubspaceBasis",
    "SynthSpec",
    "DiagnosticsReport",
]
