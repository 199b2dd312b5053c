"""Main package initialization."""

__version__ = "0.1.0"

from .core import *
from .services import *
from .agent import *

__all__ = [
    "RunConfig",
    "load_run_config",
    "settings",
    "DivasError",
    "DataBlock",
    "BlockCollection",
    "DiagnosticsReport",
    "extract_signal",
    "rotational_bootstrap",
    "run_full_search",
    "reconstruct_blocks",
    "assemble_report",
    "generate",
    "ingest",
    "DivasPipeline",
    "PipelineState",
]
