"""Services package initialization."""

from .diagnostics import assemble_report, enc, ect
from .ingest import ingest
from .joint_search import run_full_search
from .reconstruct import reconstruct_blocks
from .rot_bootstrap import rotational_bootstrap
from .signal_extract import extract_signal
from .synth import generate

__all__ = [
    "assemble_report",
    "enc",
    "ect",
    "ingest",
    "run_full_search",
    "reconstruct_blocks",
    "rotational_bootstrap",
    "extract_signal",
    "generate",
]
