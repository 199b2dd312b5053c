"""Agent package initialization."""

from .graph import DivasPipeline
from .nodes import PipelineNodes
from .state import ErrorRecord, PipelineState

__all__ = [
    "DivasPipeline",
    "PipelineNodes",
    "ErrorRecord",
    "PipelineState",
]
