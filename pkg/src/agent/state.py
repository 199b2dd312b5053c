"""State carried through the LangGraph pipeline."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..core.config import RunConfig
from ..core.errors import DivasError
from ..core.models import BlockCollection, BlockDecomposition, BlockInference, DataBlock, JointStructure
from ..core.report import DiagnosticsReport, QQRecord


class ErrorRecord(BaseModel):
    """Machine-readable description of a failed stage."""

    kind: str
    message: str
    exit_code: int
    stage: Optional[str] = None
    details: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_exception(cls, error: Exception, stage: Optional[str] = None) -> "ErrorRecord":
        """Build a record from a DivasError, or wrap anything else as a numeric failure."""
        if isinstance(error, DivasError):
            return cls(**error.to_record(stage))
        return cls(
            kind="unexpected_error",
            message=f"{type(error).__name__}: {error}",
            exit_code=4,
            stage=stage,
        )


class PipelineState(BaseModel):
    """Everything the pipeline stages read and write."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: RunConfig
    blocks: List[DataBlock] = Field(default_factory=list)
    inferences: List[BlockInference] = Field(default_factory=list)
    qq: List[QQRecord] = Field(default_factory=list)
    structures: Dict[BlockCollection, JointStructure] = Field(
        default_factory=dict, description="Nonempty joint structures by collection"
    )
    searched: List[JointStructure] = Field(default_factory=list, description="Every searched collection")
    decompositions: List[BlockDecomposition] = Field(default_factory=list)
    report: Optional[DiagnosticsReport] = None
    stage: Optional[str] = None
    error: Optional[ErrorRecord] = None
    processing_complete: bool = False

    @property
    def failed(self) -> bool:
        return self.error is not None
