"""Report schema written to report.json."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

REPORT_SCHEMA_VERSION = "1.0"


class BlockSummary(BaseModel):
    """Ranks, noise level and perturbation bounds of one block."""

    index: int = Field(..., description="One-based block number")
    name: str
    d: int
    n: int
    max_rank: int
    estimated_rank: int = Field(..., description="r̂ from shrinkage")
    filtered_rank: int = Field(..., description="ř after angle filtering")
    final_rank: int = Field(..., description="Rank of all structure involving the block")
    sigma_hat: float
    phi_hat: Optional[float] = None
    psi_hat: Optional[float] = None
    theta0: Optional[float] = None
    theta0_object: Optional[float] = None
    signal_free: bool = False
    rank_deficient: bool = False
    trait_means: Optional[List[float]] = None
    object_means: Optional[List[float]] = None


class CollectionSummary(BaseModel):
    """Outcome of searching one block collection."""

    label: str = Field(..., description="One-based block numbers, e.g. '1,2'")
    blocks: List[str]
    rank: int
    directions_tried: int
    certified: bool = True
    rejection_reasons: List[str] = Field(default_factory=list)


class BlockAngles(BaseModel):
    """Angles between one estimated direction and one block."""

    block: str
    included: bool
    trait_angle: Optional[float] = None
    trait_theta2: Optional[float] = None
    trait_upper: Optional[float] = None
    phi_hat: Optional[float] = None
    theta0: Optional[float] = None
    correlated_excluded: bool = Field(default=False, description="Excluded block whose upper bound is below θ₀")
    object_angle: Optional[float] = None
    object_theta2: Optional[float] = None
    object_upper: Optional[float] = None
    psi_hat: Optional[float] = None
    theta0_object: Optional[float] = None
    ect: Optional[float] = Field(None, description="Percentage, included blocks only")
    non_informative: bool = False


class DirectionRecord(BaseModel):
    """Diagnostics of one rotated scores direction."""

    collection: str
    mode: int
    enc: float
    blocks: List[BlockAngles] = Field(default_factory=list)
    scores: List[float] = Field(default_factory=list, description="Rotated score coordinates over objects")


class QQRecord(BaseModel):
    """Q-Q data of one block's noise estimate."""

    block: str
    rank: List[int]
    observed: List[float]
    theoretical: List[float]
    env_min: List[float]
    env_max: List[float]
    naive: Optional[List[float]] = None
    fraction_inside: float


class DiagnosticsReport(BaseModel):
    """Everything a run reports, raw numbers only."""

    schema_version: str = REPORT_SCHEMA_VERSION
    config_echo: Dict[str, Any] = Field(default_factory=dict)
    blocks: List[BlockSummary] = Field(default_factory=list)
    collections: List[CollectionSummary] = Field(default_factory=list)
    directions: List[DirectionRecord] = Field(default_factory=list)
    qq: List[QQRecord] = Field(default_factory=list)

    def collection_ranks(self) -> Dict[str, int]:
        return {c.label: c.rank for c in self.collections}

    def block(self, name: str) -> Optional[BlockSummary]:
        return next((b for b in self.blocks if b.name == name), None)
