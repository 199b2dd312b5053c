"""Core models for the divas pipeline."""

from enum import Enum
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

GOLDEN_XI = 1.0 - 2.0 / (1.0 + 5.0 ** 0.5)


class ShrinkerKind(str, Enum):
    """Singular value shrinkers."""
    OPTIMAL = "optimal"
    SOFT = "soft"
    HARD = "hard"


class SpaceTag(str, Enum):
    """Which side of a block a subspace lives on."""
    TRAIT = "trait"
    OBJECT = "object"


class LoadingPattern(str, Enum):
    """Loading layouts offered by the synthetic generator."""
    PINSTRIPE = "pinstripe-blocks"
    RANDOM = "random"


class NumericModel(BaseModel):
    """Base for models that carry numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class MPLaw(BaseModel):
    """Marchenko-Pastur law with aspect ratio beta and noise variance sigma2.

    Parameters are checked by the mp_dist functions so that a bad law surfaces as
    InvalidLawError rather than a validation error.
    """

    model_config = ConfigDict(frozen=True)

    beta: float = Field(..., description="Aspect ratio; values above 1 carry a point mass at 0")
    sigma2: float = Field(default=1.0, description="Noise variance")

    @classmethod
    def for_shape(cls, d: int, n: int, sigma2: float = 1.0) -> "MPLaw":
        """Law for a d x n matrix, using beta = (d ∧ n) / (d ∨ n)."""
        return cls(beta=min(d, n) / max(d, n), sigma2=sigma2)


class DataBlock(NumericModel):
    """One observed d_k x n matrix with its preprocessing record."""

    values: np.ndarray = Field(..., description="Traits on rows, objects on columns")
    block_name: str = Field(..., description="Label used in reports and file names")
    trait_centered: bool = Field(default=False, description="Every row sums to zero")
    object_centered: bool = Field(default=False, description="Every column sums to zero")
    logit_transformed: bool = Field(default=False, description="Entries were logit transformed")
    trait_means: Optional[np.ndarray] = Field(None, description="Removed row means (length d)")
    object_means: Optional[np.ndarray] = Field(None, description="Removed column means (length n)")

    @model_validator(mode="after")
    def _check_values(self) -> "DataBlock":
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("block values must be a 2-d matrix")
        d, n = values.shape
        if d < 2 or n < 2:
            raise ValueError(f"block {self.block_name!r} must be at least 2 x 2, got {d} x {n}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"block {self.block_name!r} has non-finite entries")
        if self.trait_centered:
            sums = np.abs(values.sum(axis=1))
            if np.any(sums > 1e-8 * np.linalg.norm(values, axis=1) + 1e-12):
                raise ValueError(f"block {self.block_name!r} is flagged trait-centered but rows do not sum to 0")
        if self.object_centered:
            sums = np.abs(values.sum(axis=0))
            if np.any(sums > 1e-8 * np.linalg.norm(values, axis=0) + 1e-12):
                raise ValueError(f"block {self.block_name!r} is flagged object-centered but columns do not sum to 0")
        self.values = values
        return self

    @property
    def d(self) -> int:
        return int(self.values.shape[0])

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    @property
    def max_rank(self) -> int:
        return min(self.d, self.n)


class SignalEstimate(NumericModel):
    """Shrinkage estimate of a block's low-rank signal."""

    U_hat: np.ndarray = Field(..., description="d x r_hat left singular vectors")
    D_hat: np.ndarray = Field(..., description="Shrunken singular values, descending")
    V_hat: np.ndarray = Field(..., description="n x r_hat right singular vectors")
    r_hat: int = Field(..., description="Estimated signal rank")
    sigma_hat: float = Field(..., description="Per-entry noise scale")
    raw_singulars: np.ndarray = Field(..., description="Full data spectrum")
    aspect_beta: float = Field(..., description="(d ∧ n) / (d ∨ n)")
    U_bar: np.ndarray = Field(..., description="All left singular vectors of the data")
    V_bar: np.ndarray = Field(..., description="All right singular vectors of the data")
    shrinker: ShrinkerKind = Field(default=ShrinkerKind.OPTIMAL)

    @property
    def is_empty(self) -> bool:
        return self.r_hat == 0


class ImputedNoise(NumericModel):
    """Noise matrix estimate with MP-redrawn singular values in the signal directions."""

    values: np.ndarray = Field(..., description="d x n noise estimate")
    imputed_count: int = Field(..., description="Number of imputed directions (r_hat)")
    draws: np.ndarray = Field(..., description="Unit-variance MP eigenvalue draws")
    imputed_singulars: np.ndarray = Field(..., description="Singular values placed in the signal directions")


class SubspaceBasis(NumericModel):
    """Orthonormal basis of a subspace of trait or object space."""

    matrix: np.ndarray = Field(..., description="ambient_dim x rank, orthonormal columns")
    space_tag: SpaceTag = Field(default=SpaceTag.TRAIT)

    @field_validator("matrix")
    @classmethod
    def _check_orthonormal(cls, matrix: np.ndarray) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.ndim != 2 or matrix.shape[1] > matrix.shape[0]:
            raise ValueError("basis must be ambient_dim x rank with rank <= ambient_dim")
        if matrix.shape[1]:
            gram = matrix.T @ matrix
            tol = 1e-10 * max(1.0, np.sqrt(matrix.shape[0]))
            if not np.allclose(gram, np.eye(matrix.shape[1]), atol=tol, rtol=0.0):
                raise ValueError("basis columns are not orthonormal")
        return matrix

    @classmethod
    def empty(cls, ambient_dim: int, space_tag: SpaceTag = SpaceTag.TRAIT) -> "SubspaceBasis":
        return cls(matrix=np.zeros((ambient_dim, 0)), space_tag=space_tag)

    @property
    def ambient_dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def rank(self) -> int:
        return int(self.matrix.shape[1])


class PerturbationBounds(BaseModel):
    """Bootstrap angle bounds for one block, in degrees."""

    phi_hat: float = Field(..., description="Trait-space perturbation bound")
    psi_hat: float = Field(..., description="Object-space perturbation bound")
    theta0: float = Field(..., description="Trait-space random direction bound at the filtered rank")
    theta0_object: float = Field(..., description="Object-space random direction bound at the filtered rank")
    filtered_rank: int = Field(..., description="Rank surviving the xi * theta0 filter")
    replications: int = Field(..., description="Bootstrap replications M")
    quantile: float = Field(..., description="Order-statistic level used for the bounds")
    xi: float = Field(default=GOLDEN_XI, description="Filtering fraction of theta0")

    @property
    def signal_free(self) -> bool:
        return self.filtered_rank == 0


class BootstrapCache(NumericModel):
    """Per-replication alignment matrices at the filtered rank."""

    trait_aligns: np.ndarray = Field(..., description="M x r x r replicate V°ᵀ V̂°")
    object_aligns: np.ndarray = Field(..., description="M x r x r replicate U°ᵀ Û°")

    @property
    def replications(self) -> int:
        return int(self.trait_aligns.shape[0])


class BootstrapResult(NumericModel):
    """Everything the rotational bootstrap hands downstream."""

    bounds: PerturbationBounds
    cache: BootstrapCache
    U_check: SubspaceBasis
    V_check: SubspaceBasis
    trait_angles: np.ndarray = Field(..., description="M x r_hat max angles by rank, trait space")
    object_angles: np.ndarray = Field(..., description="M x r_hat max angles by rank, object space")


class BlockInference(NumericModel):
    """A block together with its extraction and bootstrap results."""

    index: int = Field(..., description="Zero-based block index")
    block: DataBlock
    estimate: SignalEstimate
    noise: Optional[ImputedNoise] = None
    bootstrap: Optional[BootstrapResult] = None

    @property
    def name(self) -> str:
        return self.block.block_name

    @property
    def signal_free(self) -> bool:
        return self.bootstrap is None or self.bootstrap.bounds.signal_free

    @property
    def bounds(self) -> Optional[PerturbationBounds]:
        return None if self.bootstrap is None else self.bootstrap.bounds

    @property
    def V_check(self) -> SubspaceBasis:
        if self.bootstrap is None:
            return SubspaceBasis.empty(self.block.n, SpaceTag.TRAIT)
        return self.bootstrap.V_check

    @property
    def U_check(self) -> SubspaceBasis:
        if self.bootstrap is None:
            return SubspaceBasis.empty(self.block.d, SpaceTag.OBJECT)
        return self.bootstrap.U_check

    @property
    def nu1(self) -> float:
        return float(self.estimate.raw_singulars[0])


class BlockCollection(BaseModel):
    """A sorted, nonempty set of zero-based block indices."""

    model_config = ConfigDict(frozen=True)

    indices: Tuple[int, ...]

    @field_validator("indices")
    @classmethod
    def _sorted_unique(cls, indices: Tuple[int, ...]) -> Tuple[int, ...]:
        if not indices:
            raise ValueError("a block collection must be nonempty")
        if any(i < 0 for i in indices):
            raise ValueError("block indices are zero-based and nonnegative")
        return tuple(sorted(set(indices)))

    @classmethod
    def of(cls, *indices: int) -> "BlockCollection":
        return cls(indices=tuple(indices))

    @classmethod
    def from_label(cls, label: str) -> "BlockCollection":
        """Parse a one-based label such as '1,2'."""
        return cls(indices=tuple(int(part) - 1 for part in label.split(",") if part.strip()))

    @property
    def label(self) -> str:
        return ",".join(str(i + 1) for i in self.indices)

    @property
    def size(self) -> int:
        return len(self.indices)

    def contains(self, k: int) -> bool:
        return k in self.indices

    def is_strict_subset_of(self, other: "BlockCollection") -> bool:
        return set(self.indices) < set(other.indices)

    def search_key(self) -> Tuple[int, Tuple[int, ...]]:
        """Descending cardinality, then lexicographic."""
        return (-self.size, self.indices)


def collection_order(n_blocks: int) -> List[BlockCollection]:
    """Every nonempty collection of n_blocks blocks in search order."""
    order: List[BlockCollection] = []
    for size in range(n_blocks, 0, -1):
        order.extend(BlockCollection(indices=combo) for combo in combinations(range(n_blocks), size))
    return order


class IterationRecord(BaseModel):
    """One CCP iteration of a direction search."""

    iteration: int
    tau: float
    trait_angles: List[Optional[float]] = Field(default_factory=list, description="Angle to each block's V̌, degrees")
    angle_slack_max: float = Field(default=0.0, description="Largest angle-constraint slack")
    objective: float = 0.0
    certified: bool = True


class DirectionTrace(BaseModel):
    """CCP history for one candidate direction."""

    direction: int = Field(..., description="One-based direction number within the collection")
    iterations: List[IterationRecord] = Field(default_factory=list)
    accepted: bool = False
    rejection_reasons: List[str] = Field(default_factory=list)
    certified: bool = True


class JointStructure(NumericModel):
    """Estimated trait basis shared by exactly the blocks of one collection."""

    collection: BlockCollection
    scores_basis: np.ndarray = Field(..., description="n x r orthonormal basis")
    traces: List[DirectionTrace] = Field(default_factory=list)

    @property
    def rank(self) -> int:
        return int(self.scores_basis.shape[1])


class CollectionComponent(NumericModel):
    """One collection's contribution to one block."""

    collection: BlockCollection
    block_index: int
    loadings: np.ndarray = Field(..., description="d x r least-squares loadings")
    scores: np.ndarray = Field(..., description="n x r joint scores basis of the collection")
    rotation: np.ndarray = Field(..., description="r x r informative rotation Q")
    matrix: np.ndarray = Field(..., description="d x n component L Vᵀ")

    @property
    def rank(self) -> int:
        return int(self.scores.shape[1])

    @property
    def rotated_loadings(self) -> np.ndarray:
        return self.loadings @ self.rotation

    @property
    def rotated_scores(self) -> np.ndarray:
        return self.scores @ self.rotation


class BlockDecomposition(NumericModel):
    """Reconstruction of one block from the joint structures that include it."""

    block_index: int
    block_name: str
    components: List[CollectionComponent] = Field(default_factory=list)
    residual: np.ndarray
    final_rank: int = 0
    rank_deficient: bool = False

    def component_for(self, collection: BlockCollection) -> Optional[CollectionComponent]:
        for component in self.components:
            if component.collection == collection:
                return component
        return None


class SynthSpec(BaseModel):
    """Parameters of the synthetic multi-block construction."""

    n: int = Field(default=400, description="Number of objects")
    trait_dims: List[int] = Field(default_factory=lambda: [200, 400, 10000])
    collection_ranks: Dict[str, int] = Field(
        default_factory=lambda: {"1,2,3": 1, "1,2": 1, "1,3": 1, "2,3": 1},
        description="One-based collection label to rank",
    )
    pairwise_trait_angle: float = Field(default=60.0, description="Degrees between non-nested structures")
    noise_scale: float = Field(default=1.0, description="Per-entry noise standard deviation")
    signal_strength: float = Field(default=6.0, description="Loadings column norm in units of √(d ∨ n), the unit-noise bulk edge scale")
    seed: int = 0
    loading_pattern: LoadingPattern = LoadingPattern.PINSTRIPE

    @field_validator("trait_dims")
    @classmethod
    def _at_least_two(cls, dims: List[int]) -> List[int]:
        if not dims or any(d < 2 for d in dims):
            raise ValueError("every block needs at least 2 traits")
        return dims

    def collections(self) -> List[Tuple[BlockCollection, int]]:
        """Collections with positive rank, in search order."""
        pairs = [(BlockCollection.from_label(label), rank) for label, rank in self.collection_ranks.items() if rank > 0]
        return sorted(pairs, key=lambda pair: pair[0].search_key())


class TruthComponent(NumericModel):
    """Ground truth A_{i,k} = L_{i,k} V_iᵀ."""

    collection: BlockCollection
    block_index: int
    loadings: np.ndarray
    scores: np.ndarray
    matrix: np.ndarray


class SynthTruth(NumericModel):
    """Ground truth of a synthetic data set."""

    scores: Dict[str, np.ndarray] = Field(default_factory=dict, description="Collection label to V_i")
    components: List[TruthComponent] = Field(default_factory=list)
    noise: List[np.ndarray] = Field(default_factory=list)

    def components_of(self, k: int) -> List[TruthComponent]:
        return [c for c in self.components if c.block_index == k]

    def signal(self, k: int) -> np.ndarray:
        parts = self.components_of(k)
        return sum((c.matrix for c in parts[1:]), parts[0].matrix.copy()) if parts else np.zeros_like(self.noise[k])

    def trait_basis(self, k: int) -> np.ndarray:
        """Orthonormal basis of the true trait subspace of block k."""
        return _orth(np.hstack([c.scores for c in self.components_of(k)]))

    def object_basis(self, k: int) -> np.ndarray:
        """Orthonormal basis of the true object subspace of block k."""
        return _orth(np.hstack([c.loadings for c in self.components_of(k)]))


def _orth(matrix: np.ndarray) -> np.ndarray:
    u, s, _ = np.linalg.svd(matrix, full_matrices=False)
    keep = s > 1e-10 * max(1.0, s[0] if s.size else 0.0)
    return u[:, keep]
