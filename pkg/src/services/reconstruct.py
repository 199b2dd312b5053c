"""Least-squares loadings, informative rotations and per-block reconstruction."""

import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import Field

from ..core.models import (
    BlockCollection,
    BlockDecomposition,
    CollectionComponent,
    DataBlock,
    JointStructure,
    NumericModel,
)
from .signal_extract import thin_svd

logger = logging.getLogger(__name__)

RANK_TOL = 1e-7


class ModeOfVariation(NumericModel):
    """One rotated loadings ⊗ scores outer product of a collection component."""

    collection: BlockCollection
    block_index: int
    mode: int = Field(..., description="One-based, ordered by decreasing energy")
    loading: np.ndarray = Field(..., description="d-vector of rotated loadings")
    score: np.ndarray = Field(..., description="n-vector of rotated scores")
    energy: float = Field(..., description="Frobenius norm of the mode matrix")


def fit_loadings(values: np.ndarray, scores: Sequence[np.ndarray]) -> Tuple[List[np.ndarray], bool]:
    """Minimum-norm least-squares loadings for X ≈ 𝔏 [𝔙_1 ... 𝔙_m]ᵀ.

    Returns the loadings split per scores block in the given order and whether the
    concatenation was rank deficient.
    """
    widths = [s.shape[1] for s in scores]
    if not widths or sum(widths) == 0:
        raise ValueError("fit_loadings needs at least one scores column")
    concatenated = np.hstack(scores)
    solution, _, rank, _ = np.linalg.lstsq(concatenated, values.T, rcond=None)
    deficient = np.linalg.matrix_rank(concatenated, tol=RANK_TOL) < concatenated.shape[1]
    if deficient:
        logger.warning("Scores concatenation has rank %d < %d columns; using the minimum-norm solution",
                       rank, concatenated.shape[1])
    loadings = solution.T
    bounds = np.cumsum([0] + widths)
    return [loadings[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])], bool(deficient)


def informative_rotation(stacked: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Right singular vectors of (stacked X)·𝔙, modes ordered by decreasing energy.

    Each column is signed so that its largest-magnitude entry is positive.
    """
    if scores.shape[1] == 0:
        return np.zeros((0, 0))
    _, _, q = thin_svd(stacked @ scores)
    pivots = np.argmax(np.abs(q), axis=0)
    signs = np.sign(q[pivots, np.arange(q.shape[1])])
    signs[signs == 0] = 1.0
    return q * signs


def _rotations(blocks: Sequence[DataBlock], structures: Dict[BlockCollection, JointStructure]) -> Dict[BlockCollection, np.ndarray]:
    rotations = {}
    for collection, structure in structures.items():
        stacked = np.vstack([blocks[k].values for k in collection.indices])
        rotations[collection] = informative_rotation(stacked, structure.scores_basis)
    return rotations


def reconstruct_block(
    k: int,
    block: DataBlock,
    structures: Dict[BlockCollection, JointStructure],
    rotations: Dict[BlockCollection, np.ndarray],
) -> BlockDecomposition:
    """Decompose one block over the joint structures whose collection includes it."""
    involved = sorted((c for c in structures if c.contains(k)), key=lambda c: c.search_key())
    if not involved:
        return BlockDecomposition(block_index=k, block_name=block.block_name, residual=block.values.copy())

    scores = [structures[c].scores_basis for c in involved]
    loadings, deficient = fit_loadings(block.values, scores)
    components = []
    total = np.zeros_like(block.values)
    for collection, basis, load in zip(involved, scores, loadings):
        matrix = load @ basis.T
        total += matrix
        components.append(CollectionComponent(
            collection=collection,
            block_index=k,
            loadings=load,
            scores=basis,
            rotation=rotations[collection],
            matrix=matrix,
        ))
    final_rank = int(np.linalg.matrix_rank(np.hstack(scores), tol=RANK_TOL))
    return BlockDecomposition(
        block_index=k,
        block_name=block.block_name,
        components=components,
        residual=block.values - total,
        final_rank=final_rank,
        rank_deficient=deficient,
    )


def reconstruct_blocks(
    blocks: Sequence[DataBlock],
    structures: Dict[BlockCollection, JointStructure],
) -> List[BlockDecomposition]:
    """Per-block decompositions X_k = Σ_{𝐢∋k} Â_{𝐢,k} + residual."""
    structures = {c: s for c, s in structures.items() if s.rank}
    rotations = _rotations(blocks, structures)
    decompositions = [reconstruct_block(k, block, structures, rotations) for k, block in enumerate(blocks)]
    for dec in decompositions:
        logger.info("Block %s: final rank %d over %d collections", dec.block_name, dec.final_rank, len(dec.components))
    return decompositions


def modes_of_variation(decomposition: BlockDecomposition) -> List[ModeOfVariation]:
    """Rotated modes of every component of a block."""
    modes = []
    for component in decomposition.components:
        loadings, scores = component.rotated_loadings, component.rotated_scores
        for j in range(component.rank):
            modes.append(ModeOfVariation(
                collection=component.collection,
                block_index=decomposition.block_index,
                mode=j + 1,
                loading=loadings[:, j],
                score=scores[:, j],
                energy=float(np.linalg.norm(loadings[:, j]) * np.linalg.norm(scores[:, j])),
            ))
    return modes
