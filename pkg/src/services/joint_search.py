"""Collection-by-collection search for joint trait-space directions."""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.config import CCPConfig
from ..core.errors import InitializationError
from ..core.models import (
    BlockCollection,
    BlockInference,
    DirectionTrace,
    IterationRecord,
    JointStructure,
    collection_order,
)
from .ccp_subproblem import ExcludedTerms, IncludedTerms, SubproblemSolver, SubproblemSpec
from .principal_angles import vector_subspace_angle
from .signal_extract import thin_svd

logger = logging.getLogger(__name__)

SHRINK_TOL = 1e-6
ORTHO_TOL = 1e-7


def orthonormal_columns(blocks: Sequence[np.ndarray], dim: int) -> np.ndarray:
    """Orthonormal basis for the span of the given column blocks."""
    blocks = [b for b in blocks if b.size]
    if not blocks:
        return np.zeros((dim, 0))
    u, s, _ = np.linalg.svd(np.hstack(blocks), full_matrices=False)
    return u[:, s > 1e-10]


def shrink_basis(basis: np.ndarray, ortho: np.ndarray, tol: float = SHRINK_TOL) -> np.ndarray:
    """Project columns onto null(𝔒ᵀ), drop small residuals and re-orthonormalize."""
    if ortho.shape[1] == 0 or basis.shape[1] == 0:
        return basis
    residual = basis - ortho @ (ortho.T @ basis)
    residual = residual[:, np.linalg.norm(residual, axis=0) >= tol]
    if residual.shape[1] == 0:
        return residual
    u, s, _ = np.linalg.svd(residual, full_matrices=False)
    return u[:, s >= tol]


def flag_mean_init(bases: Sequence[np.ndarray], index: int, ortho: np.ndarray) -> np.ndarray:
    """i-th flag-mean direction of the bases, projected onto null(𝔒ᵀ).

    The eigenvectors of Σ V̌_k V̌_kᵀ are the left singular vectors of [V̌_1 ... V̌_m];
    ties follow the SVD order and its sign convention. Falls back to later
    eigenvectors when the projection vanishes.
    """
    if index < 1:
        raise ValueError("flag mean index is one-based")
    stacked = np.hstack([b for b in bases if b.shape[1]])
    if stacked.size == 0:
        raise InitializationError("no nonempty basis to initialize from")
    eigvecs, _, _ = thin_svd(stacked)
    for j in range(index - 1, eigvecs.shape[1]):
        w = eigvecs[:, j]
        if ortho.shape[1]:
            w = w - ortho @ (ortho.T @ w)
        norm = np.linalg.norm(w)
        if norm >= 1e-8:
            return w / norm
    raise InitializationError("every flag-mean candidate is annihilated by the orthogonality constraint")


def _included_terms(inference: BlockInference, shrunk: np.ndarray) -> IncludedTerms:
    est, bounds = inference.estimate, inference.bounds
    assert bounds is not None
    rank = bounds.filtered_rank
    return IncludedTerms(
        block_index=inference.index,
        trait_basis=shrunk,
        cos2_phi=float(np.cos(np.radians(bounds.phi_hat)) ** 2),
        object_factor=est.raw_singulars[:, None] * est.V_bar.T,
        object_proj_factor=est.raw_singulars[:rank, None] * est.V_bar[:, :rank].T,
        cos2_psi=float(np.cos(np.radians(bounds.psi_hat)) ** 2),
        nu1=inference.nu1,
    )


def _excluded_terms(inference: BlockInference) -> ExcludedTerms:
    assert inference.bounds is not None
    return ExcludedTerms(
        block_index=inference.index,
        trait_basis=inference.V_check.matrix,
        cos2_phi=float(np.cos(np.radians(inference.bounds.phi_hat)) ** 2),
    )


def trait_angles(v: np.ndarray, inferences: Sequence[BlockInference]) -> List[Optional[float]]:
    """Angle from v to each block's filtered trait basis; None for signal-free blocks."""
    return [None if inf.signal_free else vector_subspace_angle(v, inf.V_check) for inf in inferences]


def acceptance_failures(
    v: np.ndarray,
    collection: BlockCollection,
    inferences: Sequence[BlockInference],
    ortho: np.ndarray,
    eps_angle: float,
) -> List[str]:
    """Reasons a unit direction fails the acceptance test; empty when it passes."""
    reasons: List[str] = []
    for inf in inferences:
        if inf.signal_free:
            continue
        bounds = inf.bounds
        assert bounds is not None
        angle = vector_subspace_angle(v, inf.V_check)
        if collection.contains(inf.index):
            if angle > bounds.phi_hat + eps_angle:
                reasons.append(f"trait angle {angle:.3f} to included block {inf.name} exceeds phi {bounds.phi_hat:.3f}")
            image = inf.block.values @ v
            object_angle = 90.0 if np.linalg.norm(image) == 0 else vector_subspace_angle(image, inf.U_check)
            if object_angle > bounds.psi_hat + eps_angle:
                reasons.append(
                    f"object angle {object_angle:.3f} for included block {inf.name} exceeds psi {bounds.psi_hat:.3f}"
                )
        elif angle <= bounds.phi_hat - eps_angle:
            reasons.append(f"trait angle {angle:.3f} to excluded block {inf.name} is within phi {bounds.phi_hat:.3f}")
    if ortho.shape[1]:
        leak = float(np.linalg.norm(ortho.T @ v))
        if leak > ORTHO_TOL:
            reasons.append(f"direction leaks {leak:.2e} into previously found structure")
    return reasons


def _search_direction(
    direction: int,
    collection: BlockCollection,
    inferences: Sequence[BlockInference],
    ortho: np.ndarray,
    ccp: CCPConfig,
    solver: str,
) -> Tuple[Optional[np.ndarray], DirectionTrace]:
    included = [inferences[k] for k in collection.indices]
    excluded = [inf for inf in inferences if not collection.contains(inf.index) and not inf.signal_free]
    trace = DirectionTrace(direction=direction)

    shrunk = [shrink_basis(inf.V_check.matrix, ortho) for inf in included]
    if any(b.shape[1] == 0 for b in shrunk):
        trace.rejection_reasons.append("an included basis is exhausted by previously found structure")
        return None, trace
    try:
        v = flag_mean_init(shrunk, 1, ortho)
    except InitializationError as e:
        trace.rejection_reasons.append(str(e))
        return None, trace

    n_blocks = len(inferences)
    spec = SubproblemSpec(
        n_blocks=n_blocks,
        included=[_included_terms(inf, b) for inf, b in zip(included, shrunk)],
        excluded=[_excluded_terms(inf) for inf in excluded],
        ortho=ortho,
        v0=v,
        tau=ccp.tau0,
    )
    program = SubproblemSolver(spec, solver=solver, tol=ccp.tol)

    tau = ccp.tau0
    for iteration in range(1, ccp.max_iter + 1):
        result = program.solve(v, tau)
        v = result.v
        norm = np.linalg.norm(v)
        if norm > 1.0:
            v = v / norm
        angle_slack = float(result.slacks[: 2 * n_blocks].max()) if n_blocks else 0.0
        trace.iterations.append(IterationRecord(
            iteration=iteration,
            tau=tau,
            trait_angles=trait_angles(v, inferences) if norm > 0 else [None] * n_blocks,
            angle_slack_max=angle_slack,
            objective=result.objective,
            certified=result.certified,
        ))
        trace.certified = trace.certified and result.certified
        logger.debug("%s dir %d iter %d: tau=%.1f max angle slack=%.3e", collection.label, direction, iteration, tau, angle_slack)
        tau = min(ccp.mu * tau, ccp.tau_max)
        if angle_slack <= ccp.eps_slack:
            break

    norm = np.linalg.norm(v)
    if norm < 1e-12:
        trace.rejection_reasons.append("CCP converged to the zero vector")
        return None, trace
    unit = v / norm
    trace.rejection_reasons = acceptance_failures(unit, collection, inferences, ortho, ccp.eps_angle)
    if trace.rejection_reasons:
        return None, trace
    trace.accepted = True
    return unit, trace


def find_joint_directions(
    collection: BlockCollection,
    inferences: Sequence[BlockInference],
    found: Dict[BlockCollection, JointStructure],
    ccp: Optional[CCPConfig] = None,
    solver: str = "CLARABEL",
) -> JointStructure:
    """Extract directions for one collection until a candidate fails acceptance."""
    ccp = ccp or CCPConfig()
    n = inferences[0].block.n
    supersets = [s.scores_basis for c, s in found.items() if collection.is_strict_subset_of(c)]
    accepted: List[np.ndarray] = []
    traces: List[DirectionTrace] = []

    for direction in range(1, n + 1):
        ortho = orthonormal_columns(supersets + [np.hstack(accepted)] if accepted else supersets, n)
        unit, trace = _search_direction(direction, collection, inferences, ortho, ccp, solver)
        traces.append(trace)
        if unit is None:
            logger.debug("Collection %s stops at direction %d: %s", collection.label, direction, trace.rejection_reasons)
            break
        if ortho.shape[1]:
            unit = unit - ortho @ (ortho.T @ unit)
            unit = unit / np.linalg.norm(unit)
        accepted.append(unit[:, None])

    basis = np.hstack(accepted) if accepted else np.zeros((n, 0))
    logger.info("Collection {%s}: rank %d", collection.label, basis.shape[1])
    return JointStructure(collection=collection, scores_basis=basis, traces=traces)


def run_full_search(
    inferences: Sequence[BlockInference],
    ccp: Optional[CCPConfig] = None,
    solver: str = "CLARABEL",
    history: Optional[List[JointStructure]] = None,
) -> Dict[BlockCollection, JointStructure]:
    """Search every collection from largest to smallest; keep the nonempty ones.

    When history is given, every searched structure (empty ones included) is appended
    to it so that rejected candidates keep their CCP traces.
    """
    found: Dict[BlockCollection, JointStructure] = {}
    for collection in collection_order(len(inferences)):
        if any(inferences[k].signal_free for k in collection.indices):
            continue
        structure = find_joint_directions(collection, inferences, found, ccp, solver)
        if history is not None:
            history.append(structure)
        if structure.rank:
            found[collection] = structure
    return found
