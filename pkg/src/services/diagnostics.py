"""Per-direction diagnostic angles, ENC/ECT summaries and report assembly."""

import json
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..core.errors import NumericError
from ..core.models import BlockCollection, BlockDecomposition, BlockInference, JointStructure
from ..core.report import (
    BlockAngles,
    BlockSummary,
    CollectionSummary,
    DiagnosticsReport,
    DirectionRecord,
    QQRecord,
)
from .principal_angles import theta2_star_percentile, vector_subspace_angle

logger = logging.getLogger(__name__)


def _angle(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), 4)


def _num(value: Optional[float]) -> Optional[float]:
    return None if value is None else round(float(value), 6)


def _nums(values: np.ndarray) -> List[float]:
    return [round(float(x), 6) for x in np.asarray(values).ravel()]


def enc(v: np.ndarray) -> float:
    """Effective number of cases, 1 / Σ v_j⁴, for a unit vector."""
    v = np.asarray(v, dtype=float).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise NumericError(f"ENC needs a unit vector, got norm {np.linalg.norm(v):.3e}")
    return float(1.0 / np.sum(v ** 4))


def ect(loading: np.ndarray, d: Optional[int] = None) -> float:
    """Effective contribution of traits, (Σ l²)² / (d Σ l⁴), in (0, 1]."""
    loading = np.asarray(loading, dtype=float).ravel()
    d = loading.size if d is None else d
    peak = np.max(np.abs(loading)) if loading.size else 0.0
    if peak == 0.0:
        raise NumericError("ECT is undefined for a zero loadings vector")
    # scale out first so tiny loadings do not underflow
    squares = (loading / peak) ** 2
    return float(np.sum(squares) ** 2 / (d * np.sum(squares ** 2)))


def direction_diagnostics(
    v: np.ndarray,
    collection: BlockCollection,
    mode: int,
    inferences: Sequence[BlockInference],
    loadings: Dict[int, np.ndarray],
    theta2_quantile: float = 0.95,
) -> DirectionRecord:
    """Angles of one unit scores direction to every block.

    Trait angles and upper bounds are reported for all blocks; object angles, their
    bounds and ECT only for the blocks in the collection. loadings maps a block index
    to the rotated loadings column of this direction.
    """
    v = np.asarray(v, dtype=float).ravel()
    record = DirectionRecord(collection=collection.label, mode=mode, enc=_num(enc(v)), scores=_nums(v))
    for inf in inferences:
        included = collection.contains(inf.index)
        entry = BlockAngles(block=inf.name, included=included)
        record.blocks.append(entry)
        if inf.signal_free:
            continue
        bounds, cache = inf.bounds, inf.bootstrap.cache
        trait = vector_subspace_angle(v, inf.V_check)
        theta2, _ = theta2_star_percentile(v, inf.V_check, cache, theta2_quantile)
        entry.trait_angle = _angle(trait)
        entry.trait_theta2 = _angle(theta2)
        entry.trait_upper = _angle(trait + theta2)
        entry.phi_hat = _angle(bounds.phi_hat)
        entry.theta0 = _angle(bounds.theta0)
        if not included:
            entry.correlated_excluded = bool(trait + theta2 < bounds.theta0)
            continue
        entry.non_informative = bool(trait <= bounds.phi_hat and trait + theta2 >= bounds.theta0)
        if entry.non_informative:
            logger.warning(
                "Direction %s/%d is non-informative for block %s: angle %.2f <= phi %.2f but upper %.2f >= theta0 %.2f",
                collection.label, mode, inf.name, trait, bounds.phi_hat, trait + theta2, bounds.theta0,
            )

        loading = loadings.get(inf.index)
        if loading is None or not np.any(loading):
            loading = inf.block.values @ v
        if not np.any(loading):
            continue
        obj = vector_subspace_angle(loading, inf.U_check)
        obj_theta2, _ = theta2_star_percentile(loading, inf.U_check, cache, theta2_quantile)
        entry.object_angle = _angle(obj)
        entry.object_theta2 = _angle(obj_theta2)
        entry.object_upper = _angle(obj + obj_theta2)
        entry.psi_hat = _angle(bounds.psi_hat)
        entry.theta0_object = _angle(bounds.theta0_object)
        entry.ect = _num(100.0 * ect(loading, inf.block.d))
    return record


def qq_record(block_name: str, table: Dict[str, np.ndarray]) -> QQRecord:
    """Report entry from a noise_impute.qq_table."""
    observed = table["observed"]
    inside = (observed >= table["env_min"]) & (observed <= table["env_max"])
    return QQRecord(
        block=block_name,
        rank=[int(r) for r in table["rank"]],
        observed=_nums(observed),
        theoretical=_nums(table["theoretical"]),
        env_min=_nums(table["env_min"]),
        env_max=_nums(table["env_max"]),
        naive=_nums(table["naive"]) if "naive" in table else None,
        fraction_inside=_num(np.mean(inside)),
    )


def _block_summary(inf: BlockInference, dec: Optional[BlockDecomposition]) -> BlockSummary:
    block, est, bounds = inf.block, inf.estimate, inf.bounds
    return BlockSummary(
        index=inf.index + 1,
        name=inf.name,
        d=block.d,
        n=block.n,
        max_rank=block.max_rank,
        estimated_rank=est.r_hat,
        filtered_rank=0 if bounds is None else bounds.filtered_rank,
        final_rank=0 if dec is None else dec.final_rank,
        sigma_hat=_num(est.sigma_hat),
        phi_hat=None if bounds is None else _angle(bounds.phi_hat),
        psi_hat=None if bounds is None else _angle(bounds.psi_hat),
        theta0=None if bounds is None else _angle(bounds.theta0),
        theta0_object=None if bounds is None else _angle(bounds.theta0_object),
        signal_free=inf.signal_free,
        rank_deficient=False if dec is None else dec.rank_deficient,
        trait_means=None if block.trait_means is None else _nums(block.trait_means),
        object_means=None if block.object_means is None else _nums(block.object_means),
    )


def _collection_summary(structure: JointStructure, inferences: Sequence[BlockInference]) -> CollectionSummary:
    last = structure.traces[-1] if structure.traces else None
    return CollectionSummary(
        label=structure.collection.label,
        blocks=[inferences[k].name for k in structure.collection.indices],
        rank=structure.rank,
        directions_tried=len(structure.traces),
        certified=all(t.certified for t in structure.traces),
        rejection_reasons=[] if last is None or last.accepted else list(last.rejection_reasons),
    )


def assemble_report(
    config_echo: Dict[str, Any],
    inferences: Sequence[BlockInference],
    searched: Sequence[JointStructure],
    decompositions: Sequence[BlockDecomposition],
    qq: Sequence[QQRecord] = (),
    theta2_quantile: float = 0.95,
) -> DiagnosticsReport:
    """Collect block, collection and direction diagnostics into one report."""
    by_block = {dec.block_index: dec for dec in decompositions}
    report = DiagnosticsReport(
        config_echo=config_echo,
        blocks=[_block_summary(inf, by_block.get(inf.index)) for inf in inferences],
        collections=[
            _collection_summary(s, inferences) for s in sorted(searched, key=lambda s: s.collection.search_key())
        ],
        qq=list(qq),
    )

    components = {}
    for dec in decompositions:
        for component in dec.components:
            components.setdefault(component.collection, []).append(component)
    for collection in sorted(components, key=lambda c: c.search_key()):
        parts = components[collection]
        scores = parts[0].rotated_scores
        rotated = {c.block_index: c.rotated_loadings for c in parts}
        for j in range(scores.shape[1]):
            loadings = {k: matrix[:, j] for k, matrix in rotated.items()}
            report.directions.append(
                direction_diagnostics(scores[:, j], collection, j + 1, inferences, loadings, theta2_quantile)
            )
    logger.info("Report: %d blocks, %d collections searched, %d directions",
                len(report.blocks), len(report.collections), len(report.directions))
    return report


def report_to_json(report: DiagnosticsReport) -> str:
    """Deterministic JSON text with sorted keys."""
    return json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def report_from_json(text: str) -> DiagnosticsReport:
    """Parse a report written by report_to_json."""
    return DiagnosticsReport.model_validate_json(text)
