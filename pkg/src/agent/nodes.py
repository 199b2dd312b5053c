"""LangGraph nodes for the divas pipeline."""

import logging
from typing import Any, Dict

import numpy as np

from ..core.errors import DivasError, IngestionError
from ..core.models import BlockInference
from ..services.diagnostics import assemble_report, qq_record
from ..services.ingest import ingest_source
from ..services.joint_search import run_full_search
from ..services.noise_impute import impute_noise, naive_residual, qq_envelope, qq_table
from ..services.reconstruct import reconstruct_blocks
from ..services.rot_bootstrap import rotational_bootstrap
from ..services.signal_extract import extract_signal
from .state import ErrorRecord, PipelineState

logger = logging.getLogger(__name__)

# Stream identifiers for the per-block generators
IMPUTE_STREAM = 0
QQ_STREAM = 1
BOOTSTRAP_STREAM = 2


def block_rng(seed: int, block_index: int, stream: int) -> np.random.Generator:
    """Generator for one (block, purpose) pair, independent of stage order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block_index, stream)))


class PipelineNodes:
    """Stage implementations; each returns a partial state update."""

    def _failure(self, error: Exception, stage: str) -> Dict[str, Any]:
        record = ErrorRecord.from_exception(error, stage)
        logger.error("Stage %s failed: %s", stage, record.message)
        return {"error": record, "stage": stage, "processing_complete": True}

    def ingest_blocks_node(self, state: PipelineState) -> Dict[str, Any]:
        """Read and preprocess every configured block."""
        stage = "ingest_blocks"
        try:
            blocks = [ingest_source(source) for source in state.config.blocks]
            objects = {block.n for block in blocks}
            if len(objects) > 1:
                raise IngestionError(
                    "Blocks disagree on the number of objects",
                    details={block.block_name: block.n for block in blocks},
                )
            return {"blocks": blocks, "stage": stage}
        except DivasError as e:
            return self._failure(e, stage)

    def extract_signals_node(self, state: PipelineState) -> Dict[str, Any]:
        """Shrinkage signal estimates, imputed noise and Q-Q data per block."""
        stage = "extract_signals"
        config = state.config
        try:
            inferences, qq = [], []
            for k, block in enumerate(state.blocks):
                est = extract_signal(block, config.shrinker)
                noise = impute_noise(
                    block, est, block_rng(config.seed, k, IMPUTE_STREAM), stratified=config.stratified_imputation
                )
                inferences.append(BlockInference(index=k, block=block, estimate=est, noise=noise))
                if est.sigma_hat > 0:
                    envelope = qq_envelope(
                        est.aspect_beta, block.max_rank, est.sigma_hat, config.qq_traces,
                        block_rng(config.seed, k, QQ_STREAM),
                    )
                    qq.append(qq_record(block.block_name, qq_table(noise.values, envelope, naive_residual(block, est))))
            return {"inferences": inferences, "qq": qq, "stage": stage}
        except DivasError as e:
            return self._failure(e, stage)

    def bootstrap_blocks_node(self, state: PipelineState) -> Dict[str, Any]:
        """Rotational bootstrap for every block with estimated signal."""
        stage = "bootstrap_blocks"
        config = state.config
        try:
            inferences = []
            for inf in state.inferences:
                if inf.estimate.is_empty:
                    logger.warning("Block %s: no signal above the noise bulk; skipping the bootstrap", inf.name)
                    inferences.append(inf)
                    continue
                result = rotational_bootstrap(
                    inf.block,
                    inf.estimate,
                    inf.noise,
                    xi=config.xi,
                    M=config.bootstrap_M,
                    rng=block_rng(config.seed, inf.index, BOOTSTRAP_STREAM),
                    bound_quantile=config.bound_quantile,
                    theta0_quantile=config.theta0_quantile,
                    redraw_noise=config.redraw_noise,
                    truncated_svd=config.desk_scale,
                    n_jobs=config.resolved_n_jobs,
                )
                inferences.append(inf.model_copy(update={"bootstrap": result}))
            return {"inferences": inferences, "stage": stage}
        except DivasError as e:
            return self._failure(e, stage)

    def search_joint_structure_node(self, state: PipelineState) -> Dict[str, Any]:
        """Collection-by-collection CCP search."""
        stage = "search_joint_structure"
        config = state.config
        try:
            searched = []
            structures = run_full_search(state.inferences, config.ccp, config.resolved_solver, history=searched)
            return {"structures": structures, "searched": searched, "stage": stage}
        except DivasError as e:
            return self._failure(e, stage)

    def reconstruct_blocks_node(self, state: PipelineState) -> Dict[str, Any]:
        """Loadings, rotations and components per block."""
        stage = "reconstruct_blocks"
        try:
            return {"decompositions": reconstruct_blocks(state.blocks, state.structures), "stage": stage}
        except DivasError as e:
            return self._failure(e, stage)

    def assemble_diagnostics_node(self, state: PipelineState) -> Dict[str, Any]:
        """Build the final report."""
        stage = "assemble_diagnostics"
        config = state.config
        try:
            report = assemble_report(
                config.echo(),
                state.inferences,
                state.searched,
                state.decompositions,
                state.qq,
                config.theta2_quantile,
            )
            return {"report": report, "stage": stage, "processing_complete": True}
        except DivasError as e:
            return self._failure(e, stage)

    def route_after_stage(self, state: PipelineState) -> str:
        """Stop on error, otherwise continue."""
        if state.error is not None:
            return "error"
        logger.info("Stage %s done", state.stage)
        return "continue"
