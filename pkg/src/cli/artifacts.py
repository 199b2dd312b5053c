"""Files written by `divas run`."""

import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from ..agent.state import PipelineState
from ..core.models import SynthTruth
from ..services.diagnostics import report_to_json
from ..services.reconstruct import modes_of_variation
from ..services.signal_extract import signal_matrix
from ..services.synth import truth_angle_table

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def _slug(label: str) -> str:
    return label.replace(",", "-")


def _matrix_csv(path: Path, matrix: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(matrix).to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)


def write_components(state: PipelineState, root: Path) -> None:
    """Per (collection, block) component matrices and rotated mode data."""
    for dec in state.decompositions:
        for component in dec.components:
            slug = _slug(component.collection.label)
            _matrix_csv(root / "components" / f"{slug}_{dec.block_name}.csv", component.matrix)
        modes = modes_of_variation(dec)
        for collection in {m.collection for m in modes}:
            picked = sorted((m for m in modes if m.collection == collection), key=lambda m: m.mode)
            loadings = pd.DataFrame({f"mode{m.mode}": m.loading for m in picked})
            scores = pd.DataFrame({f"mode{m.mode}": m.score for m in picked})
            slug = _slug(collection.label)
            (root / "modes").mkdir(parents=True, exist_ok=True)
            loadings.to_csv(root / "modes" / f"loadings_{slug}_{dec.block_name}.csv", index=False, float_format=FLOAT_FORMAT)
            scores.to_csv(root / "modes" / f"scores_{slug}.csv", index=False, float_format=FLOAT_FORMAT)
        _matrix_csv(root / "residuals" / f"{dec.block_name}.csv", dec.residual)


def write_signals(state: PipelineState, root: Path) -> None:
    for inf in state.inferences:
        _matrix_csv(root / "signal" / f"{inf.name}.csv", signal_matrix(inf.estimate))


def trace_rows(state: PipelineState) -> List[Dict[str, object]]:
    """One row per CCP iteration of every searched direction."""
    names = [inf.name for inf in state.inferences]
    bounds = {inf.name: None if inf.bounds is None else inf.bounds.phi_hat for inf in state.inferences}
    rows = []
    for structure in state.searched:
        for trace in structure.traces:
            for record in trace.iterations:
                row = {
                    "collection": structure.collection.label,
                    "direction": trace.direction,
                    "iteration": record.iteration,
                    "tau": record.tau,
                    "angle_slack_max": record.angle_slack_max,
                    "objective": record.objective,
                    "certified": record.certified,
                    "accepted": trace.accepted,
                }
                for name, angle in zip(names, record.trait_angles):
                    row[f"trait_angle_{name}"] = angle
                    row[f"phi_{name}"] = bounds[name]
                rows.append(row)
    return rows


def write_qq(state: PipelineState, root: Path) -> None:
    (root / "qq").mkdir(parents=True, exist_ok=True)
    for record in state.report.qq:
        frame = pd.DataFrame(record.model_dump(exclude={"block", "fraction_inside", "naive"}))
        if record.naive is not None:
            frame["naive"] = record.naive
        frame.to_csv(root / "qq" / f"{record.block}.csv", index=False)


def write_run_artifacts(state: PipelineState, out_dir: str, truth: Optional[SynthTruth] = None) -> Path:
    """report.json plus the CSV artifacts; plots are written separately."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    (root / "report.json").write_text(report_to_json(state.report))
    write_components(state, root)
    write_signals(state, root)
    write_qq(state, root)
    pd.DataFrame(trace_rows(state)).to_csv(root / "traces.csv", index=False)
    if truth is not None:
        pd.DataFrame(truth_angle_table(truth, state.inferences)).to_csv(root / "truth_angles.csv", index=False)
    logger.info("Wrote artifacts to %s", root)
    return root
