"""Reading headerless block CSVs and preprocessing them into DataBlocks."""

import csv
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError
from scipy.special import logit

from ..core.config import BlockSource
from ..core.errors import DomainViolationError, IngestionError, NonNumericInputError, RaggedInputError
from ..core.models import DataBlock

logger = logging.getLogger(__name__)

CENTERING_SWEEPS = 2
MAX_REPORTED_CELLS = 10


def _coordinates(mask: np.ndarray) -> list:
    rows, cols = np.nonzero(mask)
    return [[int(r) + 1, int(c) + 1] for r, c in zip(rows[:MAX_REPORTED_CELLS], cols[:MAX_REPORTED_CELLS])]


def _row_widths(file_path: Path) -> List[int]:
    # blank lines are skipped, as pandas does
    with file_path.open(newline="") as handle:
        return [len(row) for row in csv.reader(handle) if row]


def read_matrix(path: str) -> np.ndarray:
    """Rows are traits, columns objects; every cell must be a finite number."""
    file_path = Path(path)
    try:
        widths = _row_widths(file_path)
    except FileNotFoundError:
        raise IngestionError(f"Data file not found: {file_path}")
    if not widths:
        raise IngestionError(f"Data file {file_path} is empty")
    uneven = [i for i, width in enumerate(widths) if width != widths[0]]
    if uneven:
        row = uneven[0] + 1
        side = "shorter" if widths[uneven[0]] < widths[0] else "longer"
        raise RaggedInputError(
            f"Row {row} of {file_path} is {side} than the first row ({widths[uneven[0]]} vs {widths[0]} cells)",
            details={"row": row},
        )

    try:
        raw = pd.read_csv(file_path, header=None, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise IngestionError(f"Data file {file_path} is empty")
    except pd.errors.ParserError as e:
        raise RaggedInputError(f"Rows of {file_path} have different lengths: {e}")

    values = raw.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce")).to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        cells = _coordinates(bad)
        raise NonNumericInputError(
            f"{int(bad.sum())} cells of {file_path} are not finite numbers, first at row {cells[0][0]}, column {cells[0][1]}",
            details={"cells": cells},
        )
    return values


def logit_transform(values: np.ndarray, source: str = "block") -> np.ndarray:
    """Entrywise log(x / (1 - x)); every entry must lie strictly inside (0, 1)."""
    outside = (values <= 0.0) | (values >= 1.0)
    if outside.any():
        cells = _coordinates(outside)
        raise DomainViolationError(
            f"{int(outside.sum())} entries of {source} lie outside (0, 1), first at row {cells[0][0]}, column {cells[0][1]}",
            details={"cells": cells},
        )
    return logit(values)


def double_center(
    values: np.ndarray, trait_centered: bool, object_centered: bool, sweeps: int = CENTERING_SWEEPS
) -> Tuple[np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """Alternately remove row means and column means.

    Returns the centered matrix and the accumulated removed means (None when that
    centering is off).
    """
    centered = values.astype(float, copy=True)
    trait_means = np.zeros(values.shape[0]) if trait_centered else None
    object_means = np.zeros(values.shape[1]) if object_centered else None
    for _ in range(sweeps):
        if trait_centered:
            row_means = centered.mean(axis=1)
            centered -= row_means[:, None]
            trait_means += row_means
        if object_centered:
            col_means = centered.mean(axis=0)
            centered -= col_means[None, :]
            object_means += col_means
    return centered, trait_means, object_means


def ingest(
    path: str,
    name: Optional[str] = None,
    trait_centered: bool = False,
    object_centered: bool = False,
    logit_transform_entries: bool = False,
) -> DataBlock:
    """Read, optionally logit transform, then center one block."""
    name = name or Path(path).stem
    values = read_matrix(path)
    if logit_transform_entries:
        values = logit_transform(values, source=name)
    values, trait_means, object_means = double_center(values, trait_centered, object_centered)
    try:
        block = DataBlock(
            values=values,
            block_name=name,
            trait_centered=trait_centered,
            object_centered=object_centered,
            logit_transformed=logit_transform_entries,
            trait_means=trait_means,
            object_means=object_means,
        )
    except ValidationError as e:
        raise IngestionError(f"Block {name} is not usable: {e.errors(include_url=False)[0]['msg']}")
    logger.info("Ingested %s: %d traits x %d objects", name, block.d, block.n)
    return block


def ingest_source(source: BlockSource) -> DataBlock:
    return ingest(
        source.path,
        name=source.label,
        trait_centered=source.trait_centered,
        object_centered=source.object_centered,
        logit_transform_entries=source.logit_transform,
    )
