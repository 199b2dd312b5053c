"""Principal angles between subspaces and the θ₂* bootstrap percentile."""

import logging
import math
from typing import Tuple, Union

import numpy as np

from ..core.errors import NumericError
from ..core.models import BootstrapCache, SpaceTag, SubspaceBasis

logger = logging.getLogger(__name__)

BasisLike = Union[SubspaceBasis, np.ndarray]


def _matrix(basis: BasisLike) -> np.ndarray:
    if isinstance(basis, SubspaceBasis):
        return basis.matrix
    matrix = np.asarray(basis, dtype=float)
    return matrix[:, None] if matrix.ndim == 1 else matrix


def principal_angles(a: BasisLike, b: BasisLike, extended: bool = False) -> np.ndarray:
    """Principal angles in degrees, ascending (descending cosines).

    With extended=True the |rank A - rank B| trailing angles of 90° are appended.
    """
    ma, mb = _matrix(a), _matrix(b)
    if ma.shape[0] != mb.shape[0]:
        raise NumericError(f"ambient dimensions differ: {ma.shape[0]} vs {mb.shape[0]}")
    p = min(ma.shape[1], mb.shape[1])
    if p == 0:
        cosines = np.zeros(0)
    else:
        cosines = np.linalg.svd(ma.T @ mb, compute_uv=False)[:p]
    angles = np.degrees(np.arccos(np.clip(cosines, 0.0, 1.0)))
    if extended:
        extra = abs(ma.shape[1] - mb.shape[1])
        angles = np.concatenate([angles, np.full(extra, 90.0)])
    return angles


def max_principal_angle(a: BasisLike, b: BasisLike) -> float:
    """Largest principal angle in degrees; 90° if either subspace is empty."""
    angles = principal_angles(a, b)
    return float(angles[-1]) if angles.size else 90.0


def vector_subspace_angle(v: np.ndarray, basis: BasisLike) -> float:
    """arccos(‖Bᵀv‖ / ‖v‖) in degrees."""
    v = np.asarray(v, dtype=float).ravel()
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NumericError("angle to a subspace is undefined for the zero vector")
    matrix = _matrix(basis)
    if matrix.shape[0] != v.size:
        raise NumericError(f"vector length {v.size} does not match ambient dimension {matrix.shape[0]}")
    if matrix.shape[1] == 0:
        return 90.0
    cosine = np.linalg.norm(matrix.T @ v) / norm
    return float(np.degrees(np.arccos(np.clip(cosine, 0.0, 1.0))))


def order_statistic(values: np.ndarray, q: float, axis: int = 0) -> np.ndarray:
    """The ceil(q·M)-th smallest value along axis."""
    count = values.shape[axis]
    rank = min(count, max(1, math.ceil(q * count)))
    return np.sort(values, axis=axis).take(rank - 1, axis=axis)


def theta2_star_samples(v: np.ndarray, basis: BasisLike, aligns: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Per-replication θ₂* = arccos(‖M c‖ / ‖c‖), c = V̂ᵀv.

    Returns the samples and a flag that is True when c vanishes (all samples 90°).
    """
    matrix = _matrix(basis)
    coords = matrix.T @ np.asarray(v, dtype=float).ravel()
    norm = np.linalg.norm(coords)
    count = aligns.shape[0]
    if matrix.shape[1] == 0 or norm <= 1e-12 * max(1.0, np.linalg.norm(v)):
        return np.full(count, 90.0), True
    if aligns.shape[1:] != (coords.size, coords.size):
        raise NumericError(f"cached alignments are {aligns.shape[1:]}, basis rank is {coords.size}")
    cosines = np.linalg.norm(aligns @ coords, axis=1) / norm
    return np.degrees(np.arccos(np.clip(cosines, 0.0, 1.0))), False


def theta2_star_percentile(
    v: np.ndarray,
    basis: SubspaceBasis,
    cache: Union[BootstrapCache, np.ndarray],
    q: float = 0.95,
) -> Tuple[float, bool]:
    """q-level order statistic of θ₂* over the cached replications, in degrees.

    The trait or object alignment stack is chosen by the basis space tag.
    """
    if isinstance(cache, BootstrapCache):
        aligns = cache.object_aligns if basis.space_tag == SpaceTag.OBJECT else cache.trait_aligns
    else:
        aligns = cache
    samples, degenerate = theta2_star_samples(v, basis, aligns)
    if degenerate:
        logger.debug("theta2* requested for a vector orthogonal to the estimated subspace")
        return 90.0, True
    return float(order_statistic(samples, q)), False
