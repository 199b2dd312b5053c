"""Rotational bootstrap: perturbation angle bounds, filtered rank and the θ₂* cache."""

import logging
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.sparse.linalg import svds

from ..core.errors import NumericError
from ..core.models import (
    GOLDEN_XI,
    BootstrapCache,
    BootstrapResult,
    DataBlock,
    ImputedNoise,
    PerturbationBounds,
    SignalEstimate,
    SpaceTag,
    SubspaceBasis,
)
from .mp_dist import random_direction_angle_quantile
from .noise_impute import impute_noise
from .principal_angles import order_statistic

logger = logging.getLogger(__name__)


def replicate_rng(master_seed: int, m: int) -> np.random.Generator:
    """Generator for replication m, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(m,)))


def _random_basis(rng: np.random.Generator, dim: int, rank: int, centered: bool) -> np.ndarray:
    draws = rng.standard_normal((dim, rank))
    if centered:
        draws -= draws.mean(axis=0, keepdims=True)
    q, _ = np.linalg.qr(draws)
    return q


def _leading_singular_vectors(
    matrix: np.ndarray, rank: int, truncated: bool, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    if truncated and rank < min(matrix.shape) - 1:
        v0 = rng.standard_normal(min(matrix.shape))
        u, s, vt = svds(matrix, k=rank, v0=v0)
        order = np.argsort(s)[::-1]
        return u[:, order], vt[order].T
    u, _, vt = np.linalg.svd(matrix, full_matrices=False)
    return u[:, :rank], vt[:rank].T


def _max_angles_by_rank(alignment: np.ndarray) -> np.ndarray:
    # column j holds the cosines against the j-th estimated direction
    rank = alignment.shape[1]
    smallest = np.array([np.linalg.svd(alignment[:, : j + 1], compute_uv=False).min() for j in range(rank)])
    return np.degrees(np.arccos(np.clip(smallest, 0.0, 1.0)))


def _replicate(
    m: int,
    master_seed: int,
    block: DataBlock,
    est: SignalEstimate,
    noise: np.ndarray,
    redraw_noise: bool,
    truncated: bool,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rng = replicate_rng(master_seed, m)
    d, n = block.values.shape
    r_hat = est.r_hat

    # object-centered data has columns summing to zero, so its column space avoids 1_d
    u_true = _random_basis(rng, d, r_hat, block.object_centered)
    v_true = _random_basis(rng, n, r_hat, block.trait_centered)
    if redraw_noise:
        noise = impute_noise(block, est, rng).values
    replicate = (u_true * est.D_hat) @ v_true.T + noise
    u_est, v_est = _leading_singular_vectors(replicate, r_hat, truncated, rng)

    trait_align = v_true.T @ v_est
    object_align = u_true.T @ u_est
    return _max_angles_by_rank(trait_align), _max_angles_by_rank(object_align), trait_align, object_align


def _theta0_by_rank(ambient_dim: int, max_rank: int, q: float) -> np.ndarray:
    return np.array(
        [random_direction_angle_quantile(ambient_dim, j, q) if j < ambient_dim else 0.0 for j in range(1, max_rank + 1)]
    )


def rotational_bootstrap(
    block: DataBlock,
    est: SignalEstimate,
    E_hat: ImputedNoise,
    xi: float = GOLDEN_XI,
    M: int = 400,
    rng: Optional[np.random.Generator] = None,
    bound_quantile: float = 0.95,
    theta0_quantile: float = 0.05,
    redraw_noise: bool = False,
    truncated_svd: bool = False,
    n_jobs: int = 1,
) -> BootstrapResult:
    """Bootstrap the signal at random orientations and filter its rank.

    Each replication draws uniformly random orthonormal bases U° and V° (centered
    like the data), forms X° = U° D̂ V°ᵀ + Ê and records, for every j ≤ r̂, the
    largest principal angle between the true basis and the leading j estimated
    directions in both spaces. The filtered rank ř is the largest j whose
    order statistics stay below xi·θ₀(j) in both spaces.
    """
    if est.r_hat == 0:
        raise NumericError(f"block {block.block_name} has no estimated signal to bootstrap")
    if not 0.0 < xi <= 0.5:
        raise NumericError(f"xi must lie in (0, 0.5], got {xi}")
    rng = rng if rng is not None else np.random.default_rng()
    master_seed = int(rng.integers(0, 2 ** 63 - 1))
    d, n = block.values.shape
    r_hat = est.r_hat

    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(m, master_seed, block, est, E_hat.values, redraw_noise, truncated_svd) for m in range(M)
    )
    trait_angles = np.stack([r[0] for r in results])
    object_angles = np.stack([r[1] for r in results])
    trait_aligns = np.stack([r[2] for r in results])
    object_aligns = np.stack([r[3] for r in results])

    trait_stat = order_statistic(trait_angles, bound_quantile)
    object_stat = order_statistic(object_angles, bound_quantile)
    theta0_trait = _theta0_by_rank(n, r_hat, theta0_quantile)
    theta0_object = _theta0_by_rank(d, r_hat, theta0_quantile)

    passes = (trait_stat < xi * theta0_trait) & (object_stat < xi * theta0_object)
    filtered = int(np.argmin(passes)) if not passes.all() else r_hat

    report_rank = max(filtered, 1)
    bounds = PerturbationBounds(
        phi_hat=float(trait_stat[report_rank - 1]),
        psi_hat=float(object_stat[report_rank - 1]),
        theta0=float(theta0_trait[report_rank - 1]),
        theta0_object=float(theta0_object[report_rank - 1]),
        filtered_rank=filtered,
        replications=M,
        quantile=bound_quantile,
        xi=xi,
    )
    cache = BootstrapCache(
        trait_aligns=trait_aligns[:, :filtered, :filtered],
        object_aligns=object_aligns[:, :filtered, :filtered],
    )
    if filtered == 0:
        logger.warning("Block %s: no rank survives angle filtering; treated as signal-free", block.block_name)
    else:
        logger.info(
            "Block %s: filtered rank %d of %d, phi=%.2f psi=%.2f theta0=%.2f/%.2f",
            block.block_name, filtered, r_hat, bounds.phi_hat, bounds.psi_hat, bounds.theta0, bounds.theta0_object,
        )
    return BootstrapResult(
        bounds=bounds,
        cache=cache,
        U_check=SubspaceBasis(matrix=est.U_bar[:, :filtered], space_tag=SpaceTag.OBJECT),
        V_check=SubspaceBasis(matrix=est.V_bar[:, :filtered], space_tag=SpaceTag.TRAIT),
        trait_angles=trait_angles,
        object_angles=object_angles,
    )
