"""Noise level estimation, singular value shrinkage and low-rank signal estimation."""

import logging
from typing import Callable, Tuple, Union

import numpy as np

from ..core.errors import NumericError
from ..core.models import DataBlock, MPLaw, ShrinkerKind, SignalEstimate
from .mp_dist import mp_quantile

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def thin_svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD M = U diag(s) Vᵀ with a fixed sign convention.

    In every left singular vector the entry of largest magnitude is positive (first
    such entry on ties); the matching right singular vector is flipped with it.
    Returns V with singular vectors as columns.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise NumericError("thin_svd received non-finite entries")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    v = vt.T
    if u.shape[1]:
        pivots = np.argmax(np.abs(u), axis=0)
        signs = np.sign(u[pivots, np.arange(u.shape[1])])
        signs[signs == 0] = 1.0
        u = u * signs
        v = v * signs
    return u, s, v


def estimate_sigma(raw_singulars: np.ndarray, d: int, n: int) -> float:
    """Per-entry noise scale from the median singular value.

    sigma_hat = nu_median / sqrt((d ∨ n) · mu_beta) with mu_beta the unit-variance
    MP median at beta = (d ∧ n) / (d ∨ n).
    """
    raw_singulars = np.asarray(raw_singulars, dtype=float)
    if raw_singulars.size < 2:
        raise NumericError("estimate_sigma needs at least 2 singular values")
    if not np.any(raw_singulars > 0):
        raise NumericError("all singular values are zero; the noise level is undefined")
    median = float(np.median(raw_singulars))
    mu_beta = mp_quantile(MPLaw.for_shape(d, n), 0.5)
    return median / np.sqrt(max(d, n) * mu_beta)


def rank_tolerance(raw_singulars: np.ndarray, d: int, n: int) -> float:
    """Singular values at or below s₁·(d ∨ n)·eps are roundoff."""
    raw_singulars = np.asarray(raw_singulars, dtype=float)
    return float(raw_singulars[0] * max(d, n) * np.finfo(float).eps) if raw_singulars.size else 0.0


def shrink_optimal(nu: ArrayLike, beta: float) -> ArrayLike:
    """Operator-norm optimal shrinker at unit noise; zero below the bulk edge 1 + √beta."""
    nu_arr = np.asarray(nu, dtype=float)
    t = nu_arr ** 2 - beta - 1.0
    disc = np.clip(t ** 2 - 4.0 * beta, 0.0, None)
    shrunk = np.where(
        nu_arr >= 1.0 + np.sqrt(beta),
        np.sqrt(np.clip(t + np.sqrt(disc), 0.0, None) / 2.0),
        0.0,
    )
    return float(shrunk) if np.ndim(nu) == 0 else shrunk


def shrink_soft(nu: ArrayLike, c: float) -> ArrayLike:
    """Soft threshold (nu - c) ∨ 0."""
    shrunk = np.clip(np.asarray(nu, dtype=float) - c, 0.0, None)
    return float(shrunk) if np.ndim(nu) == 0 else shrunk


def shrink_hard(nu: ArrayLike, c: float) -> ArrayLike:
    """Hard threshold nu · 1{nu >= c}."""
    nu_arr = np.asarray(nu, dtype=float)
    shrunk = np.where(nu_arr >= c, nu_arr, 0.0)
    return float(shrunk) if np.ndim(nu) == 0 else shrunk


def optimal_soft_threshold(beta: float) -> float:
    """Soft threshold at the bulk edge, 1 + √beta."""
    return 1.0 + np.sqrt(beta)


def optimal_hard_threshold(beta: float) -> float:
    """Optimal hard threshold for known unit noise."""
    return float(np.sqrt(2.0 * (beta + 1.0) + 8.0 * beta / (beta + 1.0 + np.sqrt(beta ** 2 + 14.0 * beta + 1.0))))


def shrinker_for(kind: ShrinkerKind, beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """The unit-noise shrinking function selected by kind."""
    if kind == ShrinkerKind.OPTIMAL:
        return lambda nu: shrink_optimal(nu, beta)
    if kind == ShrinkerKind.SOFT:
        return lambda nu: shrink_soft(nu, optimal_soft_threshold(beta))
    return lambda nu: shrink_hard(nu, optimal_hard_threshold(beta))


def extract_signal(block: DataBlock, shrinker: ShrinkerKind = ShrinkerKind.OPTIMAL) -> SignalEstimate:
    """Shrinkage estimate Â = Û D̂ V̂ᵀ of the block's signal."""
    d, n = block.values.shape
    beta = min(d, n) / max(d, n)
    u, s, v = thin_svd(block.values)

    if not np.any(s > 0):
        logger.info("Block %s is the zero matrix; no signal", block.block_name)
        return SignalEstimate(
            U_hat=u[:, :0], D_hat=s[:0], V_hat=v[:, :0], r_hat=0, sigma_hat=0.0, raw_singulars=s,
            aspect_beta=beta, U_bar=u, V_bar=v, shrinker=shrinker,
        )

    floor = rank_tolerance(s, d, n)
    if np.median(s) <= floor:
        # the spectrum below the signal is roundoff: keep the numerical rank unshrunk
        r_hat = int(np.count_nonzero(s > floor))
        logger.info("Block %s is noise-free to working precision; numerical rank %d", block.block_name, r_hat)
        return SignalEstimate(
            U_hat=u[:, :r_hat], D_hat=s[:r_hat], V_hat=v[:, :r_hat], r_hat=r_hat, sigma_hat=0.0, raw_singulars=s,
            aspect_beta=beta, U_bar=u, V_bar=v, shrinker=shrinker,
        )

    sigma_hat = estimate_sigma(s, d, n)
    scale = sigma_hat * np.sqrt(max(d, n))
    shrunk = scale * shrinker_for(shrinker, beta)(s / scale)
    r_hat = int(np.count_nonzero(shrunk > 0))

    logger.info("Block %s: sigma_hat=%.4g, r_hat=%d (%s shrinker)", block.block_name, sigma_hat, r_hat, shrinker.value)
    return SignalEstimate(
        U_hat=u[:, :r_hat],
        D_hat=shrunk[:r_hat],
        V_hat=v[:, :r_hat],
        r_hat=r_hat,
        sigma_hat=float(sigma_hat),
        raw_singulars=s,
        aspect_beta=beta,
        U_bar=u,
        V_bar=v,
        shrinker=shrinker,
    )


def signal_matrix(est: SignalEstimate) -> np.ndarray:
    """Â = Û diag(D̂) V̂ᵀ."""
    return (est.U_hat * est.D_hat) @ est.V_hat.T
