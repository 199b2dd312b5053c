"""Imputed noise matrix estimate and its Q-Q diagnostic data."""

import logging
from typing import Dict, Optional

import numpy as np
from pydantic import Field

from ..core.models import DataBlock, ImputedNoise, MPLaw, NumericModel, SignalEstimate
from .mp_dist import mp_quantile
from .signal_extract import signal_matrix

logger = logging.getLogger(__name__)


class QQEnvelope(NumericModel):
    """Per-rank envelope of simulated pure-noise eigenvalues, ascending."""

    theoretical: np.ndarray = Field(..., description="MP quantiles at (i - 0.5) / m")
    env_min: np.ndarray
    env_max: np.ndarray
    sigma: float
    beta: float


def _uniform_draws(count: int, rng: np.random.Generator, stratified: bool) -> np.ndarray:
    if not stratified:
        u = rng.random(count)
        while np.any(u <= 0.0):
            u[u <= 0.0] = rng.random(int(np.sum(u <= 0.0)))
        return u
    # one draw per stratum, strata shuffled across directions
    u = (np.arange(count) + rng.random(count)) / count
    return np.clip(rng.permutation(u), 1e-12, 1.0 - 1e-12)


def impute_noise(
    block: DataBlock,
    est: SignalEstimate,
    rng: np.random.Generator,
    stratified: bool = False,
) -> ImputedNoise:
    """Ê = Σ_{i≤r̂} ν^imp_i ū_i v̄_iᵀ + Σ_{i>r̂} ν̄_i ū_i v̄_iᵀ.

    Imputed values are drawn on the eigenvalue scale, λ_i = MP_{U_i}(beta) at unit
    variance, and converted with ν^imp_i = σ̂ √((d ∨ n) λ_i).
    """
    r_hat = est.r_hat
    if r_hat == 0:
        return ImputedNoise(values=block.values.copy(), imputed_count=0, draws=np.zeros(0), imputed_singulars=np.zeros(0))

    d, n = block.values.shape
    law = MPLaw.for_shape(d, n)
    draws = np.array([mp_quantile(law, u) for u in _uniform_draws(r_hat, rng, stratified)])
    imputed = est.sigma_hat * np.sqrt(max(d, n) * draws)

    u_sig = est.U_bar[:, :r_hat]
    v_sig = est.V_bar[:, :r_hat]
    delta = est.raw_singulars[:r_hat] - imputed
    values = block.values - (u_sig * delta) @ v_sig.T
    logger.debug("Block %s: imputed %d singular values", block.block_name, r_hat)
    return ImputedNoise(values=values, imputed_count=r_hat, draws=draws, imputed_singulars=imputed)


def naive_residual(block: DataBlock, est: SignalEstimate) -> np.ndarray:
    """X - Â."""
    return block.values - signal_matrix(est)


def noise_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of the short-side Gram matrix divided by (d ∨ n)."""
    s = np.linalg.svd(matrix, compute_uv=False)
    return np.sort(s ** 2 / max(matrix.shape))


def qq_envelope(
    beta: float,
    spectrum_len: int,
    sigma: float,
    n_traces: int = 100,
    rng: Optional[np.random.Generator] = None,
) -> QQEnvelope:
    """Min/max bands of simulated pure-noise spectra of the matching shape."""
    rng = rng if rng is not None else np.random.default_rng()
    long_side = int(round(spectrum_len / beta))
    seeds = rng.integers(0, 2 ** 63 - 1, size=n_traces)
    traces = np.empty((n_traces, spectrum_len))
    for t, seed in enumerate(seeds):
        trace_rng = np.random.default_rng(int(seed))
        noise = sigma * trace_rng.standard_normal((spectrum_len, long_side))
        traces[t] = noise_eigenvalues(noise)

    law = MPLaw(beta=spectrum_len / long_side, sigma2=sigma ** 2)
    levels = (np.arange(1, spectrum_len + 1) - 0.5) / spectrum_len
    theoretical = np.array([mp_quantile(law, q) for q in levels])
    return QQEnvelope(
        theoretical=theoretical,
        env_min=traces.min(axis=0),
        env_max=traces.max(axis=0),
        sigma=float(sigma),
        beta=float(law.beta),
    )


def qq_table(
    noise: np.ndarray,
    envelope: QQEnvelope,
    naive: Optional[np.ndarray] = None,
) -> Dict[str, np.ndarray]:
    """Columns rank, observed, naive, theoretical, env_min, env_max."""
    observed = noise_eigenvalues(noise)
    table = {
        "rank": np.arange(1, observed.size + 1),
        "observed": observed,
        "theoretical": envelope.theoretical,
        "env_min": envelope.env_min,
        "env_max": envelope.env_max,
    }
    if naive is not None:
        table["naive"] = noise_eigenvalues(naive)
    return table


def fraction_inside(eigenvalues: np.ndarray, envelope: QQEnvelope) -> float:
    """Share of sorted eigenvalues inside the envelope band."""
    inside = (eigenvalues >= envelope.env_min) & (eigenvalues <= envelope.env_max)
    return float(np.mean(inside))
