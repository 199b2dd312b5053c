"""Marchenko-Pastur law utilities and the random-direction null angle law."""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy import integrate, optimize, special, stats

from ..core.errors import InvalidLawError, NumericError
from ..core.models import MPLaw

logger = logging.getLogger(__name__)

# Inverse-CDF table resolution for bulk sampling.
_TABLE_POINTS = 4097


def _check(law: MPLaw) -> None:
    if not (law.beta > 0 and np.isfinite(law.beta)):
        raise InvalidLawError(f"MP aspect ratio must be positive, got {law.beta}")
    if not (law.sigma2 > 0 and np.isfinite(law.sigma2)):
        raise InvalidLawError(f"MP variance must be positive, got {law.sigma2}")


def mp_support(law: MPLaw) -> Tuple[float, float]:
    """Edges of the continuous part, sigma2 (1 ∓ √beta)²."""
    _check(law)
    root = np.sqrt(law.beta)
    return law.sigma2 * (1.0 - root) ** 2, law.sigma2 * (1.0 + root) ** 2


def mp_point_mass(law: MPLaw) -> float:
    """Mass at zero, max(0, 1 - 1/beta)."""
    _check(law)
    return max(0.0, 1.0 - 1.0 / law.beta)


def mp_density(law: MPLaw, lam: float) -> float:
    """Density of the continuous part at lam.

    Returns +inf at lam = 0 when beta = 1 (integrable boundary singularity) and 0
    outside the support.
    """
    _check(law)
    if lam < 0:
        raise NumericError(f"MP density needs lambda >= 0, got {lam}")
    lower, upper = mp_support(law)
    if lam == 0.0 and lower == 0.0:
        return float("inf")
    if lam <= lower or lam >= upper:
        return 0.0
    return float(np.sqrt((upper - lam) * (lam - lower)) / (2.0 * np.pi * law.beta * law.sigma2 * lam))


def _gap(half: np.ndarray, beta: float) -> np.ndarray:
    # lambda / sigma2 at the angle whose sin²(phi/2) is half; no cancellation near phi = 0
    root = np.sqrt(beta)
    return (1.0 - root) ** 2 + 4.0 * root * half


def _angle_density(phi: np.ndarray, beta: float) -> np.ndarray:
    # density in the angle coordinate lambda = sigma2 * gap(sin²(phi/2)), smooth on [0, pi]
    half = np.sin(np.asarray(phi, dtype=float) / 2.0) ** 2
    gap = _gap(half, beta)
    safe = np.where(gap > 0.0, gap, 1.0)
    # gap vanishes only at phi = 0 for beta = 1, where the limit is 2/pi
    return np.where(gap > 0.0, 8.0 * half * (1.0 - half) / (np.pi * safe), 2.0 / np.pi)


def _angle_integrand(phi: float, beta: float) -> float:
    return float(_angle_density(phi, beta))


def _angle_of(law: MPLaw, lam: float) -> float:
    root = np.sqrt(law.beta)
    half = (lam / law.sigma2 - (1.0 - root) ** 2) / (4.0 * root)
    return float(2.0 * np.arcsin(np.sqrt(np.clip(half, 0.0, 1.0))))


def _lambda_of(law: MPLaw, phi: np.ndarray) -> np.ndarray:
    return law.sigma2 * _gap(np.sin(np.asarray(phi, dtype=float) / 2.0) ** 2, law.beta)


def _continuous_cdf_angle(phi: float, beta: float) -> float:
    if phi <= 0.0:
        return 0.0
    value, _ = integrate.quad(_angle_integrand, 0.0, phi, args=(beta,), epsabs=1e-13, epsrel=1e-12, limit=200)
    return value


def mp_cdf(law: MPLaw, lam: float) -> float:
    """CDF of the law including the point mass, by quadrature of the density."""
    _check(law)
    if lam < 0:
        raise NumericError(f"MP CDF needs lambda >= 0, got {lam}")
    mass0 = mp_point_mass(law)
    lower, upper = mp_support(law)
    if lam <= lower:
        return mass0
    if lam >= upper:
        return 1.0
    return float(min(1.0, mass0 + _continuous_cdf_angle(_angle_of(law, lam), law.beta)))


def mp_quantile(law: MPLaw, q: float) -> float:
    """q-quantile by a bracketed root solve on the quadrature CDF."""
    _check(law)
    if not 0.0 < q < 1.0:
        raise NumericError(f"quantile level must lie in (0, 1), got {q}")
    mass0 = mp_point_mass(law)
    if q <= mass0:
        return 0.0
    target = q - mass0
    phi = optimize.brentq(
        lambda a: _continuous_cdf_angle(a, law.beta) - target, 0.0, np.pi, xtol=1e-14, rtol=4 * np.finfo(float).eps
    )
    return float(_lambda_of(law, phi))


def mp_sample(law: MPLaw, rng: np.random.Generator) -> float:
    """One draw by inverse-CDF transform of a uniform variate."""
    return mp_quantile(law, _open_uniform(rng))


def _open_uniform(rng: np.random.Generator) -> float:
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return float(u)


@lru_cache(maxsize=32)
def _inverse_table(beta: float) -> Tuple[np.ndarray, np.ndarray]:
    # cumulative continuous mass on a uniform angle grid, by 8-point Gauss-Legendre per cell
    grid = np.linspace(0.0, np.pi, _TABLE_POINTS)
    nodes, weights = special.roots_legendre(8)
    left, right = grid[:-1, None], grid[1:, None]
    half = (right - left) / 2.0
    points = left + half * (nodes[None, :] + 1.0)
    values = _angle_density(points, beta)
    cells = (half[:, 0]) * (values @ weights)
    cdf = np.concatenate([[0.0], np.cumsum(cells)])
    return cdf, grid


def mp_sample_many(law: MPLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized draws through a tabulated inverse CDF."""
    _check(law)
    u = rng.random(size)
    mass0 = mp_point_mass(law)
    cdf, grid = _inverse_table(float(law.beta))
    phi = np.interp(np.clip(u - mass0, 0.0, None), cdf, grid)
    draws = _lambda_of(law, phi)
    draws[u <= mass0] = 0.0
    return draws


def random_direction_angle_quantile(ambient_dim: int, subspace_dim: int, q: float) -> float:
    """q-quantile, in degrees, of the angle between a uniform random direction and a fixed subspace.

    Uses cos²θ ~ Beta(r/2, (n - r)/2); small angles correspond to large cos²θ.
    """
    if not 1 <= subspace_dim < ambient_dim:
        raise NumericError(f"subspace dimension must satisfy 1 <= r < n, got r={subspace_dim}, n={ambient_dim}")
    if not 0.0 < q < 1.0:
        raise NumericError(f"quantile level must lie in (0, 1), got {q}")
    cos2 = stats.beta.isf(q, subspace_dim / 2.0, (ambient_dim - subspace_dim) / 2.0)
    return float(np.degrees(np.arccos(np.sqrt(np.clip(cos2, 0.0, 1.0)))))
