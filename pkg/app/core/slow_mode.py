"""Slow-mode (adiabatic) effective potentials for the field coordinate q, with m = 1.

E_{a,b}(q) = (omega^2/2) q^2 - omega/2 +/- sqrt[(delta' + (omega gamma/2) q^2)^2 + 2 omega g^2 q^2],
delta' = delta - gamma/2. All energies are in the Hamiltonian convention, so the -omega/2 zero-point
offset lives here and nowhere else.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from app.core.confluence import CriticalParams
from app.core.errors import BoundaryTooTight, DomainError
from app.core.model import ModelParams

logger = logging.getLogger("stark_spectra.slow_mode")


class Band(str, Enum):
    A = "a"
    B = "b"


@dataclass(frozen=True)
class BandPotential:
    band: Band
    q_grid: np.ndarray
    values: np.ndarray
    # 1 + gamma/omega for band a, 1 - gamma/omega for band b
    effective_mass_divisor: float


def shifted_delta(params: ModelParams) -> float:
    return params.delta - params.gamma / 2


def mass_divisor(params: ModelParams, band: Band) -> float:
    ratio = params.gamma / params.omega
    return 1.0 + ratio if Band(band) == Band.A else 1.0 - ratio


def band_value(params: ModelParams, band: Band, q):
    q = np.asarray(q, dtype=float)
    q2 = q * q
    root = np.sqrt(
        (shifted_delta(params) + 0.5 * params.omega * params.gamma * q2) ** 2 + 2.0 * params.omega * params.g**2 * q2
    )
    base = 0.5 * params.omega**2 * q2 - 0.5 * params.omega
    return base + root if Band(band) == Band.A else base - root


def sample_band(params: ModelParams, band: Band, q_half_width: float, n_points: int) -> BandPotential:
    if not q_half_width > 0 or n_points < 3:
        raise DomainError("sample_band", "need q_half_width > 0 and n_points >= 3")
    q_grid = np.linspace(-q_half_width, q_half_width, n_points)
    return BandPotential(
        band=Band(band),
        q_grid=q_grid,
        values=band_value(params, band, q_grid),
        effective_mass_divisor=mass_divisor(params, band),
    )


def count_minima(potential: BandPotential) -> int:
    v = potential.values
    if v.size < 3:
        return 0
    inner = v[1:-1]
    return int(np.count_nonzero((inner < v[:-2]) & (inner < v[2:])))


def harmonic_band_levels(params: ModelParams, band: Band, n_max: int) -> np.ndarray:
    band = Band(band)
    d_prime = shifted_delta(params)
    if d_prime <= 0:
        raise DomainError("harmonic_band_levels", f"requires delta - gamma/2 > 0, got {d_prime!r}")
    n = np.arange(max(n_max, -1) + 1, dtype=float)
    frequency = params.omega * mass_divisor(params, band)
    if band == Band.A:
        return d_prime + (n + 0.5) * frequency * math.sqrt(1.0 + 2.0 * params.g**2 / (frequency * d_prime)) - params.omega / 2

    if frequency <= 0:
        raise DomainError("harmonic_band_levels", "band b has no harmonic expansion for gamma >= omega")
    argument = 1.0 - 2.0 * params.g**2 / (frequency * d_prime)
    if argument <= 0:
        raise DomainError(
            "harmonic_band_levels",
            f"band b is not harmonic at g={params.g!r} (onset {double_well_onset(params)!r})",
        )
    return -d_prime + (n + 0.5) * frequency * math.sqrt(argument) - params.omega / 2


def double_well_onset(params: ModelParams) -> float:
    """Coupling where the q^2 term of band b vanishes and the single well splits in two."""
    d_prime = shifted_delta(params)
    if d_prime <= 0:
        raise DomainError("double_well_onset", f"requires delta - gamma/2 > 0, got {d_prime!r}")
    if params.gamma > params.omega:
        raise DomainError("double_well_onset", "requires gamma <= omega")
    return math.sqrt(params.omega * d_prime * (1.0 - params.gamma / params.omega) / 2.0)


def lower_band_quartic_coefficient(params: ModelParams) -> float:
    d_prime = shifted_delta(params)
    if d_prime <= 0:
        raise DomainError("lower_band_quartic_coefficient", f"requires delta - gamma/2 > 0, got {d_prime!r}")
    c = 0.5 * params.omega * params.gamma
    p = (2.0 * d_prime * c + 2.0 * params.omega * params.g**2) / d_prime**2
    r = c * c / d_prime**2
    return -d_prime * (r / 2.0 - p * p / 8.0)


def band_asymptote(cp: CriticalParams) -> float:
    return -cp.delta - 2.0 * cp.g**2 / cp.omega


def solve_band_schrodinger(
    params: ModelParams,
    band: Band,
    q_half_width: float,
    n_points: int,
    k_levels: int,
) -> np.ndarray:
    """Lowest k_levels of -1/2 d^2/dq^2 + E_band(q)/divisor, scaled back by divisor.

    Second-order central differences with Dirichlet walls at q = +/-q_half_width.
    """
    band = Band(band)
    divisor = mass_divisor(params, band)
    if divisor <= 0:
        raise DomainError("solve_band_schrodinger", "band b needs gamma < omega (effective mass diverges)")
    if n_points < 101 or n_points % 2 == 0:
        raise DomainError("solve_band_schrodinger", f"n_points must be odd and >= 101, got {n_points}")
    if not 1 <= k_levels <= n_points - 2:
        raise DomainError("solve_band_schrodinger", f"k_levels must lie in [1, {n_points - 2}], got {k_levels}")

    potential = sample_band(params, band, q_half_width, n_points)
    h = potential.q_grid[1] - potential.q_grid[0]
    interior = potential.values[1:-1] / divisor
    diagonal = interior + 1.0 / (h * h)
    off_diagonal = np.full(interior.size - 1, -0.5 / (h * h))
    eigenvalues = scipy.linalg.eigh_tridiagonal(
        diagonal, off_diagonal, eigvals_only=True, select="i", select_range=(0, k_levels - 1)
    )
    levels = np.sort(eigenvalues) * divisor

    boundary_value = float(min(potential.values[0], potential.values[-1]))
    if levels[-1] >= boundary_value:
        raise BoundaryTooTight(q_half_width, float(levels[-1]), boundary_value)
    logger.debug(
        "band_solve band=%s g=%s points=%s top_level=%s boundary=%s",
        band.value,
        params.g,
        n_points,
        levels[-1],
        boundary_value,
    )
    return levels


def envelope_excess(energy: float, levels: np.ndarray) -> float:
    """Distance by which energy leaves the interval spanned by its two nearest levels."""
    levels = np.asarray(levels, dtype=float)
    if levels.size < 2:
        return math.inf
    nearest = levels[np.argsort(np.abs(levels - energy))[:2]]
    return float(max(0.0, nearest.min() - energy, energy - nearest.max()))
