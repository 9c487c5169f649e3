"""Rabi-Stark model parameters, g=0 ladders and the map onto the effective Rabi model.

H = omega a^dag a + sigma_z (gamma a^dag a + delta) + g sigma_x (a^dag + a), hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from app.core.errors import DomainError


class Parity(IntEnum):
    # eigenvalue of (-1)^{a^dag a} sigma_z
    POSITIVE = 1
    NEGATIVE = -1


@dataclass(frozen=True)
class ModelParams:
    omega: float
    gamma: float
    delta: float
    g: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise DomainError("ModelParams", f"omega must be > 0, got {self.omega!r}")
        if self.gamma < 0:
            raise DomainError("ModelParams", f"gamma must be >= 0, got {self.gamma!r}")
        if self.delta < 0:
            raise DomainError("ModelParams", f"delta must be >= 0, got {self.delta!r}")
        if self.g < 0:
            raise DomainError("ModelParams", f"g must be >= 0, got {self.g!r}")

    @property
    def subcritical(self) -> bool:
        return self.gamma < self.omega

    def require_subcritical(self, operation: str) -> None:
        if not self.subcritical:
            raise DomainError(
                operation,
                f"requires gamma < omega (got gamma={self.gamma!r}, omega={self.omega!r}); "
                "the scale transformation is singular at gamma = omega",
            )

    def with_coupling(self, g: float) -> "ModelParams":
        return replace(self, g=float(g))

    @property
    def pole_spacing(self) -> float:
        return (self.omega**2 - self.gamma**2) / self.omega


@dataclass(frozen=True)
class RenormalizedView:
    """Parameters of the effective Rabi model reached by the scale transformation.

    delta_tilde, e_tilde and x depend on the trial energy, so they are methods.
    epsilon is the gap scale sqrt(omega^2 - gamma^2) of the first confluence.
    """

    params: ModelParams
    eta: float
    g_tilde: float
    epsilon: float

    @property
    def _denominator(self) -> float:
        return self.epsilon**2

    def delta_tilde(self, energy):
        p = self.params
        return (p.omega * p.delta + p.gamma * energy) / self._denominator

    def e_tilde(self, energy):
        p = self.params
        return (p.omega * energy + p.gamma * p.delta) / self._denominator

    def x(self, energy):
        p = self.params
        return (p.omega * energy + p.gamma * p.delta + p.g**2) / self._denominator

    def energy_at(self, x):
        p = self.params
        return (self._denominator * x - p.gamma * p.delta - p.g**2) / p.omega


def renormalize(params: ModelParams) -> RenormalizedView:
    params.require_subcritical("renormalize")
    epsilon = math.sqrt(params.omega**2 - params.gamma**2)
    return RenormalizedView(
        params=params,
        eta=(params.omega + params.gamma) / (params.omega - params.gamma),
        g_tilde=params.g / epsilon,
        epsilon=epsilon,
    )


def baseline_ladders(params: ModelParams, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(max(n_max, -1) + 1, dtype=float)
    upper = np.sort((params.omega + params.gamma) * n + params.delta)
    lower = np.sort((params.omega - params.gamma) * n - params.delta)
    return upper, lower


def crossing_couplings(params: ModelParams, n_max: int) -> np.ndarray:
    """Couplings g_c^(n) at which the special crossing at E = -omega*delta/gamma occurs."""
    if params.gamma <= 0:
        raise DomainError("crossing_couplings", "requires gamma > 0 (all g_c^(n) diverge as gamma -> 0)")
    params.require_subcritical("crossing_couplings")
    n = np.arange(max(n_max, -1) + 1, dtype=float)
    return np.sqrt(n + params.delta / params.gamma) * math.sqrt(params.omega**2 - params.gamma**2)


def degenerate_energy(params: ModelParams) -> float:
    if params.gamma <= 0:
        raise DomainError("degenerate_energy", "requires gamma > 0")
    return -params.omega * params.delta / params.gamma
