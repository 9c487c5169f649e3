"""First confluence at gamma = omega: energy classes, thresholds, BIC and lower bound-state spectra.

With gamma pinned to omega the field equation reduces to an sl(2) eigenvalue problem controlled by
alpha(E) = 1 + omega (E + delta) / g^2 and
Lambda(E) = (E + delta)(E - delta + omega) / (2 g^2).
|alpha| > 1 gives discrete levels, |alpha| < 1 the small continuum between E_thr and -delta.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from app.core.config import CONFLUENCE_SCAN_POINTS
from app.core.errors import BracketFailure, DomainError
from app.core.model import ModelParams

logger = logging.getLogger("stark_spectra.confluence")

DEFAULT_SOLVER_TOL = 1e-10
MAX_EXPANSIONS = 80


@dataclass(frozen=True)
class CriticalParams:
    omega: float
    delta: float
    g: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise DomainError("CriticalParams", f"omega must be > 0, got {self.omega!r}")
        if self.delta < 0:
            raise DomainError("CriticalParams", f"delta must be >= 0, got {self.delta!r}")
        if self.g < 0:
            raise DomainError("CriticalParams", f"g must be >= 0, got {self.g!r}")

    @classmethod
    def from_params(cls, params: ModelParams) -> "CriticalParams":
        return cls(omega=params.omega, delta=params.delta, g=params.g)

    @property
    def lower_bound_states_allowed(self) -> bool:
        return self.omega * (self.omega / 2 - self.delta) > self.g**2

    def _require_coupling(self, operation: str) -> None:
        if self.g <= 0:
            raise DomainError(operation, "alpha and Lambda are undefined at g = 0; use baseline_ladders")


class EnergyClass(str, Enum):
    DISCRETE_UPPER = "DiscreteUpper"
    SMALL_CONTINUUM = "SmallContinuum"
    DISCRETE_LOWER_WINDOW = "DiscreteLowerWindow"
    BELOW_THRESHOLD = "BelowThreshold"
    BOUNDARY_ALPHA_PLUS_ONE = "BoundaryAlphaPlusOne"
    BOUNDARY_ALPHA_MINUS_ONE = "BoundaryAlphaMinusOne"


@dataclass(frozen=True)
class ThresholdSet:
    e_thr: float
    e_c: float
    small_continuum_upper: float

    @property
    def pole_margin(self) -> float:
        """How far the first G-function pole sits above the true continuum threshold (g^2/omega)."""
        return self.e_c - self.e_thr


@dataclass(frozen=True)
class ConfluenceSpectrum:
    energies: np.ndarray
    quantum_numbers: np.ndarray
    residuals: np.ndarray
    failures: tuple[BracketFailure, ...] = field(default=())

    @property
    def parities(self) -> np.ndarray:
        return np.where(self.quantum_numbers % 2 == 0, 1, -1)


def alpha(cp: CriticalParams, energy):
    cp._require_coupling("alpha")
    return 1.0 + cp.omega * (np.asarray(energy, dtype=float) + cp.delta) / cp.g**2


def lambda_value(cp: CriticalParams, energy):
    cp._require_coupling("lambda_value")
    e = np.asarray(energy, dtype=float)
    return (e + cp.delta) * (e - cp.delta + cp.omega) / (2.0 * cp.g**2)


def thresholds(cp: CriticalParams) -> ThresholdSet:
    ratio = cp.g**2 / cp.omega
    return ThresholdSet(e_thr=-cp.delta - 2.0 * ratio, e_c=-(cp.delta + ratio), small_continuum_upper=-cp.delta)


def classify_energy(cp: CriticalParams, energy: float, tol: float = 1e-12) -> EnergyClass:
    a = float(alpha(cp, energy))
    if abs(a - 1.0) <= tol:
        return EnergyClass.BOUNDARY_ALPHA_PLUS_ONE
    if abs(a + 1.0) <= tol:
        return EnergyClass.BOUNDARY_ALPHA_MINUS_ONE
    if a > 1.0:
        return EnergyClass.DISCRETE_UPPER
    if a > -1.0:
        return EnergyClass.SMALL_CONTINUUM
    if energy > cp.delta - cp.omega:
        return EnergyClass.DISCRETE_LOWER_WINDOW
    return EnergyClass.BELOW_THRESHOLD


# Both eigenvalue equations are parametrized by s = sqrt(alpha^2 - 1) >= 0, which removes the
# square-root branch point at |alpha| = 1. sign = +1 selects alpha > 1, sign = -1 alpha < -1.


def _energy_of_s(cp: CriticalParams, s: float, sign: int) -> float:
    a = sign * math.sqrt(1.0 + s * s)
    return -cp.delta + cp.g**2 * (a - 1.0) / cp.omega


def _lambda_of_s(cp: CriticalParams, s: float, sign: int) -> float:
    a_minus_one = sign * math.sqrt(1.0 + s * s) - 1.0
    return a_minus_one * (cp.g**2 * a_minus_one / cp.omega + cp.omega - 2.0 * cp.delta) / (2.0 * cp.omega)


def _s_of_energy(cp: CriticalParams, energy: float) -> float:
    a = float(alpha(cp, energy))
    return math.sqrt(max(a * a - 1.0, 0.0))


def _scan_roots(
    func: Callable[[float], float],
    s_lo: float,
    s_hi: float,
    n: int,
    points: int,
) -> list[float]:
    grid = np.linspace(s_lo, s_hi, points + 1)
    values = np.array([func(float(s)) for s in grid])
    roots = []
    for i in range(points):
        left, right = values[i], values[i + 1]
        if left == 0.0 and i > 0:
            roots.append(float(grid[i]))
            continue
        if left * right < 0:
            try:
                roots.append(float(brentq(func, grid[i], grid[i + 1], xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)))
            except (RuntimeError, ValueError) as exc:
                raise BracketFailure(n, f"Brent refinement failed on [{grid[i]!r}, {grid[i + 1]!r}]: {exc}") from exc
    return roots


def _collect(
    cp: CriticalParams,
    sign: int,
    n_max: int,
    solver_tol: float,
    bounds: Callable[[int], tuple[float, float]],
    points: int,
    label: str,
) -> ConfluenceSpectrum:
    energies: list[float] = []
    numbers: list[int] = []
    residuals: list[float] = []
    failures: list[BracketFailure] = []
    for n in range(n_max + 1):
        k = n + 0.5

        def equation(s: float, k: float = k) -> float:
            return s * k - sign * _lambda_of_s(cp, s, sign)

        try:
            s_lo, s_hi = bounds(n)
            for s in _scan_roots(equation, s_lo, s_hi, n, points):
                residual = abs(equation(s))
                if residual >= solver_tol * max(1.0, s * k):
                    raise BracketFailure(n, f"residual {residual:.3e} above tolerance {solver_tol:g}")
                energies.append(_energy_of_s(cp, s, sign))
                numbers.append(n)
                residuals.append(residual)
        except BracketFailure as exc:
            logger.warning("%s_bracket_failure n=%s reason=%s", label, n, exc)
            failures.append(exc)

    order = np.argsort(energies, kind="stable")
    spectrum = ConfluenceSpectrum(
        energies=np.asarray(energies, dtype=float)[order],
        quantum_numbers=np.asarray(numbers, dtype=int)[order],
        residuals=np.asarray(residuals, dtype=float)[order],
        failures=tuple(failures),
    )
    logger.debug("%s_spectrum g=%s levels=%s failures=%s", label, cp.g, spectrum.energies.size, len(failures))
    return spectrum


def bic_energies(
    cp: CriticalParams,
    n_max: int,
    solver_tol: float = DEFAULT_SOLVER_TOL,
    scan_points: int = CONFLUENCE_SCAN_POINTS,
) -> ConfluenceSpectrum:
    """Bound states in the continuum: sqrt(alpha^2 - 1)(n + 1/2) = Lambda on E > max(-delta, delta - omega)."""
    cp._require_coupling("bic_energies")
    if n_max < 0:
        return ConfluenceSpectrum(np.empty(0), np.empty(0, dtype=int), np.empty(0))
    e_floor = max(-cp.delta, cp.delta - cp.omega)
    s_floor = _s_of_energy(cp, e_floor)

    def bounds(n: int) -> tuple[float, float]:
        k = n + 0.5
        # the equation is s k - Lambda(s), and Lambda grows like g^2 s^2 / (2 omega^2)
        s_hi = max(2.0 * s_floor, 4.0 * k * cp.omega**2 / cp.g**2, 1.0)
        for _ in range(MAX_EXPANSIONS):
            if s_hi * k - _lambda_of_s(cp, s_hi, 1) < 0:
                break
            s_hi *= 2.0
        else:
            raise BracketFailure(n, "no upper bracket found")
        # s = 0 solves the equation trivially when the floor is -delta, so start just above it
        s_lo = s_floor if s_floor > 0 else s_hi * 1e-12
        return s_lo, s_hi

    return _collect(cp, 1, n_max, solver_tol, bounds, scan_points, "bic")


def lbs_energies(
    cp: CriticalParams,
    n_max: int,
    solver_tol: float = DEFAULT_SOLVER_TOL,
    scan_points: int = CONFLUENCE_SCAN_POINTS,
) -> ConfluenceSpectrum:
    """Lower bound states: sqrt(alpha^2 - 1)(n + 1/2) = -Lambda on delta - omega < E < E_thr.

    Empty unless omega (omega/2 - delta) > g^2.
    """
    cp._require_coupling("lbs_energies")
    if n_max < 0 or not cp.lower_bound_states_allowed:
        return ConfluenceSpectrum(np.empty(0), np.empty(0, dtype=int), np.empty(0))
    s_ceiling = _s_of_energy(cp, cp.delta - cp.omega)

    def bounds(n: int) -> tuple[float, float]:
        # s = 0 is E_thr and s_ceiling is delta - omega, both excluded
        width = s_ceiling * 1e-12
        return width, s_ceiling - width

    return _collect(cp, -1, n_max, solver_tol, bounds, scan_points, "lbs")
