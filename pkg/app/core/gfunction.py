"""Spectral determinants G_+/-(x) of the Rabi-Stark model and pole-aware root finding.

The series is summed as L_n = K_n gt^n, whose recurrence carries no 1/gt and stays regular at g = 0.
Zeros of G_+ carry parity +1, zeros of G_- parity -1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from app.core.config import (
    G_N_TERMS_MAX,
    G_POLE_GUARD,
    G_SCAN_POINTS_PER_INTERVAL,
    G_TAIL_TOLERANCE,
)
from app.core.errors import DomainError, NonConvergence, PoleProximity
from app.core.model import ModelParams, Parity, RenormalizedView, renormalize

logger = logging.getLogger("stark_spectra.gfunction")

RESCALE_EVERY = 32
TAIL_RUN = 3
# |sum| / largest term below this leaves the sign of G to rounding
CANCELLATION_FLOOR = 1e3 * np.finfo(float).eps
# log-distances (in x units, relative to the guard) of the extra samples placed next to each pole
NEAR_POLE_DECADES = (1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0)


@dataclass(frozen=True)
class GSeriesSettings:
    n_terms_max: int = G_N_TERMS_MAX
    tail_tolerance: float = G_TAIL_TOLERANCE
    pole_guard: float = G_POLE_GUARD

    def __post_init__(self) -> None:
        if self.n_terms_max < 8:
            raise DomainError("GSeriesSettings", f"n_terms_max must be >= 8, got {self.n_terms_max}")
        if not self.tail_tolerance > 0:
            raise DomainError("GSeriesSettings", "tail_tolerance must be > 0")
        if not self.pole_guard > 0:
            raise DomainError("GSeriesSettings", "pole_guard must be > 0")


DEFAULT_SETTINGS = GSeriesSettings()


@dataclass(frozen=True)
class GValue:
    sign: int
    log_magnitude: float
    n_terms: int
    # |sum| over the largest term of the series
    cancellation: float = 1.0

    @property
    def reliable(self) -> bool:
        return self.cancellation >= CANCELLATION_FLOOR


@dataclass(frozen=True)
class PoleSet:
    energies: np.ndarray
    spacing: float


@dataclass(frozen=True)
class RootScan:
    roots: np.ndarray
    # scan samples whose sign could not be trusted
    unreliable: np.ndarray


def _check_pole_distance(x: float, settings: GSeriesSettings) -> None:
    nearest = int(round(x))
    if 0 <= nearest <= settings.n_terms_max and abs(x - nearest) <= settings.pole_guard:
        raise PoleProximity(x, nearest, settings.pole_guard)


def _evaluate(view: RenormalizedView, parity: Parity, energy: float, settings: GSeriesSettings) -> GValue:
    x = float(view.x(energy))
    _check_pole_distance(x, settings)
    dt = float(view.delta_tilde(energy))
    gt2 = view.g_tilde**2
    s = float(parity)

    l_prev = 0.0
    l_curr = 1.0
    total = 1.0 - s * dt / x
    peak = max(abs(total), 1.0)
    log_scale = 0.0
    quiet = 0
    for n in range(1, settings.n_terms_max + 1):
        k = n - 1
        # gt * f_{n-1}
        coeff = 2.0 * gt2 + 0.5 * (k - x + dt * dt / (x - k))
        l_next = (coeff * l_curr - gt2 * l_prev) / n
        term = l_next * (1.0 - s * dt / (x - n))
        total += term
        l_prev, l_curr = l_curr, l_next
        magnitude = abs(term)
        peak = max(peak, magnitude)
        if n > x + 1 and magnitude <= settings.tail_tolerance * peak:
            quiet += 1
            if quiet >= TAIL_RUN:
                break
        else:
            quiet = 0
        if n % RESCALE_EVERY == 0:
            scale = max(abs(l_prev), abs(l_curr), abs(total), peak)
            if scale > 0 and math.isfinite(scale):
                l_prev /= scale
                l_curr /= scale
                total /= scale
                peak /= scale
                log_scale += math.log(scale)
        if not math.isfinite(total):
            raise NonConvergence(f"G-series overflowed at x={x!r}", iterations=n)
    else:
        raise NonConvergence(
            f"G-series tail above {settings.tail_tolerance:g} after {settings.n_terms_max} terms at x={x!r}",
            iterations=settings.n_terms_max,
        )
    cancellation = abs(total) / peak
    if total == 0.0:
        return GValue(sign=0, log_magnitude=-math.inf, n_terms=n, cancellation=0.0)
    return GValue(
        sign=1 if total > 0 else -1,
        log_magnitude=math.log(abs(total)) + log_scale,
        n_terms=n,
        cancellation=cancellation,
    )


def g_value(
    params: ModelParams,
    parity: Parity,
    energy: float,
    settings: GSeriesSettings = DEFAULT_SETTINGS,
) -> GValue:
    params.require_subcritical("g_value")
    return _evaluate(renormalize(params), Parity(parity), energy, settings)


def pole_set(params: ModelParams, n_max: int) -> PoleSet:
    view = renormalize(params)
    n = np.arange(max(n_max, -1) + 1, dtype=float)
    return PoleSet(energies=view.energy_at(n), spacing=params.pole_spacing)


def _scan_grid(a: float, b: float, points: int, left_pole: bool, right_pole: bool, guard_e: float) -> np.ndarray:
    grid = np.linspace(a, b, points + 1)
    extra = []
    width = b - a
    for decade in NEAR_POLE_DECADES:
        offset = guard_e * decade
        if offset >= width / 2:
            break
        if left_pole:
            extra.append(a + offset - guard_e)
        if right_pole:
            extra.append(b - offset + guard_e)
    if extra:
        grid = np.union1d(grid, np.clip(extra, a, b))
    return grid


def _signed(view: RenormalizedView, parity: Parity, settings: GSeriesSettings, reference: float):
    def evaluate(energy: float) -> float:
        gv = _evaluate(view, parity, energy, settings)
        if gv.sign == 0:
            return 0.0
        # monotone in |G| and free of overflow, so its zeros are those of G
        return gv.sign * math.exp(max(min(gv.log_magnitude - reference, 600.0), -600.0))

    return evaluate


def scan_roots(
    params: ModelParams,
    parity: Parity,
    e_lo: float,
    e_hi: float,
    settings: GSeriesSettings = DEFAULT_SETTINGS,
    scan_points_per_interval: int = G_SCAN_POINTS_PER_INTERVAL,
) -> RootScan:
    """Zeros of G_parity(E) in [e_lo, e_hi] from a scan punctured at the poles.

    Sign changes between neighbouring trustworthy samples are refined with Brent's method. Samples
    lost to cancellation or to a diverging series are skipped and returned in unreliable.
    """
    params.require_subcritical("find_roots")
    if not e_hi > e_lo:
        return RootScan(np.empty(0), np.empty(0))
    parity = Parity(parity)
    view = renormalize(params)
    spacing = params.pole_spacing
    guard_e = settings.pole_guard * spacing

    n_first = max(0, math.ceil(float(view.x(e_lo))))
    n_last = min(settings.n_terms_max, math.floor(float(view.x(e_hi))))
    poles = [float(view.energy_at(n)) for n in range(n_first, n_last + 1)]
    poles = [p for p in poles if e_lo < p < e_hi]

    edges = [e_lo, *poles, e_hi]
    roots: list[float] = []
    unreliable: list[float] = []
    for idx in range(len(edges) - 1):
        left_pole = idx > 0
        right_pole = idx < len(edges) - 2
        a = edges[idx] + (2.0 * guard_e if left_pole else 0.0)
        b = edges[idx + 1] - (2.0 * guard_e if right_pole else 0.0)
        if not b > a:
            continue
        points = max(scan_points_per_interval, math.ceil(scan_points_per_interval * (b - a) / spacing))
        grid = _scan_grid(a, b, points, left_pole, right_pole, guard_e)
        roots.extend(_roots_on_grid(view, parity, settings, grid, unreliable))

    if unreliable:
        logger.warning(
            "g_sign_unreliable parity=%s gamma=%s g=%s samples=%s span=[%s,%s]",
            int(parity),
            params.gamma,
            params.g,
            len(unreliable),
            min(unreliable),
            max(unreliable),
        )
    if not roots:
        return RootScan(np.empty(0), np.asarray(unreliable))
    ordered = np.sort(np.asarray(roots))
    keep = [ordered[0]]
    for value in ordered[1:]:
        if value - keep[-1] > 1e-9 * max(1.0, abs(value)):
            keep.append(value)
    logger.debug("find_roots parity=%s window=[%s,%s] roots=%s", int(parity), e_lo, e_hi, len(keep))
    return RootScan(np.asarray(keep), np.asarray(unreliable))


def find_roots(
    params: ModelParams,
    parity: Parity,
    e_lo: float,
    e_hi: float,
    settings: GSeriesSettings = DEFAULT_SETTINGS,
    scan_points_per_interval: int = G_SCAN_POINTS_PER_INTERVAL,
) -> np.ndarray:
    """Like scan_roots, but raises NonConvergence when part of the window could not be scanned."""
    scan = scan_roots(params, parity, e_lo, e_hi, settings, scan_points_per_interval)
    if scan.unreliable.size:
        raise NonConvergence(
            f"sign of G unreliable at {scan.unreliable.size} scan points in "
            f"[{scan.unreliable.min()!r}, {scan.unreliable.max()!r}] (gamma={params.gamma!r})",
        )
    return scan.roots


def _roots_on_grid(
    view: RenormalizedView,
    parity: Parity,
    settings: GSeriesSettings,
    grid: np.ndarray,
    unreliable: list[float],
) -> list[float]:
    samples: list[tuple[float, Optional[GValue]]] = []
    for energy in grid:
        try:
            gv = _evaluate(view, parity, float(energy), settings)
        except PoleProximity:
            continue
        except NonConvergence:
            unreliable.append(float(energy))
            samples.append((float(energy), None))
            continue
        if not gv.reliable:
            unreliable.append(float(energy))
            gv = None
        samples.append((float(energy), gv))
    trusted = [gv for _, gv in samples if gv is not None and gv.sign != 0]
    if not trusted:
        return []
    reference = max(v.log_magnitude for v in trusted)
    func = _signed(view, parity, settings, reference)

    found = []
    for (energy, gv), (upper, nxt) in zip(samples, samples[1:]):
        if gv is None or nxt is None or nxt.sign == 0 or gv.sign in (0, nxt.sign):
            continue
        xtol = 1e-12 * max(1.0, abs(energy), abs(upper))
        try:
            found.append(float(brentq(func, energy, upper, xtol=xtol, rtol=4 * np.finfo(float).eps)))
        except NonConvergence:
            unreliable.append(0.5 * (energy + upper))
    return found
