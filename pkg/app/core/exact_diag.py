"""Exact diagonalization of the truncated Rabi-Stark Hamiltonian.

Basis index i = 2n + s over Fock states n = 0..n_trunc-1 and spin s = 0 (sigma_z = +1), s = 1
(sigma_z = -1). The coupling g sigma_x (a^dag + a) links |n,up> <-> |n+1,down> and |n,down> <-> |n+1,up>,
so the matrix has bandwidth 3 in this ordering.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.sparse.linalg import ArpackNoConvergence

from app.core.config import DENSE_DIMENSION_LIMIT
from app.core.errors import DomainError, NonConvergence
from app.core.model import ModelParams, Parity

logger = logging.getLogger("stark_spectra.exact_diag")

RESIDUAL_FACTOR = 1e-9
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class TruncatedHamiltonian:
    params: ModelParams
    n_trunc: int
    # rows: superdiagonals 3, 2, 1, 0 (LAPACK upper banded storage)
    band: np.ndarray

    @property
    def dimension(self) -> int:
        return 2 * self.n_trunc

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_trunc, dtype=float), 2)

    @property
    def spin(self) -> np.ndarray:
        return np.tile(np.array([1.0, -1.0]), self.n_trunc)

    @property
    def parity_diagonal(self) -> np.ndarray:
        n = np.repeat(np.arange(self.n_trunc), 2)
        return np.where(n % 2 == 0, 1.0, -1.0) * self.spin

    def sparse(self) -> scipy.sparse.csr_matrix:
        dim = self.dimension
        upper = scipy.sparse.diags(
            [self.band[3 - k, k:] for k in (1, 2, 3)],
            offsets=[1, 2, 3],
            shape=(dim, dim),
        )
        return (upper + upper.T + scipy.sparse.diags(self.band[3], 0, shape=(dim, dim))).tocsr()

    def dense(self) -> np.ndarray:
        return self.sparse().toarray()

    def norm_bound(self) -> float:
        return float(np.max(np.abs(self.sparse()).sum(axis=1)))

    def gershgorin_lower(self) -> float:
        matrix = self.sparse()
        radius = np.asarray(np.abs(matrix).sum(axis=1)).ravel() - np.abs(matrix.diagonal())
        return float(np.min(matrix.diagonal() - radius))


@dataclass(frozen=True)
class EigenSolution:
    energies: np.ndarray
    parity_expectation: np.ndarray
    photon_content: np.ndarray
    n_trunc: int
    max_residual: float = 0.0
    solver: str = "dense"
    # True only once a larger truncation confirmed the energies
    converged: bool = False
    refinements: tuple[int, ...] = ()

    @property
    def parities(self) -> np.ndarray:
        return np.where(self.parity_expectation >= 0, 1, -1)

    def select(self, mask: np.ndarray) -> "EigenSolution":
        return EigenSolution(
            energies=self.energies[mask],
            parity_expectation=self.parity_expectation[mask],
            photon_content=self.photon_content[mask],
            n_trunc=self.n_trunc,
            max_residual=self.max_residual,
            solver=self.solver,
            converged=self.converged,
            refinements=self.refinements,
        )


@dataclass(frozen=True)
class AvoidedCrossing:
    g: float
    gap: float
    # ranks of the two levels within their parity sector
    level_pair: tuple[int, int]
    parity: int = 0


@dataclass(frozen=True)
class SpectralGraph:
    g_grid: np.ndarray
    # level index x g index
    levels: np.ndarray
    parities: np.ndarray
    photon: np.ndarray
    converged: np.ndarray
    n_trunc: np.ndarray
    residuals: np.ndarray
    parity_filter: Optional[Parity] = None
    avoided_crossings: tuple[AvoidedCrossing, ...] = field(default=())


def build_hamiltonian(params: ModelParams, n_trunc: int) -> TruncatedHamiltonian:
    if n_trunc < 2:
        raise DomainError("build_hamiltonian", f"n_trunc must be >= 2, got {n_trunc}")
    n = np.arange(n_trunc, dtype=float)
    dim = 2 * n_trunc
    band = np.zeros((4, dim))
    band[3, 0::2] = params.omega * n + (params.gamma * n + params.delta)
    band[3, 1::2] = params.omega * n - (params.gamma * n + params.delta)
    coupling = params.g * np.sqrt(n[:-1] + 1.0)
    # |n,down> (2n+1) <-> |n+1,up> (2n+2): offset 1, column 2n+2
    band[2, 2::2] = coupling
    # |n,up> (2n) <-> |n+1,down> (2n+3): offset 3, column 2n+3
    band[0, 3::2] = coupling
    return TruncatedHamiltonian(params=params, n_trunc=n_trunc, band=band)


def _resolve_degenerate_parity(values: np.ndarray, vectors: np.ndarray, parity_diag: np.ndarray) -> np.ndarray:
    """Rotate eigenvectors inside degenerate clusters so that each is a parity eigenvector."""
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    start = 0
    while start < values.size:
        stop = start + 1
        while stop < values.size and values[stop] - values[stop - 1] <= DEGENERACY_TOL * scale:
            stop += 1
        if stop - start > 1:
            block = vectors[:, start:stop]
            projected = block.T @ (parity_diag[:, None] * block)
            _, rotation = np.linalg.eigh(projected)
            vectors[:, start:stop] = block @ rotation
        start = stop
    return vectors


def _observables(h: TruncatedHamiltonian, values: np.ndarray, vectors: np.ndarray, solver: str) -> EigenSolution:
    order = np.argsort(values)
    values = values[order]
    vectors = _resolve_degenerate_parity(values, vectors[:, order].copy(), h.parity_diagonal)
    weights = vectors**2
    matrix = h.sparse()
    residual = np.linalg.norm(matrix @ vectors - vectors * values, axis=0)
    max_residual = float(np.max(residual)) if residual.size else 0.0
    bound = RESIDUAL_FACTOR * max(h.norm_bound(), 1.0)
    if max_residual > bound:
        raise NonConvergence(
            f"{solver} eigensolver residual {max_residual:.3e} exceeds {bound:.3e}",
            residual=max_residual,
        )
    return EigenSolution(
        energies=values,
        parity_expectation=weights.T @ h.parity_diagonal,
        photon_content=weights.T @ h.photon_numbers,
        n_trunc=h.n_trunc,
        max_residual=max_residual,
        solver=solver,
    )


def diagonalize(h: TruncatedHamiltonian, k_levels: int) -> EigenSolution:
    if not 1 <= k_levels <= h.dimension:
        raise DomainError("diagonalize", f"k_levels must lie in [1, {h.dimension}], got {k_levels}")
    if h.dimension <= DENSE_DIMENSION_LIMIT or k_levels >= h.dimension - 1:
        values, vectors = scipy.linalg.eigh(h.dense(), subset_by_index=[0, k_levels - 1])
        return _observables(h, values, vectors, "dense")

    sigma = h.gershgorin_lower() - 1.0
    try:
        values, vectors = scipy.sparse.linalg.eigsh(
            h.sparse().tocsc(), k=k_levels, sigma=sigma, which="LM", tol=1e-13, maxiter=20 * h.dimension
        )
    except ArpackNoConvergence as exc:
        raise NonConvergence(
            f"shift-invert Lanczos did not converge for {k_levels} levels at dimension {h.dimension}",
            iterations=20 * h.dimension,
            residual=None,
        ) from exc
    return _observables(h, values, vectors, "shift_invert")


def levels_in_window(h: TruncatedHamiltonian, e_lo: float, e_hi: float) -> EigenSolution:
    if not e_hi > e_lo:
        raise DomainError("levels_in_window", "e_hi must exceed e_lo")
    values, vectors = scipy.linalg.eig_banded(h.band, lower=False, select="v", select_range=(e_lo, e_hi))
    return _observables(h, values, vectors, "banded_window")


def _relative_shift(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))))


def converged_spectrum(
    params: ModelParams,
    k_levels: int,
    rel_tol: float = 1e-10,
    n_start: int = 200,
    n_cap: int = 2000,
) -> EigenSolution:
    """Grow n_trunc by 50% until the lowest k_levels energies stop moving.

    Returns the coarser of the last two solutions, flagged converged=False when n_cap stopped the
    refinement first.
    """
    if n_start < k_levels:
        raise DomainError("converged_spectrum", f"n_start ({n_start}) must be >= k_levels ({k_levels})")
    n_cap = max(n_cap, n_start)
    n_trunc = n_start
    current = diagonalize(build_hamiltonian(params, n_trunc), k_levels)
    history = [n_trunc]
    while n_trunc < n_cap:
        n_next = min(n_cap, math.ceil(1.5 * n_trunc))
        refined = diagonalize(build_hamiltonian(params, n_next), k_levels)
        history.append(n_next)
        shift = _relative_shift(current.energies, refined.energies)
        logger.debug("converged_spectrum g=%s n_trunc=%s->%s shift=%.3e", params.g, n_trunc, n_next, shift)
        if shift < rel_tol:
            return _with_history(current, True, history)
        current, n_trunc = refined, n_next
    logger.warning("converged_spectrum_cap_reached g=%s gamma=%s n_cap=%s", params.g, params.gamma, n_cap)
    return _with_history(current, False, history)


def _with_history(solution: EigenSolution, converged: bool, history: list[int]) -> EigenSolution:
    return EigenSolution(
        energies=solution.energies,
        parity_expectation=solution.parity_expectation,
        photon_content=solution.photon_content,
        n_trunc=solution.n_trunc,
        max_residual=solution.max_residual,
        solver=solution.solver,
        converged=converged,
        refinements=tuple(history),
    )


@dataclass(frozen=True)
class SweepSettings:
    n_trunc: int = 200
    adaptive: bool = False
    n_cap: int = 2000
    rel_tol: float = 1e-8
    threads: int = 1


def _column(params: ModelParams, k_levels: int, parity_filter: Optional[Parity], settings: SweepSettings) -> EigenSolution:
    # a parity sector holds roughly half of the levels, so over-request before filtering
    k_request = k_levels if parity_filter is None else 2 * k_levels + 4
    k_request = min(k_request, 2 * settings.n_trunc)
    if settings.adaptive:
        solution = converged_spectrum(params, k_request, settings.rel_tol, max(settings.n_trunc, k_request), settings.n_cap)
    else:
        solution = diagonalize(build_hamiltonian(params, settings.n_trunc), k_request)
    if parity_filter is not None:
        solution = solution.select(solution.parities == int(parity_filter))
    return solution.select(np.arange(min(k_levels, solution.energies.size)))


def sweep(
    params_base: ModelParams,
    g_grid: Sequence[float],
    k_levels: int,
    parity_filter: Optional[Parity] = None,
    settings: SweepSettings = SweepSettings(),
) -> SpectralGraph:
    grid = np.asarray(g_grid, dtype=float)
    if grid.size and np.any(np.diff(grid) < 0):
        raise DomainError("sweep", "g_grid must be ascending")
    columns = len(grid)
    levels = np.full((k_levels, columns), np.nan)
    parities = np.zeros((k_levels, columns), dtype=int)
    photon = np.full((k_levels, columns), np.nan)
    converged = np.zeros(columns, dtype=bool)
    n_used = np.zeros(columns, dtype=int)
    residuals = np.full(columns, np.nan)

    def work(g: float) -> Optional[EigenSolution]:
        try:
            return _column(params_base.with_coupling(g), k_levels, parity_filter, settings)
        except NonConvergence as exc:
            logger.warning("sweep_column_failed g=%s detail=%s", g, str(exc))
            return None

    if settings.threads > 1 and columns > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            results = list(pool.map(work, grid))
    else:
        results = [work(g) for g in grid]

    for j, solution in enumerate(results):
        if solution is None:
            continue
        count = solution.energies.size
        levels[:count, j] = solution.energies
        parities[:count, j] = solution.parities
        photon[:count, j] = solution.photon_content
        converged[j] = solution.converged and count == k_levels
        n_used[j] = solution.n_trunc
        residuals[j] = solution.max_residual
        logger.debug("sweep_column_done g=%s n_trunc=%s levels=%s", grid[j], solution.n_trunc, count)

    graph = SpectralGraph(
        g_grid=grid,
        levels=levels,
        parities=parities,
        photon=photon,
        converged=converged,
        n_trunc=n_used,
        residuals=residuals,
        parity_filter=parity_filter,
    )
    if columns >= 3:
        graph = replace(graph, avoided_crossings=tuple(detect_avoided_crossings(graph)))
    return graph


def _sector_levels(graph: SpectralGraph, parity: int) -> np.ndarray:
    sector = np.full(graph.levels.shape, np.nan)
    for j in range(graph.levels.shape[1]):
        column = graph.levels[:, j]
        values = column[(graph.parities[:, j] == parity) & np.isfinite(column)]
        sector[: values.size, j] = values
    return sector


def detect_avoided_crossings(graph: SpectralGraph, gap_window: int = 1) -> list[AvoidedCrossing]:
    """Interior local minima of gaps between neighbours of the same parity, refined by a parabola."""
    g = graph.g_grid
    if g.size < 3:
        return []
    sectors = [int(graph.parity_filter)] if graph.parity_filter is not None else [1, -1]
    found: list[AvoidedCrossing] = []
    for parity in sectors:
        levels = _sector_levels(graph, parity)
        for k in range(levels.shape[0] - 1):
            gap = levels[k + 1] - levels[k]
            for j in range(1, g.size - 1):
                lo, hi = max(0, j - gap_window), min(g.size, j + gap_window + 1)
                window = gap[lo:hi]
                if not np.all(np.isfinite(window)):
                    continue
                if not (gap[j] < gap[j - 1] and gap[j] <= gap[j + 1]):
                    continue
                if gap[j] > np.min(window):
                    continue
                g_min, gap_min = _parabola_vertex(g[j - 1 : j + 2], gap[j - 1 : j + 2])
                found.append(AvoidedCrossing(g=g_min, gap=max(0.0, gap_min), level_pair=(k, k + 1), parity=parity))
    found.sort(key=lambda item: (item.g, -item.parity, item.level_pair))
    return found


def _parabola_vertex(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    a, b, c = np.polyfit(x, y, 2)
    if a <= 0:
        return float(x[1]), float(y[1])
    x_v = -b / (2 * a)
    y_v = c - b * b / (4 * a)
    # a kinked minimum can push the vertex below zero; keep the sample then
    if not x[0] <= x_v <= x[2] or y_v <= 0:
        return float(x[1]), float(y[1])
    return float(x_v), float(y_v)


def classify_prebics(solution: EigenSolution, photon_threshold: float = 1.0) -> list[int]:
    return [int(i) for i in np.flatnonzero(solution.photon_content < photon_threshold)]


def gap_ratio_across(energies: np.ndarray, e_split: float, n_side: int = 50) -> float:
    """Median adjacent gap of the n_side levels above e_split over that of the n_side levels below."""
    ordered = np.sort(np.asarray(energies, dtype=float))
    below = ordered[ordered < e_split][-(n_side + 1) :]
    above = ordered[ordered >= e_split][: n_side + 1]
    if below.size < 2 or above.size < 2:
        raise DomainError("gap_ratio_across", "need at least two levels on each side of the split")
    return float(np.median(np.diff(above)) / np.median(np.diff(below)))


def mean_level_spacing(solution: EigenSolution, e_lo: float, e_hi: float, parity: Optional[Parity] = None) -> float:
    mask = (solution.energies >= e_lo) & (solution.energies <= e_hi)
    if parity is not None:
        mask &= solution.parities == int(parity)
    window = solution.energies[mask]
    if window.size < 2:
        return math.nan
    return float((window[-1] - window[0]) / (window.size - 1))


def track_prebic(
    solution: EigenSolution,
    energy: float,
    parity: Parity = Parity.POSITIVE,
    window: Optional[float] = None,
) -> Optional[int]:
    """Index of the preBIC level that continues into a bound state in the continuum at energy.

    Among levels of the given parity within window of energy, the one with the lowest photon content
    wins; distance breaks ties. None when no candidate exists.
    """
    mask = solution.parities == int(parity)
    if window is not None:
        mask &= np.abs(solution.energies - energy) <= window
    candidates = np.flatnonzero(mask)
    if candidates.size == 0:
        return None
    order = np.lexsort((np.abs(solution.energies[candidates] - energy), solution.photon_content[candidates]))
    return int(candidates[order[0]])
