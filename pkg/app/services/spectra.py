import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np
import pandas as pd

from app.core.confluence import CriticalParams, bic_energies, lbs_energies, thresholds
from app.core.config import (
    DENSE_DIMENSION_LIMIT,
    OutputFormat,
    ParityFilter,
    RunConfig,
    RunMode,
)
from app.core.errors import (
    EXIT_NUMERICAL,
    EXIT_OK,
    BoundaryTooTight,
    DomainError,
    NonConvergence,
    PoleProximity,
)
from app.core.exact_diag import (
    EigenSolution,
    SweepSettings,
    build_hamiltonian,
    classify_prebics,
    converged_spectrum,
    diagonalize,
    levels_in_window,
    sweep,
    track_prebic,
)
from app.core.gfunction import GSeriesSettings, find_roots, scan_roots
from app.core.model import ModelParams, Parity
from app.core.slow_mode import (
    Band,
    band_asymptote,
    double_well_onset,
    envelope_excess,
    harmonic_band_levels,
    lower_band_quartic_coefficient,
    solve_band_schrodinger,
)
from app.services.output import report_frame, report_path, spectrum_frame, write_csv, write_metadata, write_table

logger = logging.getLogger("stark_spectra.runner")

PARITY_FILTERS = {
    ParityFilter.both: None,
    ParityFilter.positive: Parity.POSITIVE,
    ParityFilter.negative: Parity.NEGATIVE,
}


@dataclass
class RunResult:
    table: pd.DataFrame
    metadata: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    report: Optional[pd.DataFrame] = None
    numerical_failure: bool = False

    @property
    def status(self) -> int:
        return EXIT_NUMERICAL if self.numerical_failure else EXIT_OK


def base_params(config: RunConfig) -> ModelParams:
    m = config.model
    return ModelParams(omega=m.omega, gamma=m.gamma, delta=m.delta, g=m.g)


def sweep_settings(config: RunConfig) -> SweepSettings:
    s = config.solver
    return SweepSettings(n_trunc=s.n_trunc, adaptive=s.adaptive, n_cap=s.n_cap, rel_tol=s.rel_tol, threads=config.threads)


def g_series_settings(config: RunConfig) -> GSeriesSettings:
    gf = config.gfunction
    return GSeriesSettings(n_terms_max=gf.n_terms_max, tail_tolerance=gf.tail_tolerance, pole_guard=gf.pole_guard)


def _row(g: float, index: int, energy: float, parity: int, photon: float, source: str) -> dict[str, Any]:
    return {
        "g": float(g),
        "level_index": int(index),
        "energy": float(energy),
        "parity": int(parity),
        "photon_content": float(photon),
        "source": source,
    }


def _solve_both_parities(params: ModelParams, config: RunConfig, k_levels: int) -> EigenSolution:
    s = config.solver
    k_levels = min(k_levels, 2 * s.n_trunc)
    if s.adaptive:
        return converged_spectrum(params, k_levels, s.rel_tol, max(s.n_trunc, k_levels), s.n_cap)
    return diagonalize(build_hamiltonian(params, s.n_trunc), k_levels)


def run_sweep(config: RunConfig) -> RunResult:
    params = base_params(config)
    parity_filter = PARITY_FILTERS[config.solver.parity]
    graph = sweep(params, config.g_values(), config.solver.k_levels, parity_filter, sweep_settings(config))

    rows = []
    failed = []
    for j, g in enumerate(graph.g_grid):
        if not np.isfinite(graph.levels[0, j]):
            failed.append(float(g))
            continue
        for k in range(graph.levels.shape[0]):
            if np.isfinite(graph.levels[k, j]):
                rows.append(_row(g, k, graph.levels[k, j], graph.parities[k, j], graph.photon[k, j], "exact_diag"))

    result = RunResult(table=spectrum_frame(rows), numerical_failure=bool(failed))
    result.notes.extend(f"no spectrum at g={g!r}" for g in failed)
    result.metadata.update(
        {
            "n_trunc_used": graph.n_trunc.tolist(),
            "max_residuals": graph.residuals.tolist(),
            "converged_columns": graph.converged.tolist(),
            "avoided_crossings": [
                {"g": c.g, "gap": c.gap, "parity": c.parity, "level_pair": list(c.level_pair)}
                for c in graph.avoided_crossings
            ],
        }
    )
    return result


def run_gfunction(config: RunConfig) -> RunResult:
    params = base_params(config)
    settings = g_series_settings(config)
    rows = []
    result = RunResult(table=spectrum_frame([]))
    for g in config.g_values():
        point = params.with_coupling(g)
        for parity in (Parity.POSITIVE, Parity.NEGATIVE):
            scan = scan_roots(
                point,
                parity,
                config.gfunction.e_lo,
                config.gfunction.e_hi,
                settings,
                config.gfunction.scan_points,
            )
            # roots from trustworthy brackets are kept, the untrusted span is reported
            if scan.unreliable.size:
                result.numerical_failure = True
                result.notes.append(
                    f"gfunction parity={int(parity)} g={g!r}: sign of G unreliable at {scan.unreliable.size} points "
                    f"in [{scan.unreliable.min()!r}, {scan.unreliable.max()!r}]"
                )
            rows.extend(_row(g, i, e, int(parity), math.nan, "gfunction") for i, e in enumerate(scan.roots))
    result.table = spectrum_frame(rows)
    result.metadata["pole_spacing"] = params.pole_spacing
    return result


def run_confluence(config: RunConfig) -> RunResult:
    params = base_params(config)
    rows = []
    result = RunResult(table=spectrum_frame([]))
    threshold_rows = []
    for g in config.g_values():
        cp = CriticalParams.from_params(params.with_coupling(g))
        for source, solve in (("bic", bic_energies), ("lbs", lbs_energies)):
            spectrum = solve(cp, config.confluence.n_max, config.confluence.solver_tol)
            for energy, n, parity in zip(spectrum.energies, spectrum.quantum_numbers, spectrum.parities):
                rows.append(_row(g, n, energy, parity, math.nan, source))
            for failure in spectrum.failures:
                result.numerical_failure = True
                result.notes.append(f"{source} g={g!r} {failure}")
        t = thresholds(cp)
        threshold_rows.append(
            {"g": g, "e_thr": t.e_thr, "e_c": t.e_c, "small_continuum_upper": t.small_continuum_upper}
        )
    result.table = spectrum_frame(rows)
    result.metadata["thresholds"] = threshold_rows
    return result


def run_slowmode(config: RunConfig) -> RunResult:
    params = base_params(config)
    sm = config.slowmode
    rows = []
    result = RunResult(table=spectrum_frame([]))
    for g in config.g_values():
        point = params.with_coupling(g)
        for band in (Band.A, Band.B):
            # band levels carry no definite parity, written as 0
            try:
                harmonic = harmonic_band_levels(point, band, sm.n_max)
                rows.extend(_row(g, n, e, 0, math.nan, f"harmonic_{band.value}") for n, e in enumerate(harmonic))
            except DomainError as exc:
                result.notes.append(f"harmonic band {band.value} g={g!r}: {exc}")
            if not sm.finite_difference:
                continue
            try:
                numeric = solve_band_schrodinger(point, band, sm.q_half_width, sm.n_points, sm.n_max + 1)
                rows.extend(_row(g, n, e, 0, math.nan, f"fd_{band.value}") for n, e in enumerate(numeric))
            except DomainError as exc:
                result.notes.append(f"finite-difference band {band.value} g={g!r}: {exc}")
            except BoundaryTooTight as exc:
                result.numerical_failure = True
                result.notes.append(f"finite-difference band {band.value} g={g!r}: {exc}")
    result.table = spectrum_frame(rows)

    info: dict[str, Any] = {"mass_convention": "m=1"}
    try:
        info["double_well_onset"] = double_well_onset(params)
        info["lower_band_quartic_coefficient"] = lower_band_quartic_coefficient(params)
    except DomainError as exc:
        result.notes.append(str(exc))
    if params.gamma == params.omega:
        info["band_asymptote"] = [band_asymptote(CriticalParams(params.omega, params.delta, g)) for g in config.g_values()]
    result.metadata["slowmode"] = info
    return result


def _report_row(source: str, g: float, level: int, reference: float, candidate: float, tolerance: float, discrepancy: Optional[float] = None) -> dict[str, Any]:
    if discrepancy is None:
        discrepancy = abs(candidate - reference)
    return {
        "source": source,
        "g": float(g),
        "level": int(level),
        "reference": float(reference),
        "candidate": float(candidate),
        "discrepancy": float(discrepancy),
        "tolerance": float(tolerance),
        "flagged": bool(not discrepancy <= tolerance),
    }


def _check_gfunction(point: ModelParams, solution: EigenSolution, config: RunConfig, g: float) -> tuple[list, list]:
    cc = config.crosscheck
    report, rows = [], []
    for parity in (Parity.POSITIVE, Parity.NEGATIVE):
        ed = solution.energies[solution.parities == int(parity)][: cc.levels]
        if ed.size == 0:
            continue
        margin = 0.5 * point.pole_spacing
        roots = find_roots(
            point,
            parity,
            float(ed[0]) - 1.0,
            float(ed[-1]) + margin,
            g_series_settings(config),
            config.gfunction.scan_points,
        )
        rows.extend(_row(g, i, e, int(parity), math.nan, "gfunction") for i, e in enumerate(roots))
        for i, e in enumerate(ed):
            candidate = float(roots[np.argmin(np.abs(roots - e))]) if roots.size else math.nan
            report.append(_report_row("gfunction_vs_exact_diag", g, i, e, candidate, cc.gfunction_tol))
    return report, rows


def _check_bic(point: ModelParams, config: RunConfig, g: float) -> tuple[list, list]:
    cc = config.crosscheck
    report, rows = [], []
    spectrum = bic_energies(CriticalParams.from_params(point), config.confluence.n_max, config.confluence.solver_tol)
    if spectrum.failures:
        raise NonConvergence("; ".join(str(f) for f in spectrum.failures))
    h = build_hamiltonian(point, config.solver.n_trunc)
    for energy, n, parity in zip(spectrum.energies, spectrum.quantum_numbers, spectrum.parities):
        rows.append(_row(g, n, energy, parity, math.nan, "bic"))
        width = max(0.25, 4.0 * cc.bic_rel_tol * max(1.0, abs(energy)))
        window = levels_in_window(h, energy - width, energy + width)
        index = track_prebic(window, energy, Parity(int(parity)))
        if index is None:
            report.append(_report_row("bic_vs_prebic", g, n, energy, math.nan, cc.bic_rel_tol, math.inf))
            continue
        level = float(window.energies[index])
        relative = abs(level - energy) / max(abs(energy), 1e-12)
        rows.append(_row(g, n, level, parity, window.photon_content[index], "prebic"))
        report.append(_report_row("bic_vs_prebic", g, n, energy, level, cc.bic_rel_tol, relative))
    return report, rows


def _check_bands(point: ModelParams, solution: EigenSolution, config: RunConfig, g: float) -> tuple[list, list]:
    cc = config.crosscheck
    report, rows = [], []
    for band in (Band.A, Band.B):
        try:
            levels = harmonic_band_levels(point, band, config.slowmode.n_max)
        except DomainError as exc:
            logger.info("band_check_skipped band=%s g=%s reason=%s", band.value, g, str(exc))
            continue
        for n, energy in enumerate(levels):
            rows.append(_row(g, n, energy, 0, math.nan, f"harmonic_{band.value}"))
            nearest = float(solution.energies[np.argmin(np.abs(solution.energies - energy))])
            report.append(_report_row(f"harmonic_{band.value}_vs_exact_diag", g, n, nearest, energy, cc.band_tol))
            report.append(
                _report_row(
                    f"harmonic_{band.value}_envelope",
                    g,
                    n,
                    nearest,
                    energy,
                    cc.band_tol,
                    envelope_excess(energy, solution.energies),
                )
            )
    return report, rows


def run_crosscheck(config: RunConfig) -> RunResult:
    """Compares the three spectrum sources at every coupling of the grid.

    Each source fails independently; its failure is noted and the others still report.
    """
    params = base_params(config)
    cc = config.crosscheck
    report: list[dict[str, Any]] = []
    rows: list[dict[str, Any]] = []
    result = RunResult(table=spectrum_frame([]))
    k_levels = max(config.solver.k_levels, 2 * cc.levels + 4)

    for g in config.g_values():
        point = params.with_coupling(g)
        try:
            solution = _solve_both_parities(point, config, k_levels)
        except NonConvergence as exc:
            result.numerical_failure = True
            result.notes.append(f"exact_diag g={g!r}: {exc}")
            continue
        rows.extend(
            _row(g, i, e, p, c, "exact_diag")
            for i, (e, p, c) in enumerate(zip(solution.energies, solution.parities, solution.photon_content))
        )
        result.metadata.setdefault("prebic_candidates", []).append(
            {"g": g, "indices": classify_prebics(solution, config.solver.photon_threshold)}
        )

        checks: list[tuple[str, Callable[[], tuple[list, list]]]] = [
            ("gfunction", lambda: _check_gfunction(point, solution, config, g)),
            ("bands", lambda: _check_bands(point, solution, config, g)),
        ]
        if g > 0:
            checks.append(("bic", lambda: _check_bic(point, config, g)))
        for name, check in checks:
            try:
                partial_report, partial_rows = check()
            except (NonConvergence, PoleProximity, DomainError) as exc:
                result.numerical_failure = True
                result.notes.append(f"{name} g={g!r}: {exc}")
                logger.warning("crosscheck_source_failed source=%s g=%s detail=%s", name, g, str(exc))
                continue
            report.extend(partial_report)
            rows.extend(partial_rows)

    result.table = spectrum_frame(rows)
    result.report = report_frame(report)
    summary = {}
    if not result.report.empty:
        for source, group in result.report.groupby("source", sort=True):
            finite = group["discrepancy"].replace([np.inf], np.nan)
            summary[source] = {
                "max_discrepancy": float(finite.max()) if finite.notna().any() else math.inf,
                "flagged": int(group["flagged"].sum()),
                "entries": int(len(group)),
            }
    result.metadata["crosscheck"] = summary
    return result


MODE_RUNNERS: dict[RunMode, Callable[[RunConfig], RunResult]] = {
    RunMode.sweep: run_sweep,
    RunMode.gfunction: run_gfunction,
    RunMode.confluence: run_confluence,
    RunMode.slowmode: run_slowmode,
    RunMode.crosscheck: run_crosscheck,
}


def execute(config: RunConfig) -> RunResult:
    return MODE_RUNNERS[config.mode](config)


def run(config: RunConfig) -> int:
    started = time.perf_counter()
    result = execute(config)
    elapsed = time.perf_counter() - started

    write_table(result.table, config.output.path, config.output.format)
    if result.report is not None:
        write_csv(result.report, str(report_path(config.output.path)))

    metadata = {
        "config": config.model_dump(mode="json"),
        "dense_dimension_limit": DENSE_DIMENSION_LIMIT,
        "rows": len(result.table),
        "notes": result.notes,
        "status": result.status,
        "wall_time_seconds": elapsed,
        **result.metadata,
    }
    write_metadata(config.output.path, metadata)
    for note in result.notes:
        logger.warning("run_note mode=%s note=%s", config.mode.value, note)
    logger.info(
        "run_done mode=%s rows=%s status=%s seconds=%.3f format=%s",
        config.mode.value,
        len(result.table),
        result.status,
        elapsed,
        OutputFormat(config.output.format).value,
    )
    return result.status
