import configparser
import os
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.errors import ConfigError

# Process-wide defaults; a run config overrides them per run.
STARK_SPECTRA_THREADS = int(os.getenv("STARK_SPECTRA_THREADS", "1"))
DENSE_DIMENSION_LIMIT = int(os.getenv("STARK_SPECTRA_DENSE_LIMIT", "2000"))
LOG_LEVEL = os.getenv("STARK_SPECTRA_LOG_LEVEL", "WARNING")
G_N_TERMS_MAX = int(os.getenv("STARK_SPECTRA_N_TERMS_MAX", "400"))
G_TAIL_TOLERANCE = float(os.getenv("STARK_SPECTRA_TAIL_TOLERANCE", "1e-16"))
G_POLE_GUARD = float(os.getenv("STARK_SPECTRA_POLE_GUARD", "1e-6"))
G_SCAN_POINTS_PER_INTERVAL = int(os.getenv("STARK_SPECTRA_SCAN_POINTS", "64"))
CONFLUENCE_SCAN_POINTS = int(os.getenv("STARK_SPECTRA_CONFLUENCE_SCAN_POINTS", "512"))
IDENTITY_REL_TOL = 1e-10

SCHEMA_VERSION = "1"


class RunMode(str, Enum):
    sweep = "sweep"
    gfunction = "gfunction"
    confluence = "confluence"
    slowmode = "slowmode"
    crosscheck = "crosscheck"


class OutputFormat(str, Enum):
    csv = "csv"
    json = "json"


class ParityFilter(str, Enum):
    both = "both"
    positive = "positive"
    negative = "negative"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelSection(_Section):
    omega: float = Field(default=1.0, gt=0)
    gamma: float = Field(default=0.0, ge=0)
    delta: float = Field(default=0.7, ge=0)
    g: float = Field(default=0.0, ge=0)


class GridSection(_Section):
    start: float = Field(default=0.0, ge=0)
    stop: float = Field(default=1.0, ge=0)
    count: int = Field(default=11, ge=1)

    @model_validator(mode="after")
    def check_order(self) -> "GridSection":
        if self.stop < self.start:
            raise ValueError("grid stop must be >= start")
        if self.count == 1 and self.stop != self.start:
            raise ValueError("a single-point grid needs start == stop")
        return self


class SolverSection(_Section):
    k_levels: int = Field(default=20, ge=1)
    n_trunc: int = Field(default=200, ge=2)
    adaptive: bool = False
    n_cap: int = Field(default=2000, ge=2)
    rel_tol: float = Field(default=1e-8, gt=0)
    parity: ParityFilter = ParityFilter.both
    photon_threshold: float = Field(default=1.0, gt=0)
    gap_window: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def check_sizes(self) -> "SolverSection":
        if self.n_trunc < self.k_levels:
            raise ValueError("n_trunc must be >= k_levels")
        if self.n_cap < self.n_trunc:
            raise ValueError("n_cap must be >= n_trunc")
        return self


class GFunctionSection(_Section):
    e_lo: float = -2.0
    e_hi: float = 6.0
    n_terms_max: int = Field(default=G_N_TERMS_MAX, ge=8)
    tail_tolerance: float = Field(default=G_TAIL_TOLERANCE, gt=0)
    pole_guard: float = Field(default=G_POLE_GUARD, gt=0)
    scan_points: int = Field(default=G_SCAN_POINTS_PER_INTERVAL, ge=2)

    @model_validator(mode="after")
    def check_window(self) -> "GFunctionSection":
        if self.e_hi < self.e_lo:
            raise ValueError("gfunction e_hi must be >= e_lo")
        return self


class ConfluenceSection(_Section):
    n_max: int = Field(default=6, ge=0)
    solver_tol: float = Field(default=1e-10, gt=0)


class SlowModeSection(_Section):
    n_max: int = Field(default=7, ge=0)
    finite_difference: bool = False
    q_half_width: float = Field(default=12.0, gt=0)
    n_points: int = Field(default=1201, ge=101)

    @model_validator(mode="after")
    def check_points(self) -> "SlowModeSection":
        if self.n_points % 2 == 0:
            raise ValueError("slowmode n_points must be odd")
        return self


class CrosscheckSection(_Section):
    levels: int = Field(default=10, ge=1)
    gfunction_tol: float = Field(default=1e-7, gt=0)
    bic_rel_tol: float = Field(default=0.02, gt=0)
    band_tol: float = Field(default=0.1, gt=0)


class OutputSection(_Section):
    path: str = "stark_spectra_out.csv"
    format: OutputFormat = OutputFormat.csv


class RunConfig(_Section):
    mode: RunMode
    model: ModelSection = ModelSection()
    grid: GridSection = GridSection()
    solver: SolverSection = SolverSection()
    gfunction: GFunctionSection = GFunctionSection()
    confluence: ConfluenceSection = ConfluenceSection()
    slowmode: SlowModeSection = SlowModeSection()
    crosscheck: CrosscheckSection = CrosscheckSection()
    output: OutputSection = OutputSection()
    threads: int = Field(default=STARK_SPECTRA_THREADS, ge=1)

    @model_validator(mode="after")
    def check_mode_requirements(self) -> "RunConfig":
        subcritical = self.model.gamma < self.model.omega
        if self.mode in (RunMode.gfunction, RunMode.crosscheck) and not subcritical:
            raise ValueError(f"mode {self.mode.value} requires gamma < omega")
        if self.mode == RunMode.confluence and self.grid.start <= 0:
            raise ValueError("confluence mode needs a coupling grid with g > 0")
        return self

    def g_values(self) -> list[float]:
        if self.grid.count == 1:
            return [self.grid.start]
        step = (self.grid.stop - self.grid.start) / (self.grid.count - 1)
        return [self.grid.start + i * step for i in range(self.grid.count)]

    def with_overrides(self, *, output_path: Optional[str] = None, threads: Optional[int] = None) -> "RunConfig":
        update: dict[str, Any] = {}
        if output_path:
            update["output"] = self.output.model_copy(update={"path": output_path})
        if threads:
            update["threads"] = threads
        return self.model_copy(update=update)


def parse_run_config(text: str, mode: Optional[str] = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc

    payload: dict[str, Any] = {}
    for section in parser.sections():
        payload[section] = {key: value.strip() for key, value in parser.items(section)}
    run_section = payload.pop("run", {})
    if "threads" in run_section:
        payload["threads"] = run_section.pop("threads")
    config_mode = run_section.pop("mode", None)
    if run_section:
        raise ConfigError(f"unknown keys in [run]: {sorted(run_section)}")
    if mode and config_mode and mode != config_mode:
        raise ConfigError(f"mode mismatch: command line says {mode!r}, config says {config_mode!r}")
    payload["mode"] = mode or config_mode
    if not payload["mode"]:
        raise ConfigError("no mode given on the command line or in [run]")
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_run_config(path: str, mode: Optional[str] = None) -> RunConfig:
    config_path = Path(path).expanduser()
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    return parse_run_config(text, mode)
