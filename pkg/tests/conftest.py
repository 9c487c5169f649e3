from pathlib import Path
from typing import Callable

import pytest

from app.core.confluence import CriticalParams
from app.core.model import ModelParams


@pytest.fixture
def qrm_params() -> ModelParams:
    """Rabi limit gamma = 0."""
    return ModelParams(omega=1.0, gamma=0.0, delta=0.7, g=0.5)


@pytest.fixture
def stark_params() -> ModelParams:
    return ModelParams(omega=1.0, gamma=0.2, delta=0.7, g=0.5)


@pytest.fixture
def critical_params() -> CriticalParams:
    return CriticalParams(omega=1.0, delta=0.7, g=1.0)


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    """Writes an INI run config; sections are dicts of key -> value."""

    def _write(name: str = "run.ini", **sections: dict) -> Path:
        lines = []
        for section, values in sections.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {value}" for key, value in values.items())
            lines.append("")
        path = tmp_path / name
        path.write_text("\n".join(lines), encoding="utf-8")
        return path

    return _write
