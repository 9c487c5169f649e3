import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable

import pandas as pd

from app.core.config import SCHEMA_VERSION, OutputFormat
from app.core.errors import OutputError

logger = logging.getLogger("stark_spectra.output")

SPECTRUM_COLUMNS = ["g", "level_index", "energy", "parity", "photon_content", "source"]
REPORT_COLUMNS = [
    "source",
    "g",
    "level",
    "reference",
    "candidate",
    "discrepancy",
    "tolerance",
    "flagged",
]
FLOAT_FORMAT = "%.17g"


def spectrum_frame(rows: Iterable[dict[str, Any]]) -> pd.DataFrame:
    frame = pd.DataFrame(list(rows), columns=SPECTRUM_COLUMNS)
    return frame.astype(
        {
            "g": float,
            "level_index": int,
            "energy": float,
            "parity": int,
            "photon_content": float,
            "source": str,
        }
    )


def report_frame(rows: Iterable[dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=REPORT_COLUMNS)


def sidecar_path(path: str) -> Path:
    target = Path(path)
    return target.with_name(target.name + ".meta.json")


def report_path(path: str) -> Path:
    target = Path(path)
    return target.with_name(target.name + ".report.csv")


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_csv(frame: pd.DataFrame, path: str) -> None:
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    _write_text(Path(path), text)


def write_json(frame: pd.DataFrame, path: str) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "columns": list(frame.columns),
        "rows": _jsonable(frame.to_numpy(dtype=object).tolist()),
    }
    _write_text(Path(path), json.dumps(payload, indent=2) + "\n")


def write_table(frame: pd.DataFrame, path: str, fmt: OutputFormat) -> None:
    if OutputFormat(fmt) == OutputFormat.json:
        write_json(frame, path)
    else:
        write_csv(frame, path)
    logger.info("table_written path=%s rows=%s format=%s", path, len(frame), OutputFormat(fmt).value)


def write_metadata(path: str, metadata: dict[str, Any]) -> Path:
    target = sidecar_path(path)
    body = {"schema_version": SCHEMA_VERSION, **metadata}
    _write_text(target, json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
    return target
