import json
import math

import pytest

from app.core.config import OutputFormat
from app.core.errors import OutputError
from app.services.output import sidecar_path, spectrum_frame, write_metadata, write_table


def _frame():
    return spectrum_frame(
        [
            {"g": 0.1, "level_index": 0, "energy": -0.7, "parity": 1, "photon_content": math.nan, "source": "gfunction"},
            {"g": 0.1, "level_index": 1, "energy": 1.0 / 3.0, "parity": -1, "photon_content": 0.25, "source": "exact_diag"},
        ]
    )


def test_csv_has_fixed_header_and_full_precision(tmp_path) -> None:
    path = tmp_path / "out.csv"
    write_table(_frame(), str(path), OutputFormat.csv)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "g,level_index,energy,parity,photon_content,source"
    assert lines[1] == "0.10000000000000001,0,-0.69999999999999996,1,nan,gfunction"
    assert lines[2].split(",")[2] == "0.33333333333333331"


def test_json_carries_schema_version(tmp_path) -> None:
    path = tmp_path / "out.json"
    write_table(_frame(), str(path), OutputFormat.json)
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["schema_version"] == "1"
    assert payload["columns"][-1] == "source"
    assert payload["rows"][0][4] is None


def test_metadata_sidecar(tmp_path) -> None:
    target = write_metadata(str(tmp_path / "out.csv"), {"wall_time_seconds": 0.5, "residual": float("inf")})
    assert target == sidecar_path(str(tmp_path / "out.csv"))
    body = json.loads(target.read_text(encoding="utf-8"))
    assert body["schema_version"] == "1"
    assert body["residual"] is None


def test_unwritable_target(tmp_path) -> None:
    blocker = tmp_path / "blocker"
    blocker.write_text("x", encoding="utf-8")
    with pytest.raises(OutputError):
        write_table(_frame(), str(blocker / "out.csv"), OutputFormat.csv)
