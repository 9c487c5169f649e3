import pytest

from app.core.config import (
    OutputFormat,
    ParityFilter,
    RunMode,
    load_run_config,
    parse_run_config,
)
from app.core.errors import ConfigError


def test_minimal_config_takes_defaults() -> None:
    config = parse_run_config("[run]\nmode = sweep\n")
    assert config.mode is RunMode.sweep
    assert config.solver.n_trunc == 200
    assert config.solver.parity is ParityFilter.both
    assert config.output.format is OutputFormat.csv
    assert config.g_values() == pytest.approx([0.1 * i for i in range(11)])


def test_sections_are_coerced() -> None:
    config = parse_run_config(
        "[model]\ngamma = 0.2\n[solver]\nparity = positive\nadaptive = true\nk_levels = 5\n"
        "[grid]\nstart = 0.5\nstop = 0.5\ncount = 1\n",
        "sweep",
    )
    assert config.model.gamma == 0.2
    assert config.solver.parity is ParityFilter.positive
    assert config.solver.adaptive is True
    assert config.g_values() == [0.5]


@pytest.mark.parametrize(
    "text,mode",
    [
        ("[model]\nomega = 1\n", None),
        ("[run]\nmode = sweep\n", "gfunction"),
        ("[run]\nmode = sweep\ncolour = blue\n", None),
        ("[model]\nomega = 1\nspin = 2\n", "sweep"),
        ("[bogus]\nx = 1\n", "sweep"),
        ("[model]\nomega = -1\n", "sweep"),
        ("[grid]\nstart = 1\nstop = 0\n", "sweep"),
        ("[solver]\nk_levels = 50\nn_trunc = 20\n", "sweep"),
        ("[slowmode]\nn_points = 400\n", "slowmode"),
        ("[model]\ngamma = 1.0\n", "gfunction"),
        ("[grid]\nstart = 0\nstop = 1\n", "confluence"),
        ("not an ini file", "sweep"),
    ],
)
def test_invalid_configs_raise_config_error(text: str, mode) -> None:
    with pytest.raises(ConfigError):
        parse_run_config(text, mode)


def test_critical_point_is_allowed_outside_gfunction_modes() -> None:
    config = parse_run_config("[model]\ngamma = 1.0\n[grid]\nstart = 0.2\n", "confluence")
    assert config.model.gamma == 1.0


def test_overrides_replace_output_and_threads() -> None:
    config = parse_run_config("[run]\nmode = sweep\nthreads = 2\n")
    assert config.threads == 2
    updated = config.with_overrides(output_path="elsewhere.csv", threads=4)
    assert updated.output.path == "elsewhere.csv"
    assert updated.threads == 4
    assert config.output.path == "stark_spectra_out.csv"


def test_missing_file(tmp_path) -> None:
    with pytest.raises(ConfigError, match="cannot read"):
        load_run_config(str(tmp_path / "absent.ini"), "sweep")
