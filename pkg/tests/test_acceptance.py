import numpy as np
import pytest

from app.core.confluence import CriticalParams, bic_energies, lbs_energies, thresholds
from app.core.exact_diag import (
    build_hamiltonian,
    converged_spectrum,
    diagonalize,
    gap_ratio_across,
    levels_in_window,
    track_prebic,
)
from app.core.model import ModelParams, Parity
from app.core.slow_mode import Band, double_well_onset, envelope_excess, harmonic_band_levels

pytestmark = pytest.mark.slow


def _prebic_discrepancy(g: float, n: int) -> tuple[float, float]:
    spectrum = bic_energies(CriticalParams(1.0, 0.7, g), n_max=n)
    energy = float(spectrum.energies[spectrum.quantum_numbers == n][0])
    parity = Parity.POSITIVE if n % 2 == 0 else Parity.NEGATIVE
    width = 0.1 * max(1.0, abs(energy))
    h = build_hamiltonian(ModelParams(omega=1.0, gamma=0.9, delta=0.7, g=g), 300)
    window = levels_in_window(h, energy - width, energy + width)
    index = track_prebic(window, energy, parity, width)
    assert index is not None
    return abs(window.energies[index] - energy) / abs(energy), float(window.photon_content[index])


@pytest.mark.parametrize("g", [0.2, 0.5, 0.9, 1.5])
def test_ground_bic_tracks_prebic(g: float) -> None:
    relative, _ = _prebic_discrepancy(g, 0)
    assert relative < 0.02


@pytest.mark.parametrize("g", [0.2, 0.3])
def test_ground_prebic_has_low_photon_content(g: float) -> None:
    _, photons = _prebic_discrepancy(g, 0)
    assert photons < 1.0


def test_prebic_discrepancy_grows_with_photon_number() -> None:
    discrepancies = [_prebic_discrepancy(0.3, n)[0] for n in (0, 2, 4)]
    assert discrepancies[0] < discrepancies[1] < discrepancies[2]


def test_threshold_approach_near_critical_coupling() -> None:
    params = ModelParams(omega=1.0, gamma=0.999, delta=0.05, g=0.5)
    critical = CriticalParams(1.0, 0.05, 0.5)
    ground = converged_spectrum(params, 1, 1e-6, n_start=400, n_cap=4000).energies[0]

    bound = lbs_energies(critical, n_max=0)
    assert bound.energies.size == 1
    assert ground == pytest.approx(bound.energies[0], rel=0.03)
    assert ground < thresholds(critical).e_thr

    window = levels_in_window(build_hamiltonian(params, 4000), -0.3, 0.2)
    assert 0.5 <= gap_ratio_across(window.energies, -0.05, 50) <= 2.0


def test_harmonic_levels_stay_inside_exact_envelope() -> None:
    base = ModelParams(omega=1.0, gamma=0.2, delta=4.0, g=0.0)
    onset = double_well_onset(base)
    for g in np.linspace(0.1, 0.5 * onset, 5):
        point = base.with_coupling(float(g))
        exact = diagonalize(build_hamiltonian(point, 200), 40).energies
        for band in (Band.A, Band.B):
            for energy in harmonic_band_levels(point, band, 2):
                assert envelope_excess(energy, exact) <= 0.1
