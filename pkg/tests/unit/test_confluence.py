import numpy as np
import pytest

from app.core.confluence import (
    CriticalParams,
    EnergyClass,
    alpha,
    bic_energies,
    classify_energy,
    lambda_value,
    lbs_energies,
    thresholds,
)
from app.core.errors import DomainError
from app.core.model import ModelParams


def _equation_residual(cp: CriticalParams, energy: float, n: int, sign: int) -> float:
    a = float(alpha(cp, energy))
    return np.sqrt(a * a - 1.0) * (n + 0.5) - sign * float(lambda_value(cp, energy))


def test_alpha_boundaries(critical_params: CriticalParams) -> None:
    cp = critical_params
    t = thresholds(cp)
    assert alpha(cp, -cp.delta) == pytest.approx(1.0, abs=1e-12)
    assert alpha(cp, t.e_thr) == pytest.approx(-1.0, abs=1e-12)
    assert alpha(cp, t.e_c) == pytest.approx(0.0, abs=1e-12)


def test_lambda_values(critical_params: CriticalParams) -> None:
    assert lambda_value(critical_params, -critical_params.delta) == pytest.approx(0.0, abs=1e-15)
    assert lambda_value(CriticalParams(omega=1.0, delta=0.0, g=1.0), 1.0) == pytest.approx(1.0)
    cp = critical_params
    e = thresholds(cp).e_thr
    independent = (e * e - cp.delta**2) / (2 * cp.g**2) + cp.omega * (e + cp.delta) / (2 * cp.g**2)
    assert lambda_value(cp, e) == pytest.approx(independent, rel=1e-12)


def test_zero_coupling_is_rejected() -> None:
    cp = CriticalParams(omega=1.0, delta=0.7, g=0.0)
    with pytest.raises(DomainError):
        alpha(cp, 0.0)
    with pytest.raises(DomainError):
        lambda_value(cp, 0.0)
    with pytest.raises(DomainError):
        bic_energies(cp, 3)


def test_classify_energy(critical_params: CriticalParams) -> None:
    cp = critical_params
    assert classify_energy(cp, 0.0) is EnergyClass.DISCRETE_UPPER
    assert classify_energy(cp, -1.5) is EnergyClass.SMALL_CONTINUUM
    assert classify_energy(cp, -0.7) is EnergyClass.BOUNDARY_ALPHA_PLUS_ONE
    assert classify_energy(cp, -2.7) is EnergyClass.BOUNDARY_ALPHA_MINUS_ONE
    assert classify_energy(cp, -2.9) is EnergyClass.BELOW_THRESHOLD
    weak = CriticalParams(omega=1.0, delta=0.05, g=0.3)
    assert classify_energy(weak, -0.5) is EnergyClass.DISCRETE_LOWER_WINDOW
    assert classify_energy(weak, -0.97) is EnergyClass.BELOW_THRESHOLD


def test_thresholds(critical_params: CriticalParams) -> None:
    t = thresholds(critical_params)
    assert (t.e_thr, t.e_c, t.small_continuum_upper) == pytest.approx((-2.7, -1.7, -0.7))
    assert t.pole_margin == pytest.approx(1.0)
    collapsed = thresholds(CriticalParams(omega=1.0, delta=0.7, g=0.0))
    assert collapsed.e_thr == collapsed.e_c == collapsed.small_continuum_upper == -0.7


@pytest.mark.parametrize("g", [0.05, 0.3, 0.5, 1.0, 1.5])
def test_bic_levels_solve_their_equation(g: float) -> None:
    cp = CriticalParams(omega=1.0, delta=0.7, g=g)
    spectrum = bic_energies(cp, 6)
    assert spectrum.failures == ()
    assert spectrum.energies.size >= 7
    assert np.all(np.diff(spectrum.energies) > 0)
    assert np.all(spectrum.energies > max(-cp.delta, cp.delta - cp.omega))
    assert np.all(alpha(cp, spectrum.energies) > 1.0)
    for energy, n in zip(spectrum.energies, spectrum.quantum_numbers):
        assert abs(_equation_residual(cp, energy, n, 1)) < 1e-7


def test_bic_levels_start_on_upper_ladder_at_weak_coupling() -> None:
    spectrum = bic_energies(CriticalParams(omega=1.0, delta=0.7, g=0.01), 2)
    assert spectrum.energies == pytest.approx([0.7, 2.7, 4.7], abs=1e-2)
    assert spectrum.parities.tolist() == [1, -1, 1]


def test_bic_with_small_detuning_skips_trivial_root() -> None:
    cp = CriticalParams(omega=1.0, delta=0.05, g=0.5)
    spectrum = bic_energies(cp, 3)
    assert spectrum.quantum_numbers.tolist() == [0, 1, 2, 3]
    assert np.all(spectrum.energies > -0.05 + 1e-6)


@pytest.mark.parametrize("g", [0.1, 0.5, 1.0, 2.0])
def test_no_lower_bound_states_for_large_detuning(g: float) -> None:
    assert lbs_energies(CriticalParams(omega=1.0, delta=0.7, g=g), 6).energies.size == 0


def test_lower_bound_states_inside_window() -> None:
    cp = CriticalParams(omega=1.0, delta=0.05, g=0.3)
    assert cp.lower_bound_states_allowed
    spectrum = lbs_energies(cp, 4)
    t = thresholds(cp)
    assert spectrum.energies.size > 0
    assert np.all((spectrum.energies > cp.delta - cp.omega) & (spectrum.energies < t.e_thr))
    assert np.all(alpha(cp, spectrum.energies) < -1.0)
    for energy, n in zip(spectrum.energies, spectrum.quantum_numbers):
        assert abs(_equation_residual(cp, energy, n, -1)) < 1e-7


def test_lower_bound_state_window_edge() -> None:
    assert CriticalParams(omega=1.0, delta=0.05, g=0.67).lower_bound_states_allowed
    assert not CriticalParams(omega=1.0, delta=0.05, g=0.68).lower_bound_states_allowed


def test_ground_lower_bound_state_value() -> None:
    spectrum = lbs_energies(CriticalParams(omega=1.0, delta=0.05, g=0.5), 0)
    assert spectrum.energies[0] == pytest.approx(-0.614, abs=5e-3)


def test_from_params_pins_gamma() -> None:
    cp = CriticalParams.from_params(ModelParams(omega=2.0, gamma=1.9, delta=0.3, g=0.4))
    assert (cp.omega, cp.delta, cp.g) == (2.0, 0.3, 0.4)
