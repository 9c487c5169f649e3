import itertools

import numpy as np
import pytest

from app.core.errors import DomainError, NonConvergence, PoleProximity
from app.core.exact_diag import build_hamiltonian, diagonalize, levels_in_window
from app.core.gfunction import GSeriesSettings, find_roots, g_value, pole_set, scan_roots
from app.core.model import ModelParams, Parity, baseline_ladders, degenerate_energy, renormalize


def test_pole_spacing_is_arithmetic_for_random_parameters() -> None:
    rng = np.random.default_rng(7)
    for _ in range(20):
        omega = rng.uniform(0.5, 2.0)
        gamma = rng.uniform(0.0, 0.95) * omega
        params = ModelParams(omega=omega, gamma=gamma, delta=0.4, g=0.6)
        poles = pole_set(params, 12)
        expected = (omega**2 - gamma**2) / omega
        assert poles.spacing == pytest.approx(expected, rel=1e-12)
        assert np.allclose(np.diff(poles.energies), expected, rtol=1e-12, atol=0)


def test_g_value_rejects_pole(stark_params: ModelParams) -> None:
    pole = float(renormalize(stark_params).energy_at(2))
    with pytest.raises(PoleProximity) as exc_info:
        g_value(stark_params, Parity.POSITIVE, pole)
    assert exc_info.value.pole == 2


def test_g_value_needs_subcritical_parameters() -> None:
    with pytest.raises(DomainError):
        g_value(ModelParams(omega=1.0, gamma=1.2, delta=0.7, g=0.5), Parity.POSITIVE, 0.0)


def test_g_value_reports_sign_and_magnitude(qrm_params: ModelParams) -> None:
    value = g_value(qrm_params, Parity.NEGATIVE, 0.3)
    assert value.sign in (-1, 1)
    assert np.isfinite(value.log_magnitude)
    assert value.n_terms > 1


def test_settings_validation() -> None:
    with pytest.raises(DomainError):
        GSeriesSettings(n_terms_max=4)
    with pytest.raises(DomainError):
        GSeriesSettings(pole_guard=0.0)


def test_empty_window_has_no_roots(qrm_params: ModelParams) -> None:
    assert find_roots(qrm_params, Parity.POSITIVE, 1.0, 1.0).size == 0


@pytest.mark.parametrize("g", [0.2, 0.5, 0.8])
def test_roots_match_exact_diagonalization_in_rabi_limit(g: float) -> None:
    params = ModelParams(omega=1.0, gamma=0.0, delta=0.7, g=g)
    solution = diagonalize(build_hamiltonian(params, 200), 30)
    for parity in (Parity.POSITIVE, Parity.NEGATIVE):
        ed = solution.energies[solution.parities == int(parity)][:10]
        roots = find_roots(params, parity, ed[0] - 0.5, ed[-1] + 0.25)
        assert roots.size >= 10
        assert np.max(np.abs(roots[:10] - ed)) < 1e-7


@pytest.mark.parametrize(
    "gamma,delta,g",
    list(itertools.product([0.0, 0.2, 0.5], [0.3, 0.7], [0.2, 0.8])),
)
def test_every_root_is_an_eigenvalue_of_the_same_parity(gamma: float, delta: float, g: float) -> None:
    params = ModelParams(omega=1.0, gamma=gamma, delta=delta, g=g)
    window = levels_in_window(build_hamiltonian(params, 200), -2.5, 6.5)
    for parity in (Parity.POSITIVE, Parity.NEGATIVE):
        ed = window.energies[window.parities == int(parity)]
        roots = find_roots(params, parity, -2.0, 6.0)
        assert roots.size > 0
        for root in roots:
            assert np.min(np.abs(ed - root)) < 1e-7


def test_g_value_is_reliable_in_rabi_limit(qrm_params: ModelParams) -> None:
    value = g_value(qrm_params, Parity.POSITIVE, 0.3)
    assert value.reliable
    assert 0.0 < value.cancellation <= 1.0


def test_both_parities_agree_at_degenerate_energy(stark_params: ModelParams) -> None:
    energy = degenerate_energy(stark_params)
    plus = g_value(stark_params, Parity.POSITIVE, energy)
    minus = g_value(stark_params, Parity.NEGATIVE, energy)
    assert plus.sign == minus.sign
    assert plus.log_magnitude == pytest.approx(minus.log_magnitude, rel=1e-12)


@pytest.mark.parametrize("g", [0.0, 1e-8])
def test_roots_reduce_to_baseline_ladders(stark_params: ModelParams, g: float) -> None:
    params = stark_params.with_coupling(g)
    upper, lower = baseline_ladders(params, 10)
    ladders = np.sort(np.concatenate([upper, lower]))
    ladders = ladders[(ladders > -1.0) & (ladders < 3.35)]
    assert ladders.size == 9
    roots = np.sort(
        np.concatenate([find_roots(params, parity, -1.0, 3.35) for parity in (Parity.POSITIVE, Parity.NEGATIVE)])
    )
    assert roots.size == ladders.size
    assert np.max(np.abs(roots - ladders)) < 1e-7


def test_near_critical_cancellation_is_reported() -> None:
    params = ModelParams(omega=1.0, gamma=0.99, delta=0.7, g=0.5)
    with pytest.raises(NonConvergence, match="unreliable"):
        find_roots(params, Parity.POSITIVE, -1.0, 1.0)
    scan = scan_roots(params, Parity.POSITIVE, -1.0, 1.0)
    assert scan.unreliable.size > 0
    # exact diagonalization has fewer than 100 positive-parity levels here
    assert scan.roots.size < 100
