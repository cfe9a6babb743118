from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import DomainError, FitDegenerate, OrderTooLow
from artifact.evolution import FieldState, band_profile, evolve_to
from artifact.potentials import MomentCache, PotentialSpec
from artifact.spectral import (AsymptoticPhase, JostTable, WaveBasis, asymptotic_phase,
                               build_spectral_basis, c_coefficients, default_window, extract_A,
                               extract_jost_table, generalized_forward, generalized_inverse,
                               ode_midpoint_residual, physical_a_energy, propagate_coefficients,
                               propagate_spectral, solve_wavefunction, square_identity_coefficients,
                               table_k_grid)
from artifact.transforms import GridFunction, GridSpec, sine_forward

SHIFTED = PotentialSpec.shifted_inverse_power(0.6)


def simpson(y: np.ndarray, x: np.ndarray) -> float:
    h = x[1] - x[0]
    return float(h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


def energy_ratio(spec, a, b) -> float:
    """Relative energy-norm distance between two (u, u_t) pairs."""
    g = a[0].grid
    d0 = GridFunction(g, a[0].values - b[0].values)
    d1 = GridFunction(g, a[1].values - b[1].values)
    return float(np.sqrt(physical_a_energy(spec, d0, d1) / physical_a_energy(spec, *b)))


# phase coefficients --------------------------------------------------------

def test_first_coefficients_and_positivity():
    c = c_coefficients(8)
    assert c[:3] == (Fraction(1, 2), Fraction(1, 8), Fraction(1, 16))
    assert all(v > 0 for v in c)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_square_identity_cancels(n):
    coeffs = square_identity_coefficients(n)
    assert np.max(np.abs(coeffs[1:n + 1])) < 1e-12
    # next coefficient is the first one that survives
    assert abs(coeffs[n + 1]) > 1e-6


@settings(max_examples=40, deadline=None)
@given(q=st.floats(0.0, 0.5), n=st.integers(1, 6))
def test_square_identity_remainder_order(q, n):
    c = [float(v) for v in c_coefficients(n)]
    lhs = (1.0 - sum(cj * q ** j for j, cj in enumerate(c, start=1))) ** 2 - (1.0 - q)
    assert abs(lhs) <= 2.0 * q ** (n + 1) + 1e-15


def test_phase_free_is_kx():
    phase = AsymptoticPhase.for_potential(PotentialSpec.zero())
    theta, s, kc = asymptotic_phase(phase, PotentialSpec.zero(), 1.3, np.array([0.0, 5.0]))
    assert np.allclose(theta, [0.0, 6.5]) and np.allclose(kc, 1.3 * np.cos([0.0, 6.5]))


def test_phase_order_two_at_100_against_quadrature():
    phase = AsymptoticPhase.for_potential(SHIFTED, 2)
    theta, _, _ = asymptotic_phase(phase, SHIFTED, 1.0, 100.0)
    x = np.linspace(0.0, 100.0, 400_001)
    q = (1.0 + x) ** -0.6
    expected = 100.0 - 0.5 * simpson(q, x) - 0.125 * simpson(q * q, x)
    assert float(theta) == pytest.approx(expected, rel=1e-10)


def test_phase_increasing_where_classically_allowed():
    phase = AsymptoticPhase.for_potential(SHIFTED)
    x = np.linspace(0.5, 300.0, 3000)
    theta, _, _ = asymptotic_phase(phase, SHIFTED, 1.5, x)
    assert np.all(np.diff(theta) > 0)


def test_order_too_low():
    with pytest.raises(OrderTooLow):
        AsymptoticPhase.for_potential(SHIFTED, 1)
    bad = AsymptoticPhase(1, (0.5,))
    with pytest.raises(OrderTooLow):
        asymptotic_phase(bad, SHIFTED, 1.0, 10.0)


# wave functions ------------------------------------------------------------

@pytest.mark.parametrize("k", [0.7, 2.0])
def test_free_wavefunction_is_scaled_sine(k):
    wf = solve_wavefunction(PotentialSpec.zero(), k, 60.0, tol=1e-11)
    assert np.max(np.abs(wf.u - np.sin(k * wf.x) / k)) < 1e-8
    assert np.max(np.abs(wf.ux - np.cos(k * wf.x))) < 1e-8
    assert wf.u[0] == 0.0 and wf.ux[0] == 1.0


def test_ode_midpoint_residual_small():
    tol = 1e-10
    assert ode_midpoint_residual(SHIFTED, 1.0, 100.0, tol=tol) < 10 * tol + 1e-7


def test_singular_kind_needs_truncation():
    with pytest.raises(DomainError):
        solve_wavefunction(PotentialSpec.inverse_power(0.5), 1.0, 10.0)


# far-field amplitude -------------------------------------------------------

@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_free_amplitude(k):
    e = extract_A(PotentialSpec.zero(), k, cross_check=False)
    assert e.absA == pytest.approx(1.0 / k, abs=1e-6)
    assert abs(e.argA) < 1e-6


def test_free_measure_density():
    table = extract_jost_table(PotentialSpec.zero(), np.linspace(0.5, 2.0, 31))
    assert np.allclose(table.density, 2 * table.k ** 2 / np.pi, rtol=1e-6)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_window_stability(k):
    a = extract_A(SHIFTED, k, fit_window=(200.0, 400.0), cross_check=False)
    b = extract_A(SHIFTED, k, fit_window=(400.0, 800.0), cross_check=False)
    slack = 3 * (a.residual + b.residual)
    assert abs(a.absA - b.absA) <= slack
    assert abs(a.absA * (a.argA - b.argA)) <= slack


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_mean_square_amplitude_within_its_bias(k):
    # (2/R) int_0^R u^2 carries an O(1/(kR)) oscillation term and an
    # O(Q1(R)/(k^2 R)) term from the local wavelength near the origin
    e = extract_A(SHIFTED, k)
    R = default_window(SHIFTED, k)[1]
    bias = 1.0 / (k * R) + MomentCache(SHIFTED, 0.0).moment(1, R) / (k * k * R)
    assert abs(e.ms_amplitude - e.absA) <= bias * e.absA


def test_fit_residual_decays_like_window_power():
    ks = np.linspace(1.0, 2.0, 11)
    scaled = []
    for x_lo in (100.0, 200.0):
        t = extract_jost_table(SHIFTED, ks, window=(x_lo, 2 * x_lo), refined=False)
        scaled.append(t.residual / t.absA * x_lo ** 0.6)
    scaled = np.array(scaled)
    assert np.all(scaled < 1.0)
    assert np.max(scaled) / np.min(scaled) < 20


def test_window_too_close_is_degenerate():
    with pytest.raises(FitDegenerate):
        extract_A(SHIFTED, 0.2, fit_window=(0.0, 3.0), cross_check=False)


def test_table_csv_round_trip(tmp_path):
    t = extract_jost_table(SHIFTED, np.linspace(1.0, 1.2, 5))
    t.to_csv(tmp_path / "jost.csv")
    back = JostTable.from_csv(tmp_path / "jost.csv")
    assert np.array_equal(back.absA, t.absA) and np.array_equal(back.argA, t.argA)


def test_table_grid_rule():
    with pytest.raises(ValueError):
        table_k_grid((0.5, 3.0), GridSpec.from_spacing(100.0, 0.1))
    ks = table_k_grid((1.0, 2.0))
    assert np.max(np.diff(ks)) <= 0.01 + 1e-12


# generalized transform and propagator --------------------------------------

@pytest.fixture(scope="module")
def shifted_basis():
    g = GridSpec.from_spacing(650.0, 0.05)
    table, basis = build_spectral_basis(SHIFTED, g, (0.5, 3.0))
    return g, table, basis


@pytest.fixture(scope="module")
def gaussian_band_data(shifted_basis):
    g, table, basis = shifted_basis
    k = table.k
    envelope = np.exp(-((k - 1.2) / 0.25) ** 2) * band_profile(k, (0.5, 3.0))
    coeff = envelope * table.absA * np.cos(100.0 * k - table.argA)
    return GridFunction(g, basis.inverse(coeff)), GridFunction(g, np.zeros(g.N)), coeff


def test_arg_continuity(shifted_basis):
    _, table, _ = shifted_basis
    assert np.max(np.diff(table.k)) <= 0.01
    assert np.max(np.abs(np.diff(table.argA))) < np.pi / 4
    assert np.all(table.absA > 0) and np.all(table.density > 0)


def test_free_generalized_is_scaled_sine():
    g = GridSpec.from_spacing(600.0, 0.1)
    z = PotentialSpec.zero()
    table, basis = build_spectral_basis(z, g, (0.5, 4.0))
    f = GridFunction(g, np.exp(-((g.x - 40.0) / 2.0) ** 2))
    gen = generalized_forward(z, table, f, basis, check=False).values
    m = (g.k >= 0.5) & (g.k <= 4.0)
    sine = sine_forward(f).values[m]
    assert np.max(np.abs(gen - sine / table.k)) < 1e-8 * np.max(np.abs(sine))


def test_round_trip_and_plancherel(shifted_basis, gaussian_band_data):
    g, table, basis = shifted_basis
    u0, _, coeff = gaussian_band_data
    spec = generalized_forward(SHIFTED, table, u0, basis)
    assert np.max(np.abs(spec.values - coeff)) < 1e-3 * np.max(np.abs(coeff))
    back = generalized_inverse(SHIFTED, table, spec, g, basis)
    assert np.max(np.abs(back.values - u0.values)) < 1e-3 * np.max(np.abs(u0.values))
    l2 = float(np.sum(u0.values ** 2) * g.dx)
    assert basis.measure_norm2(spec.values) == pytest.approx(l2, rel=1e-3)


def test_propagate_zero_time_is_identity(shifted_basis, gaussian_band_data):
    _, table, basis = shifted_basis
    u0, u1, _ = gaussian_band_data
    v0, v1 = propagate_spectral(SHIFTED, table, (u0, u1), 0.0, basis)
    scale = np.max(np.abs(u0.values))
    assert np.max(np.abs(v0.values - u0.values)) < 1e-6 * scale
    assert np.max(np.abs(v1.values)) < 1e-6 * scale


def test_propagator_agrees_with_finite_differences(shifted_basis, gaussian_band_data):
    g, table, basis = shifted_basis
    u0, u1, _ = gaussian_band_data
    exact = propagate_spectral(SHIFTED, table, (u0, u1), 50.0, basis)
    fd = evolve_to(FieldState(g, u0.values, u1.values), 50.0, SHIFTED, cfl=0.5)
    approx = (GridFunction(g, fd.w), GridFunction(g, fd.w_t))
    assert energy_ratio(SHIFTED, approx, exact) < 1e-2


def test_propagator_energy_drift(shifted_basis, gaussian_band_data):
    _, table, basis = shifted_basis
    g0 = basis.forward(gaussian_band_data[0].values)
    g1 = np.zeros_like(g0)
    energies = [basis.physical_energy(*propagate_coefficients(g0, g1, table.k, t))
                for t in np.linspace(0.0, 100.0, 11)]
    assert (max(energies) - min(energies)) / energies[0] < 1e-6


def test_free_mode_rotation():
    g = GridSpec(20 * np.pi, 1999)
    z = PotentialSpec.zero()
    table = extract_jost_table(z, g.k[(g.k >= 0.5) & (g.k <= 2.0)])
    basis = WaveBasis(z, g, table)
    k = g.k[19]
    u0 = GridFunction(g, np.sin(k * g.x))
    u1 = GridFunction(g, np.zeros(g.N))
    v0, v1 = propagate_spectral(z, table, (u0, u1), 3.0, basis, check=False)
    assert np.max(np.abs(v0.values - np.cos(3 * k) * u0.values)) < 1e-6
    assert np.max(np.abs(v1.values + k * np.sin(3 * k) * u0.values)) < 1e-6
