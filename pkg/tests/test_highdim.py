from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.errors import Q1Bounded
from artifact.evolution import FieldState, evolve_to, incoming_band_packet, smooth_bump
from artifact.highdim import (HarmonicSector, default_shell_constants, dispersion_shell_3d,
                              mu_coefficient, mu_fraction, ode_asymptotics_check, radial3d_bridge,
                              shell_fractions, sliding_sup_d)
from artifact.potentials import Kind, PotentialSpec
from artifact.transforms import GridFunction, GridSpec


# harmonic sectors ----------------------------------------------------------

def test_mu_hand_values():
    assert mu_fraction(3, 0) == 0
    assert mu_fraction(3, 1) == 2
    assert mu_fraction(4, 0) == Fraction(3, 4)
    assert mu_coefficient(5, 2) == 12.0  # (4 + 4)(2 + 4) / 4


def test_mu_lower_bound_away_from_radial_3d():
    for d in range(3, 9):
        for nu in range(0, 9):
            if (d, nu) != (3, 0):
                assert mu_fraction(d, nu) >= Fraction(3, 4)


def test_mu_rejects_bad_input():
    with pytest.raises(ValueError):
        mu_fraction(2, 0)
    with pytest.raises(ValueError):
        mu_fraction(3, -1)


def test_reduced_potential():
    base = PotentialSpec.shifted_inverse_power(0.6)
    assert HarmonicSector(3, 0).reduced_potential(base) is base
    red = HarmonicSector(3, 1).reduced_potential(base)
    assert red.kind is Kind.INVERSE_SQUARE_PLUS
    assert red.q(2.0) == pytest.approx(2.0 / 4.0 + base.q(2.0))


# radial bridge -------------------------------------------------------------

def test_bridge_gaussian_profile():
    g = GridSpec.from_spacing(20.0, 0.01)
    res = radial3d_bridge(GridFunction(g, np.exp(-((g.x - 8.0) / 1.5) ** 2)), k_max=5.0)
    assert res.discrepancy < 1e-6


def test_bridge_zero_and_linearity():
    g = GridSpec.from_spacing(15.0, 0.02)
    zero = radial3d_bridge(GridFunction(g, np.zeros(g.N)), k_max=3.0)
    assert np.all(zero.direct == 0) and np.all(zero.via_sine == 0)
    w = smooth_bump(g.x, 7.0, 3.0)
    one = radial3d_bridge(GridFunction(g, w), k_max=3.0)
    two = radial3d_bridge(GridFunction(g, 2 * w), k_max=3.0)
    assert np.allclose(two.direct, 2 * one.direct, rtol=1e-13, atol=1e-16)
    assert np.allclose(two.via_sine, 2 * one.via_sine, rtol=1e-13, atol=1e-16)


def test_bridge_second_order_for_kinked_profile():
    # tent-shaped profile with kinks on grid nodes: the quadratures agree to O(dx^2)
    errs = []
    for dx in (0.04, 0.02, 0.01):
        g = GridSpec.from_spacing(20.0, dx)
        s = (g.x - 8.0) / 3.0
        errs.append(radial3d_bridge(GridFunction(g, np.maximum(0.0, 1.0 - s * s)), k_max=3.0).discrepancy)
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


# large-time ODE ------------------------------------------------------------

def test_free_ode_recovers_cosine():
    xi, T0 = 1.3, 10.0
    rep = ode_asymptotics_check(PotentialSpec.zero(), xi, T_range=(100.0, 1000.0), T0=T0,
                                v0=(math.cos(xi * T0), -xi * math.sin(xi * T0)))
    assert rep.A == pytest.approx(1.0, abs=1e-8)
    assert abs(rep.B) < 1e-8
    assert np.max(np.abs(rep.E0)) < 1e-7


def test_ode_error_envelope_decreases():
    rep = ode_asymptotics_check(PotentialSpec.inverse_power(0.45), 1.0)
    assert np.all(np.diff(rep.envelope_E0) < 0)
    assert rep.amplitude_spread < 0.02


def test_ode_rejects_bad_arguments():
    spec = PotentialSpec.inverse_power(0.45)
    with pytest.raises(ValueError):
        ode_asymptotics_check(spec, 1.0, case="c")
    with pytest.raises(ValueError):
        ode_asymptotics_check(spec, -1.0)
    with pytest.raises(ValueError):
        ode_asymptotics_check(spec, 1.0, T_range=(5.0, 100.0), T0=10.0)


# shells --------------------------------------------------------------------

@pytest.fixture(scope="module")
def spread_state():
    g = GridSpec.from_spacing(120.0, 0.05)
    spec = PotentialSpec.shifted_inverse_power(0.6)
    return evolve_to(FieldState(g, smooth_bump(g.x, 20.0, 5.0), np.zeros(g.N)), 40.0, spec), spec


@settings(max_examples=40, deadline=None)
@given(r1=st.floats(0.0, 150.0), gap=st.floats(0.0, 150.0), d=st.integers(3, 7))
def test_shell_fractions_partition(spread_state, r1, gap, d):
    state, spec = spread_state
    parts = shell_fractions(state, spec, d, r1, r1 + gap)
    assert sum(parts) == pytest.approx(1.0, abs=1e-14)
    assert parts[1] >= -1e-12


def test_shell_fractions_zero_data():
    g = GridSpec.from_spacing(20.0, 0.1)
    assert shell_fractions(FieldState.zeros(g), PotentialSpec.zero(), 3, 1.0, 2.0) == (0.0, 0.0, 0.0)
    assert sliding_sup_d(FieldState.zeros(g), PotentialSpec.zero(), 3, 5.0) == 0.0


def test_sliding_sup_whole_domain(spread_state):
    state, spec = spread_state
    assert sliding_sup_d(state, spec, 3, state.grid.L) == pytest.approx(1.0, abs=1e-12)


def test_default_shell_constants():
    c1, c2 = default_shell_constants((1.0, 2.0))
    assert c1 == pytest.approx(0.046875) and c2 == pytest.approx(1.125)


def test_fast_decay_warns_and_keeps_constant_shell():
    # Q1 stays bounded, so the energy rides in a shell of fixed thickness behind x = t
    spec = PotentialSpec.smoothed_inverse_power(1.5, 0.1)
    g = GridSpec.from_spacing(450.0, 0.05)
    data = incoming_band_packet(g, (1.0, 2.0), 5.0, taper=0.5)
    with pytest.warns(Q1Bounded):
        rows = dispersion_shell_3d(spec, HarmonicSector(3, 0), data, [100.0], (0.05, 1.0))
    assert rows[0].inside + rows[0].shell + rows[0].outside == pytest.approx(1.0, abs=1e-14)
    state = data
    for t in (100.0, 200.0, 400.0):
        state = evolve_to(state, t, spec)
        assert shell_fractions(state, spec, 3, t - 40.0, t + 5.0)[1] >= 0.9


def test_shell_constants_validated():
    g = GridSpec.from_spacing(20.0, 0.1)
    with pytest.raises(ValueError):
        dispersion_shell_3d(PotentialSpec.inverse_power(0.5), HarmonicSector(3, 0),
                            FieldState.zeros(g), [5.0], (1.0, 0.5))
