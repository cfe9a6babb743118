"""
The twelve acceptance criteria at their stated tolerances.

Each test prints one ``CRITERION n PASS|FAIL`` line (also collected in the
terminal summary by conftest.py).  Criterion 7 is known to fail at the stated
horizon; see the notes in the README and `test_variant_dichotomy_extended`.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from artifact.evolution import (History, Rectangle, Triangle, energy_functional,
                                evolve_to, FieldState, flux_check, incoming_band_packet,
                                band_profile, morawetz_scan, smooth_bump, travelling_bump)
from artifact.highdim import (HarmonicSector, dispersion_shell_3d, mu_fraction,
                              ode_asymptotics_check, radial3d_bridge)
from artifact.modified_propagator import (intertwine_residual, oscillatory_packet,
                                          variant_table, waveop_residual)
from artifact.potentials import MomentCache, PotentialSpec, truncate_to_type1
from artifact.spectral import (GeneralizedSpectrum, build_spectral_basis,
                               extract_jost_table, generalized_forward,
                               generalized_inverse, square_identity_coefficients)
from artifact.transforms import GridFunction, GridSpec, sine_forward, sine_inverse

from conftest import record_criterion

BAND = (0.5, 4.0)


def report(capsys, n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n:2d} {'PASS' if ok else 'FAIL'}: {detail}"
    record_criterion(n, line)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def smooth_band_bump(k: np.ndarray) -> np.ndarray:
    a, b = k[0], k[-1]
    s = np.clip((k - a) / (b - a), 0.0, 1.0)
    return np.where((s > 0) & (s < 1), np.exp(-1.0 / np.maximum(s * (1 - s), 1e-300)), 0.0)


def band_data(table, basis):
    k = table.k
    bump = smooth_band_bump(k)
    g = basis.grid
    return (GridFunction(g, basis.inverse(bump).real),
            GridFunction(g, basis.inverse(k * bump * np.cos(3 * k)).real))


@pytest.fixture(scope="module")
def basis_06():
    spec = PotentialSpec.shifted_inverse_power(0.6)
    grid = GridSpec.from_spacing(600.0, 0.1)
    table, basis = build_spectral_basis(spec, grid, BAND)
    return spec, grid, table, basis


# 1 -------------------------------------------------------------------------

def test_c01_free_jost(capsys):
    table = extract_jost_table(PotentialSpec.zero(), [0.5, 1.0, 2.0, 4.0], window=(200.0, 400.0))
    amp = float(np.max(np.abs(table.absA * table.k - 1.0)))
    arg = float(np.max(np.abs(table.argA)))
    report(capsys, 1, amp < 1e-3 and arg < 1e-3, f"max rel |A|-1/k = {amp:.2e}, max |arg A| = {arg:.2e}")


# 2 -------------------------------------------------------------------------

def test_c02_transform_round_trips(capsys, basis_06):
    spec, grid, table, basis = basis_06
    x = grid.x
    f = GridFunction(grid, np.exp(-((x - 30.0) ** 2) / 8.0) * np.cos(2 * x))
    back = sine_inverse(sine_forward(f), real=True)
    sine_err = float(np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values)))

    bump = smooth_band_bump(table.k)
    h = generalized_inverse(spec, table, GeneralizedSpectrum(table.k, bump), grid, basis)
    g2 = generalized_forward(spec, table, h, basis)
    gen_err = float(np.max(np.abs(g2.values - bump)) / np.max(bump))
    planch = abs(basis.measure_norm2(g2.values) / float(np.sum(h.values ** 2) * grid.dx) - 1.0)
    ok = sine_err < 1e-12 and gen_err < 1e-3 and planch < 1e-3
    report(capsys, 2, ok, f"sine {sine_err:.2e}, generalized {gen_err:.2e}, Plancherel defect {planch:.2e}")


# 3 -------------------------------------------------------------------------

def test_c03_coefficient_cancellation(capsys):
    coeffs = square_identity_coefficients(5, k=1.0)
    worst = float(np.max(np.abs(coeffs[1:6])))
    report(capsys, 3, worst < 1e-12, f"max |coefficient of q^1..q^5| = {worst:.1e}")


# 4 -------------------------------------------------------------------------

def test_c04_energy_machinery(capsys):
    spec = PotentialSpec.shifted_inverse_power(0.6)
    grid = GridSpec.from_spacing(360.0, 0.01)
    s = travelling_bump(grid, 30.0, 3.0, -1)
    s = FieldState(grid, s.w + 0.5 * smooth_bump(grid.x, 40.0, 3.0), s.w_t, 0.0)
    hist = History()
    final = evolve_to(s, 300.0, spec, 0.5, history=hist, snapshot_times=[100.0],
                      report_times=list(range(0, 301, 25)))
    E0 = energy_functional(grid, spec, s.w, s.w_t)
    s100 = hist.snapshots[100.0]
    drift = abs(energy_functional(grid, spec, s100.w, s100.w_t) - E0) / E0
    em = np.array([r.E_minus for r in hist.reports])
    ep = np.array([r.E_plus for r in hist.reports])
    rise = float(np.max(np.diff(em))) / E0
    drop = float(-np.min(np.diff(ep))) / E0
    m = morawetz_scan(hist, final, spec)
    ok = (drift < 1e-3 and rise <= 1e-3 and drop <= 1e-3 and m.accumulated <= m.bound
          and m.representation_defect < 0.03)
    report(capsys, 4, ok, f"drift {drift:.1e}, E- max rise {rise:.1e}, E+ max drop {drop:.1e}, "
                          f"Morawetz {m.accumulated:.4f} <= {m.bound:.4f}, defect {m.representation_defect:.4f}")


# 5 -------------------------------------------------------------------------

def _flux_residuals(dx: float):
    spec = PotentialSpec.shifted_inverse_power(0.6)
    grid = GridSpec.from_spacing(120.0, dx)
    s = travelling_bump(grid, 30.0, 8.0, -1)
    s = FieldState(grid, s.w + 0.5 * smooth_bump(grid.x, 40.0, 6.0), s.w_t, 0.0)
    regions = [Rectangle(5.0, 25.0, 10.0, 30.0), Triangle(60.0, 5.0), Rectangle(0.0, 20.0, 0.0, 20.0)]
    hist = History()
    evolve_to(s, 60.0, spec, 0.5, history=hist, regions=regions)
    out = []
    for r in regions:
        fr = flux_check(hist, r)
        out += [abs(fr.inward) / fr.energy, abs(fr.outward) / fr.energy]
    return np.array(out)


def test_c05_flux_identities(capsys):
    coarse = _flux_residuals(0.02)
    fine = _flux_residuals(0.01)
    factor = float(np.min(coarse / fine))
    ok = float(fine.max()) < 1e-2 and factor >= 1.7
    report(capsys, 5, ok, f"max residual {fine.max():.1e} at dx=0.01, min halving factor {factor:.2f}")


# 6 -------------------------------------------------------------------------

def test_c06_wave_operator_convergence(capsys, basis_06):
    spec, grid, table, basis = basis_06
    data = band_data(table, basis)
    scan = waveop_residual(spec, "full", data, [50.0, 100.0, 200.0, 400.0], basis=basis)
    r = scan.residual / scan.data_norm
    ok = r[-1] < 0.33 * r[0] and r[-1] < 0.05
    report(capsys, 6, ok, f"residual/||d||: t=50 {r[0]:.4f}, t=400 {r[-1]:.4f} (ratio {r[-1] / r[0]:.3f})")


# 7 -------------------------------------------------------------------------

def test_c07_variant_dichotomy(capsys):
    spec = PotentialSpec.shifted_inverse_power(0.45)
    grid = GridSpec.from_spacing(600.0, 0.1)
    table, basis = build_spectral_basis(spec, grid, BAND)
    data = band_data(table, basis)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = waveop_residual(spec, "full", data, [400.0], basis=basis).residual[0]
        simple = waveop_residual(spec, "simple", data, [400.0], basis=basis).residual[0]
    d3 = variant_table(spec, np.array([1.0]), 1e3)[0][3]
    d4 = variant_table(spec, np.array([1.0]), 1e4)[0][3]
    growth = abs(d4) / abs(d3)
    ok = full < 0.5 * simple and growth > 2
    report(capsys, 7, ok, f"Full/Simple residual at t=400 = {full / simple:.3f} (needs < 0.5); "
                          f"P_Full-P_Simple growth 1e3->1e4 = {growth:.2f}")


@pytest.mark.slow
def test_variant_dichotomy_extended(capsys):
    """Same data on a longer grid: the Full/Simple ratio drops below 0.5 by t=1600."""
    spec = PotentialSpec.shifted_inverse_power(0.45)
    grid = GridSpec.from_spacing(2000.0, 0.1)
    table, basis = build_spectral_basis(spec, grid, BAND)
    data = band_data(table, basis)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        full = waveop_residual(spec, "full", data, [1600.0], basis=basis).residual[0]
        simple = waveop_residual(spec, "simple", data, [1600.0], basis=basis).residual[0]
    with capsys.disabled():
        print(f"\nextended horizon: Full/Simple residual at t=1600 = {full / simple:.3f}")
    assert full < 0.5 * simple


# 8 -------------------------------------------------------------------------

def test_c08_short_range_classic(capsys):
    spec = PotentialSpec.shifted_inverse_power(1.5)
    grid = GridSpec.from_spacing(600.0, 0.1)
    table, basis = build_spectral_basis(spec, grid, BAND)
    data = band_data(table, basis)
    scan = waveop_residual(spec, "none", data, [25.0, 50.0, 100.0, 200.0], basis=basis)
    r = scan.residual / scan.data_norm
    ok = bool(np.all(np.diff(r) < 0)) and r[-1] < 0.05
    report(capsys, 8, ok, "residual/||d|| = " + ", ".join(f"{v:.4f}" for v in r))


# 9 -------------------------------------------------------------------------

def test_c09_truncation_intertwining(capsys):
    spec = PotentialSpec.inverse_power(0.5)
    partner = truncate_to_type1(spec, 1.0)
    grid = GridSpec.from_spacing(460.0, 0.05)
    s = travelling_bump(grid, 20.0, 6.0, -1)
    _, _, diffs = intertwine_residual(spec, partner, (GridFunction(grid, s.w), GridFunction(grid, s.w_t)),
                                      [50.0, 100.0, 200.0, 400.0])
    early, late = diffs[1], diffs[3]
    report(capsys, 9, late < 0.5 * early, f"Cauchy (50,100) {early:.2e}, (200,400) {late:.2e}")


# 10 ------------------------------------------------------------------------

def test_c10_dispersion(capsys):
    band = (1.0, 2.0)
    spec = PotentialSpec.inverse_power(0.5)
    cache = MomentCache(spec, 1.0)
    scaled = []
    for t in (100.0, 200.0, 400.0, 800.0, 1600.0):
        Q1 = float(cache.moment(1, t))
        x = np.arange(t - Q1 - 20.0, t + 20.0, 0.05)
        w = oscillatory_packet(lambda k: band_profile(k, band, 0.15), band, spec, t, -1, x, "full")
        scaled.append(float(np.max(np.abs(w))) * math.sqrt(Q1))
    spread = max(scaled) / min(scaled)

    smoothed = PotentialSpec.smoothed_inverse_power(0.5, 0.1)
    sector = HarmonicSector(3, 0)
    grid = GridSpec.from_spacing(850.0, 0.05)
    data = incoming_band_packet(grid, band, 5.0, taper=0.5)
    shell = dispersion_shell_3d(smoothed, sector, data, [800.0], (0.05, 1.0))[-1].shell

    # broadband data, weighted so that the dispersed energy spreads evenly
    grid = GridSpec.from_spacing(1700.0, 0.05)
    data = incoming_band_packet(grid, (0.4, 2.0), 5.0, power=2.5)
    rows = dispersion_shell_3d(smoothed, sector, data, [400.0, 800.0, 1600.0], (0.05, 1.0))
    sups = [r.sliding_sup for r in rows]
    decreasing = all(b < a for a, b in zip(sups, sups[1:]))
    ok = spread < 2.0 and shell >= 0.9 and decreasing
    report(capsys, 10, ok, f"sup*Q1^(1/2) max/min {spread:.3f}, shell fraction {shell:.4f} at t=800, "
                           "sliding sup " + ", ".join(f"{v:.4f}" for v in sups))


# 11 ------------------------------------------------------------------------

def test_c11_bridge_and_mu(capsys):
    grid = GridSpec.from_spacing(20.0, 0.01)
    res = radial3d_bridge(GridFunction(grid, smooth_bump(grid.x, 8.0, 4.0)))
    table_ok = (mu_fraction(3, 0) == 0 and mu_fraction(3, 1) == 2 and mu_fraction(4, 0) == Fraction(3, 4))
    report(capsys, 11, res.discrepancy < 1e-6 and table_ok,
           f"bridge discrepancy {res.discrepancy:.1e}, mu table {'matches' if table_ok else 'differs'}")


# 12 ------------------------------------------------------------------------

def test_c12_ode_asymptotics(capsys):
    spec = PotentialSpec.inverse_power(0.45)
    parts, ok = [], True
    for xi in (1.0, 2.0):
        rep = ode_asymptotics_check(spec, xi)
        slope = rep.slope()
        ok &= rep.stability < 0.01 and abs(-slope - 0.45) <= 0.15
        parts.append(f"xi={xi:g}: (A,B) change {rep.stability:.1e}, slope {slope:.3f}")
    report(capsys, 12, ok, "; ".join(parts))
