"""
Radial and single-harmonic reductions in R^d.

A sector u = r^{-(d-1)/2} w(r) Phi(theta), with Phi a harmonic of degree nu,
turns -Delta + q into the half-line operator -d^2/dr^2 + mu/r^2 + q with
mu = (d-1+2nu)(d-3+2nu)/4.  This module supplies mu, the 3-d radial Fourier
bridge, the large-time ODE check for frequency-space solutions, and the
shell-energy experiment run on the reduced half-line field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .errors import NonConvergentFit, Q1Bounded, StiffnessFailure
from .evolution import FieldState, cumulative_energy, evolve_to
from .potentials import Kind, MomentCache, PotentialSpec
from .transforms import GridFunction, sine_forward


# ---------------------------------------------------------------------------
# harmonic sectors
# ---------------------------------------------------------------------------

def mu_fraction(d: int, nu: int) -> Fraction:
    if int(d) != d or int(nu) != nu or d < 3 or nu < 0:
        raise ValueError("need integers d >= 3 and nu >= 0")
    return Fraction((d - 1 + 2 * nu) * (d - 3 + 2 * nu), 4)


def mu_coefficient(d: int, nu: int) -> float:
    """(d-1+2nu)(d-3+2nu)/4, computed exactly."""
    return float(mu_fraction(d, nu))


@dataclass(frozen=True)
class HarmonicSector:
    d: int
    nu: int

    @property
    def mu(self) -> float:
        return mu_coefficient(self.d, self.nu)

    def reduced_potential(self, spec: PotentialSpec) -> PotentialSpec:
        """q + mu/r^2 acting on the half-line profile."""
        if self.mu == 0:
            return spec
        return PotentialSpec.inverse_square_plus(self.mu, spec)


# ---------------------------------------------------------------------------
# 3-d radial Fourier bridge
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BridgeResult:
    rho: np.ndarray
    direct: np.ndarray      # 3-d Fourier transform by quadrature over r and cos(theta)
    via_sine: np.ndarray    # (2^(1/2) pi)^-1 rho^-1 (F0 w)(rho)
    discrepancy: float      # max |direct - via_sine|


def radial3d_direct(w: GridFunction, rho: np.ndarray, n_angle: Optional[int] = None) -> np.ndarray:
    """
    u_hat(rho) for u(x) = (2 sqrt(pi))^-1 |x|^-1 w(|x|) with the unitary
    convention (2 pi)^(-3/2) int e^{-i x.xi} u dx.  The azimuth is done
    analytically (factor 2 pi); cos(theta) by Gauss-Legendre and r by
    composite Simpson on the grid nodes including r = 0 and r = L.
    """
    g = w.grid
    r = g.x_full
    wv = w.padded()
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if n_angle is None:
        n_angle = int(max(64, math.ceil(0.5 * math.e * g.L * float(np.max(rho, initial=0.0))) + 40))
    c, wt = np.polynomial.legendre.leggauss(n_angle)
    pref = 2 * math.pi / (2 * math.sqrt(math.pi) * (2 * math.pi) ** 1.5)
    out = np.empty(rho.size)
    for i, p in enumerate(rho):
        # int_{-1}^{1} exp(-i r p c) dc; the odd (imaginary) part cancels
        ang = np.cos(np.outer(r * p, c)) @ wt
        out[i] = pref * simpson(ang * r * wv, x=r)
    return out


def radial3d_bridge(w: GridFunction, n_angle: Optional[int] = None, k_max: Optional[float] = None) -> BridgeResult:
    """Both sides of the radial identity on the grid modes k_m <= k_max."""
    g = w.grid
    k = g.k
    sel = k <= (k_max if k_max is not None else min(float(k[-1]), 10.0))
    rho = k[sel]
    f0 = sine_forward(GridFunction(g, np.asarray(w.values, dtype=float))).values.real[sel]
    via = f0 / (math.sqrt(2) * math.pi * rho)
    direct = radial3d_direct(w, rho, n_angle)
    disc = float(np.max(np.abs(direct - via))) if rho.size else 0.0
    return BridgeResult(rho, direct, via, disc)


# ---------------------------------------------------------------------------
# large-time ODE check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OdeAsymptoticsReport:
    xi: float
    A: float
    B: float
    window_AB: Tuple[Tuple[float, float], ...]
    t: np.ndarray
    E0: np.ndarray
    E1: np.ndarray
    envelope_t: np.ndarray
    envelope_E0: np.ndarray

    @property
    def stability(self) -> float:
        """Relative change of (A, B) between the last two fit windows."""
        (a1, b1), (a2, b2) = self.window_AB[-2:]
        return math.hypot(a2 - a1, b2 - b1) / math.hypot(a2, b2)

    @property
    def amplitude_spread(self) -> float:
        """Relative spread of A^2 + B^2 over the fit windows."""
        amp = np.array([a * a + b * b for a, b in self.window_AB])
        return float((amp.max() - amp.min()) / amp.max())

    def slope(self) -> float:
        """log-log slope of the |E0| envelope."""
        return float(np.polyfit(np.log(self.envelope_t), np.log(self.envelope_E0), 1)[0])


def _second_derivative_ok(spec: PotentialSpec, R: float) -> bool:
    x = np.geomspace(R, 1e4 * R, 200)
    h = 1e-4 * x
    d2 = (spec.dq(x + h) - spec.dq(x - h)) / (2 * h)
    return bool(np.all(d2 > 0) or np.all(np.abs(d2) * x ** 2 < 10.0))


def ode_asymptotics_check(spec: PotentialSpec, xi: float, case: str = "b",
                          T_range: Tuple[float, float] = (1e3, 1e4), T0: float = 10.0,
                          v0: Tuple[float, float] = (1.0, 0.3), n_windows: int = 12,
                          tol: float = 0.01, rtol: float = 1e-11) -> OdeAsymptoticsReport:
    """
    Integrate v'' + (xi^2 + q - [case b] q' Q1 / (2 xi^2 + 2 q)) v = 0 from T0
    and read off A, B through

        xi A(t) = xi v cos(eta) - v_t sin(eta),
        xi B(t) = xi v sin(eta) + v_t cos(eta),     eta = xi t + P(xi, t),

    with P the three-term phase for case "b" and Q1/(2 xi) for case "a".
    Window means of A(t), B(t) on log-spaced windows over T_range are
    extrapolated to t = inf with the slowest error rate allowed for the
    case; E0 and E1 are the residual traces against the extrapolated pair.
    """
    if case not in ("a", "b"):
        raise ValueError("case must be 'a' or 'b'")
    if xi <= 0:
        raise ValueError("xi must be positive")
    lo, hi = T_range
    if not T0 >= 1 or not T0 < lo < hi:
        raise ValueError("need 1 <= T0 < T_range[0] < T_range[1]")
    beta = spec.beta
    if case == "b" and not _second_derivative_ok(spec, max(T0, 10.0)):
        warnings.warn("neither q'' > 0 nor |q''| <~ x^-2 holds on the sampled range", RuntimeWarning)
    if spec.kind is Kind.ZERO:
        rate = 1.0
    elif case == "b":
        rate = min(beta, 3 * beta - 1)
    else:
        rate = min(beta, 2 * beta - 1)

    cache = MomentCache(spec, 1.0)
    q1_0, q2_0 = cache.moment(1, T0), cache.moment(2, T0)
    xi2 = xi * xi

    def rhs(t, y):
        v, vt, Q1, _ = y
        qt = float(spec.q(t))
        coef = xi2 + qt
        if case == "b":
            coef -= float(spec.dq(t)) * Q1 / (2 * xi2 + 2 * qt)
        return [vt, -coef * v, qt, qt * qt]

    sol = solve_ivp(rhs, (T0, hi), [v0[0], v0[1], q1_0, q2_0], method="DOP853",
                    rtol=rtol, atol=1e-12, dense_output=True)
    if sol.status != 0:
        raise StiffnessFailure(sol.message, sol.t[-1] if sol.t.size else None)

    n = int(math.ceil((hi - lo) * xi / (2 * math.pi) * 40)) + 1
    t = np.linspace(lo, hi, n)
    v, vt, Q1, Q2 = sol.sol(t)
    P = Q1 / (2 * xi)
    if case == "b":
        P = P - spec.q(t) * Q1 / (4 * xi ** 3) + Q2 / (8 * xi ** 3)
    eta = xi * t + P
    c, s = np.cos(eta), np.sin(eta)
    A_t = (xi * v * c - vt * s) / xi
    B_t = (xi * v * s + vt * c) / xi

    edges = np.geomspace(lo, hi, n_windows + 1)
    tc, Am, Bm = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (t >= a) & (t < b) if b < hi else (t >= a)
        tc.append(math.sqrt(a * b))
        Am.append(float(A_t[m].mean()))
        Bm.append(float(B_t[m].mean()))
    tc = np.array(tc)
    X = np.column_stack([np.ones_like(tc), tc ** -rate])
    A_inf = float(np.linalg.lstsq(X, np.array(Am), rcond=None)[0][0])
    B_inf = float(np.linalg.lstsq(X, np.array(Bm), rcond=None)[0][0])

    E0 = v - (A_inf * c + B_inf * s)
    E1 = vt - (-A_inf * xi * s + B_inf * xi * c)
    env = []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (t >= a) & (t <= b)
        env.append(float(np.max(np.abs(E0[m]))))
    report = OdeAsymptoticsReport(xi, A_inf, B_inf, tuple(zip(Am, Bm)), t, E0, E1, tc, np.array(env))
    if report.stability >= tol:
        raise NonConvergentFit(f"(A, B) moved by {report.stability:.3g} between the last two windows")
    return report


# ---------------------------------------------------------------------------
# shell energies in d dimensions
# ---------------------------------------------------------------------------

def default_shell_constants(band) -> Tuple[float, float]:
    """c1 = (3/(8 b^2)) * 0.5 and c2 = (3/(4 a^2)) * 1.5 for data in [a, b]."""
    a, b = band
    return 3.0 / (8.0 * b * b) * 0.5, 3.0 / (4.0 * a * a) * 1.5


def _d_energy_to(state: FieldState, spec: PotentialSpec, d: int, r: np.ndarray, x, F) -> np.ndarray:
    """Energy of the d-dimensional field inside the ball of radius r."""
    r = np.asarray(r, dtype=float)
    w = np.interp(r, x, np.concatenate(([0.0], state.w, [0.0])))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(r > 0, (d - 1) / (2 * r) * w * w, 0.0)
    return np.interp(r, x, F) - corr


def shell_fractions(state: FieldState, spec: PotentialSpec, d: int, r1: float, r2: float) -> Tuple[float, float, float]:
    """(inside r < r1, shell r1 <= r <= r2, outside r > r2) energy fractions in R^d."""
    x, F = cumulative_energy(state, spec)
    total = float(F[-1])
    if total == 0:
        return 0.0, 0.0, 0.0
    r1 = min(max(r1, 0.0), x[-1])
    r2 = min(max(r2, r1), x[-1])
    e1, e2 = _d_energy_to(state, spec, d, np.array([r1, r2]), x, F)
    inside = e1 / total
    shell = (e2 - e1) / total
    return float(inside), float(shell), float(1.0 - inside - shell)


def sliding_sup_d(state: FieldState, spec: PotentialSpec, d: int, ell: float) -> float:
    """sup_r of the R^d energy in {r <= |x| <= r + ell}, divided by the total."""
    x, F = cumulative_energy(state, spec)
    total = float(F[-1])
    if total == 0 or ell <= 0:
        return 0.0
    lo = _d_energy_to(state, spec, d, x, x, F)
    hi = _d_energy_to(state, spec, d, np.minimum(x + ell, x[-1]), x, F)
    return float(np.max(hi - lo) / total)


@dataclass(frozen=True)
class ShellRow:
    t: float
    Q1: float
    inside: float
    shell: float
    outside: float
    sliding_sup: float


def dispersion_shell_3d(spec: PotentialSpec, sector: HarmonicSector, data: FieldState,
                        t_list: Sequence[float], constants: Tuple[float, float],
                        cfl: float = 0.5) -> list:
    """
    Evolve the reduced profile and report, per t, the fractions of the
    d-dimensional energy inside |x| < t - c2 Q1(t), in the shell, and outside
    |x| > t - c1 Q1(t), plus the sliding sup with ell = Q1 / log Q1.
    """
    c1, c2 = constants
    if not 0 < c1 < c2:
        raise ValueError("need 0 < c1 < c2")
    if spec.beta > 1:
        warnings.warn("Q1(t) stays bounded for beta > 1; no radial spreading is expected", Q1Bounded)
    reduced = sector.reduced_potential(spec)
    cache = MomentCache(spec, 1.0)
    rows = []
    state = data
    for t in sorted(t_list):
        state = evolve_to(state, t, reduced, cfl=cfl)
        Q1 = float(cache.moment(1, t))
        inside, shell, outside = shell_fractions(state, reduced, sector.d, t - c2 * Q1, t - c1 * Q1)
        ell = Q1 / math.log(Q1) if Q1 > math.e else Q1
        rows.append(ShellRow(float(t), Q1, inside, shell, outside, sliding_sup_d(state, reduced, sector.d, ell)))
    return rows
