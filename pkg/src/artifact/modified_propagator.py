"""
Phase-shift functions, the approximate propagators built from them, the
explicit limit operator and the residual harness that checks the modified
wave-operator limit.

Everything acts on (position, velocity) pairs through the half-line sine
transform: a pair (v0, v1) is mapped to its sine spectra, each frequency is
rotated by

    [[cos a, sin a / k], [-k sin a, cos a]]

and transformed back.  The propagator uses a = k t + P(k, t).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GridMismatch, PotentialsDifferFar, UnderResolved, VariantInadmissible
from .potentials import Kind, MomentCache, PotentialSpec
from .spectral import (
    JostTable,
    WaveBasis,
    c_coefficients,
    propagate_coefficients,
    rotate,
    trapezoid_weights,
)
from .transforms import (
    GridFunction,
    GridSpec,
    SpectrumFunction,
    sine_forward,
    sine_inverse,
    spectral_energy,
)


class PhaseShiftVariant(str, Enum):
    FULL = "full"
    SIMPLE = "simple"
    NONE = "none"


def admissible(variant: PhaseShiftVariant, spec: PotentialSpec) -> bool:
    b = spec.beta
    if variant is PhaseShiftVariant.FULL:
        return b > 1.0 / 3.0
    if variant is PhaseShiftVariant.SIMPLE:
        return b > 0.5
    return b > 1.0  # q integrable at infinity


def check_variant(variant: PhaseShiftVariant, spec: PotentialSpec) -> bool:
    ok = admissible(variant, spec)
    if not ok:
        warnings.warn(f"variant {variant.value} is outside its range for beta={spec.beta}",
                      VariantInadmissible, stacklevel=3)
    return ok


def phase_shift(variant: PhaseShiftVariant, spec: PotentialSpec, k, t: float,
                cache: Optional[MomentCache] = None, warn: bool = True):
    """
    P(k, t) with moments taken from 1 to t:

        Full   : Q1/(2k) - q(t) Q1/(4k^3) + Q2/(8k^3)
        Simple : Q1/(2k)
        None   : 0
    """
    variant = PhaseShiftVariant(variant)
    if warn:
        check_variant(variant, spec)
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise ValueError("k must be positive")
    if t < 1.0:
        raise ValueError("t must be >= 1")
    if variant is PhaseShiftVariant.NONE or spec.kind is Kind.ZERO:
        return np.zeros_like(k) if k.ndim else 0.0
    cache = cache or MomentCache(spec, 1.0)
    q1 = cache.moment(1, t)
    out = q1 / (2.0 * k)
    if variant is PhaseShiftVariant.FULL:
        out = out - spec.q(t) * q1 / (4.0 * k ** 3) + cache.moment(2, t) / (8.0 * k ** 3)
    return out


def phase_function(variant: PhaseShiftVariant, spec: PotentialSpec, k, t: float,
                   cache: Optional[MomentCache] = None, warn: bool = True):
    """eta(k, t) = k t + P(k, t)."""
    return np.asarray(k) * t + phase_shift(variant, spec, k, t, cache, warn)


def _apply(data: Sequence[GridFunction], angle_fn: Callable[[np.ndarray], np.ndarray]):
    v0, v1 = data
    if v0.grid != v1.grid:
        raise GridMismatch("components live on different grids")
    g = v0.grid
    f0, f1 = sine_forward(v0).values, sine_forward(v1).values
    h0, h1 = rotate(f0, f1, g.k, angle_fn(g.k))
    real = np.isrealobj(v0.values) and np.isrealobj(v1.values)
    return (sine_inverse(SpectrumFunction(g, h0), real=real),
            sine_inverse(SpectrumFunction(g, h1), real=real))


def U_vec(variant: PhaseShiftVariant, spec: PotentialSpec, t: float,
          data: Sequence[GridFunction], cache: Optional[MomentCache] = None):
    """Approximate propagator: rotation by eta(k, t) in sine-spectral space."""
    cache = cache or MomentCache(spec, 1.0)
    return _apply(data, lambda k: phase_function(variant, spec, k, t, cache))


def U_vec_inverse(variant: PhaseShiftVariant, spec: PotentialSpec, t: float,
                  data: Sequence[GridFunction], cache: Optional[MomentCache] = None):
    """Inverse of U_vec: rotation by -eta(k, t)."""
    cache = cache or MomentCache(spec, 1.0)
    return _apply(data, lambda k: -phase_function(variant, spec, k, t, cache))


# ---------------------------------------------------------------------------
# limit operator
# ---------------------------------------------------------------------------

def limit_offset(variant: Optional[PhaseShiftVariant], spec: PotentialSpec, k,
                 order: int) -> np.ndarray:
    """
    Constant phase that turns arg A(k) into the limit rotation for `variant`.

    arg A(k) is measured against theta_N (moments from 0, order N).  The
    propagator built from that convention,

        P_0(k,t) = Q1/(2k) - q Q1/(4k^3) + Q2/(8k^3) + sum_{3<=j<=N} c_j k^(1-2j) int_0^inf q^j,

    with moments from 0, has limit rotation arg A(k) itself.  Every other
    variant differs from P_0 by a phase with a finite limit in t, returned
    here.  `variant=None` gives 0 (the P_0 convention).  An inadmissible
    Simple variant falls back to the Full offset: its own offset diverges.
    """
    k = np.asarray(k, dtype=float)
    if variant is None or spec.kind is Kind.ZERO:
        return np.zeros_like(k)
    variant = PhaseShiftVariant(variant)
    c = [float(v) for v in c_coefficients(max(order, 2))]
    c0 = MomentCache(spec, 0.0)
    if variant is PhaseShiftVariant.NONE:
        out = np.zeros_like(k)
        for j in range(1, max(order, 2) + 1):
            out = out + c[j - 1] * k ** (1 - 2 * j) * c0.tail(j)
        return out
    out = c0.moment(1, 1.0) / (2.0 * k) + c0.moment(2, 1.0) / (8.0 * k ** 3)
    for j in range(3, order + 1):
        out = out + c[j - 1] * k ** (1 - 2 * j) * c0.tail(j)
    if variant is PhaseShiftVariant.SIMPLE and admissible(variant, spec):
        out = out + MomentCache(spec, 1.0).tail(2) / (8.0 * k ** 3)
    return out


def _mode_index(grid: GridSpec, k: np.ndarray) -> np.ndarray:
    idx = np.rint(k / grid.dk).astype(int) - 1
    if np.any(idx < 0) or np.any(idx >= grid.N) or not np.allclose(grid.k[idx], k, rtol=1e-10, atol=0):
        raise GridMismatch("table k-nodes are not sine modes of the grid")
    return idx


def limit_spectra(spec: PotentialSpec, table: JostTable, basis: WaveBasis,
                  g0: np.ndarray, g1: np.ndarray, variant: Optional[PhaseShiftVariant] = None):
    """Sine spectra (on all grid modes) of the limit operator applied to data with
    generalized spectra (g0, g1)."""
    k = table.k
    ang = table.argA + limit_offset(variant, spec, k, table.order)
    h0, h1 = rotate(g0 / table.absA, g1 / table.absA, k, ang)
    grid = basis.grid
    idx = _mode_index(grid, k)
    f0 = np.zeros(grid.N, dtype=complex)
    f1 = np.zeros(grid.N, dtype=complex)
    f0[idx] = h0
    f1[idx] = h1
    return f0, f1


def W_vec(spec: PotentialSpec, table: JostTable, data: Sequence[GridFunction],
          basis: Optional[WaveBasis] = None, variant: Optional[PhaseShiftVariant] = None):
    """
    Explicit limit operator: generalized transform, divide by |A(k)|, rotate
    by arg A(k) (plus the offset of `variant`), inverse sine transform.
    """
    u0, u1 = data
    basis = basis or WaveBasis(spec, u0.grid, table)
    g0 = basis.forward(u0.values)
    g1 = basis.forward(u1.values)
    f0, f1 = limit_spectra(spec, table, basis, g0, g1, variant)
    grid = u0.grid
    return (sine_inverse(SpectrumFunction(grid, f0), real=True),
            sine_inverse(SpectrumFunction(grid, f1), real=True))


@dataclass(frozen=True)
class ResidualScan:
    t: np.ndarray
    residual: np.ndarray
    cauchy: np.ndarray
    data_norm: float

    def rows(self):
        return list(zip(self.t, self.residual, self.cauchy))


def waveop_residual(spec: PotentialSpec, variant: PhaseShiftVariant, data: Sequence[GridFunction],
                    t_list, table: Optional[JostTable] = None, basis: Optional[WaveBasis] = None,
                    **fd_options) -> ResidualScan:
    """
    ||U(t)^-1 S_q(t) d - W d|| in the energy norm for each t, plus the Cauchy
    differences between consecutive entries of `t_list`.

    For potentials bounded at 0 the exact propagator is applied spectrally
    with `table`/`basis`.  For singular potentials there is no table; S_q
    comes from the finite-difference solver and only Cauchy differences are
    reported (residual is NaN).
    """
    variant = PhaseShiftVariant(variant)
    check_variant(variant, spec)
    t_list = np.asarray(sorted(t_list), dtype=float)
    u0, u1 = data
    grid = u0.grid
    cache = MomentCache(spec, 1.0)

    if spec.singular:
        return _waveop_cauchy_fd(spec, variant, data, t_list, cache, **fd_options)

    if basis is None:
        if table is None:
            raise ValueError("a Jost table is required for potentials bounded at 0")
        basis = WaveBasis(spec, grid, table)
    table = basis.table
    g0 = basis.forward(u0.values)
    g1 = basis.forward(u1.values)
    data_norm = math.sqrt(basis.spectral_energy(g0, g1))
    w0, w1 = limit_spectra(spec, table, basis, g0, g1, variant)
    k = grid.k
    res, prev, cauchy = [], None, []
    for t in t_list:
        h0, h1 = propagate_coefficients(g0, g1, basis.k, t)
        s0 = GridFunction(grid, basis.inverse(h0).real)
        s1 = GridFunction(grid, basis.inverse(h1).real)
        f0, f1 = sine_forward(s0).values, sine_forward(s1).values
        eta = phase_function(variant, spec, k, t, cache, warn=False)
        r0, r1 = rotate(f0, f1, k, -eta)
        res.append(math.sqrt(spectral_energy(SpectrumFunction(grid, r0 - w0), SpectrumFunction(grid, r1 - w1))))
        cauchy.append(math.nan if prev is None else math.sqrt(
            spectral_energy(SpectrumFunction(grid, r0 - prev[0]), SpectrumFunction(grid, r1 - prev[1]))))
        prev = (r0, r1)
    return ResidualScan(t_list, np.array(res), np.array(cauchy), data_norm)


def _waveop_cauchy_fd(spec, variant, data, t_list, cache, dx_cfl: float = 0.5):
    from .evolution import FieldState, evolve_to

    u0, u1 = data
    grid = u0.grid
    state = FieldState(grid, u0.values.astype(float), u1.values.astype(float), 0.0)
    k = grid.k
    prev, cauchy = None, []
    for t in t_list:
        state = evolve_to(state, t, spec, cfl=dx_cfl)
        f0 = sine_forward(GridFunction(grid, state.w)).values
        f1 = sine_forward(GridFunction(grid, state.w_t)).values
        eta = phase_function(variant, spec, k, t, cache, warn=False)
        r0, r1 = rotate(f0, f1, k, -eta)
        cauchy.append(math.nan if prev is None else math.sqrt(
            spectral_energy(SpectrumFunction(grid, r0 - prev[0]), SpectrumFunction(grid, r1 - prev[1]))))
        prev = (r0, r1)
    n = math.sqrt(spectral_energy(sine_forward(u0), sine_forward(u1)))
    return ResidualScan(t_list, np.full(t_list.size, math.nan), np.array(cauchy), n)


# ---------------------------------------------------------------------------
# intertwining between potentials that agree far out
# ---------------------------------------------------------------------------

def check_far_agreement(spec_a: PotentialSpec, spec_b: PotentialSpec, R: float,
                        x_far: float = 1e4, rtol: float = 1e-12) -> None:
    x = np.geomspace(max(R, 1e-9), x_far, 200)
    qa, qb = spec_a.q(x), spec_b.q(x)
    bad = np.abs(qa - qb) > rtol * np.maximum(np.abs(qb), 1e-300)
    if np.any(bad):
        raise PotentialsDifferFar(f"potentials differ at x={x[np.flatnonzero(bad)[0]]:.6g} >= R={R}")


def intertwine_residual(spec_a: PotentialSpec, spec_b: PotentialSpec, data: Sequence[GridFunction],
                        t_list, R: float = 1.0, cfl: float = 0.5):
    """
    Cauchy scan of S_b(-t) S_a(t) d over `t_list` in the energy norm of b,
    both flows by the finite-difference solver.  Returns (t, values, diffs)
    with diffs[i] = ||X(t_i) - X(t_{i-1})||.
    """
    from .evolution import FieldState, energy_functional, evolve_to

    check_far_agreement(spec_a, spec_b, R)
    u0, u1 = data
    grid = u0.grid
    t_list = np.asarray(sorted(t_list), dtype=float)
    state = FieldState(grid, np.asarray(u0.values, float), np.asarray(u1.values, float), 0.0)
    outs = []
    for t in t_list:
        state = evolve_to(state, t, spec_a, cfl=cfl)
        back = FieldState(grid, state.w.copy(), -state.w_t, 0.0)
        back = evolve_to(back, t, spec_b, cfl=cfl)
        outs.append((back.w, -back.w_t))
    diffs = [math.nan]
    for (a0, a1), (b0, b1) in zip(outs[:-1], outs[1:]):
        diffs.append(math.sqrt(energy_functional(grid, spec_b, a0 - b0, a1 - b1)))
    return t_list, outs, np.array(diffs)


# ---------------------------------------------------------------------------
# oscillatory packets
# ---------------------------------------------------------------------------

def packet_k_spacing(x_max: float, t: float) -> float:
    """Largest admissible k-spacing, 2 pi / (10 (x + t))."""
    return 2.0 * np.pi / (10.0 * (x_max + t))


def oscillatory_packet(f, band, spec: PotentialSpec, t: float, sign: int, x,
                       variant: PhaseShiftVariant = PhaseShiftVariant.FULL,
                       dk: Optional[float] = None, chunk: int = 2048) -> np.ndarray:
    """
    w(x, t) = int_a^b f(k) exp(i(sign*k*x + k*t + P(k, t))) dk by the
    trapezoid rule.  `f` is a callable on k.  Raises UnderResolved when the
    k-spacing exceeds 2 pi / (10 (x + t)).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a, b = band
    if not 0 < a < b:
        raise ValueError("band must lie in (0, inf)")
    x = np.asarray(x, dtype=float)
    need = packet_k_spacing(float(np.max(np.abs(x))), t)
    if dk is None:
        dk = need
    if dk > need * (1 + 1e-12):
        raise UnderResolved(f"dk={dk:.3g} exceeds {need:.3g}")
    n = int(math.ceil((b - a) / dk)) + 1
    k = np.linspace(a, b, n)
    amp = np.asarray(f(k), dtype=complex) * trapezoid_weights(k)
    phase = k * t + phase_shift(variant, spec, k, t, warn=False)
    amp = amp * np.exp(1j * phase)
    out = np.empty(x.size, dtype=complex)
    for s in range(0, x.size, chunk):
        xs = x[s:s + chunk]
        out[s:s + chunk] = np.exp(1j * sign * np.outer(xs, k)) @ amp
    return out


def variant_table(spec: PotentialSpec, ks, t: float):
    """Rows (k, P_full, P_simple, P_full - P_simple) at time t."""
    cache = MomentCache(spec, 1.0)
    ks = np.asarray(ks, dtype=float)
    pf = phase_shift(PhaseShiftVariant.FULL, spec, ks, t, cache, warn=False)
    ps = phase_shift(PhaseShiftVariant.SIMPLE, spec, ks, t, cache, warn=False)
    return list(zip(ks, pf, ps, pf - ps))
