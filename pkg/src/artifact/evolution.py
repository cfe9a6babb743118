"""
Finite-difference evolution of w_tt - w_xx + q(x) w = 0 on [0, L] with
w(0, t) = w(L, t) = 0, plus the inward/outward energy diagnostics.

The scheme is velocity Verlet (kick-drift-kick) with the centred
three-point Laplacian.  Energies follow the convention

    E = int ( w_x^2 + w_t^2 + q w^2 ) dx,
    e_-(x,t) = 1/2 (w_x + w_t)^2 + q/2 w^2     (inward),
    e_+(x,t) = 1/2 (w_x - w_t)^2 + q/2 w^2     (outward),

so that e_- + e_+ = e pointwise and E_- + E_+ = E.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from .errors import Blowup, CFLViolation, RegionOutsideHistory
from .potentials import PotentialSpec
from .transforms import GridSpec, fmt

_MAX_CFL = 0.9
_STIFF_GUARD = 0.1


@dataclass(frozen=True, eq=False)
class FieldState:
    """(w, w_t) sampled on the interior nodes of `grid` at time `time`."""

    grid: GridSpec
    w: np.ndarray
    w_t: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        for name in ("w", "w_t"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (self.grid.N,):
                raise ValueError(f"{name} must have {self.grid.N} samples")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite samples")
            object.__setattr__(self, name, v)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "FieldState":
        return cls(grid, np.zeros(grid.N), np.zeros(grid.N), 0.0)


@dataclass(frozen=True)
class EnergyReport:
    time: float
    E_total: float
    E_minus: float
    E_plus: float
    potential_part: float
    boundary_flux_accum: float = 0.0
    morawetz_accum: float = 0.0


# ---------------------------------------------------------------------------
# nodal quantities
# ---------------------------------------------------------------------------

def potential_on_grid(spec: PotentialSpec, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """q and M-weight -q'/2 at the interior nodes (never at x=0)."""
    return spec.q(grid.x), -0.5 * spec.dq(grid.x)


def _full(grid: GridSpec, v: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.N + 2)
    out[1:-1] = v
    return out


def _dx_full(grid: GridSpec, w: np.ndarray) -> np.ndarray:
    """w_x on all nodes 0..N+1: centred inside, one-sided second order at the ends."""
    wf = _full(grid, w)
    h = grid.dx
    d = np.empty_like(wf)
    d[1:-1] = (wf[2:] - wf[:-2]) / (2 * h)
    d[0] = (-3 * wf[0] + 4 * wf[1] - wf[2]) / (2 * h)
    d[-1] = (3 * wf[-1] - 4 * wf[-2] + wf[-3]) / (2 * h)
    return d


def boundary_derivative(grid: GridSpec, w: np.ndarray) -> float:
    """w_x(0) = (4 w_1 - w_2) / (2 dx), using w_0 = 0."""
    return float((4 * w[0] - w[1]) / (2 * grid.dx))


@dataclass(frozen=True)
class Densities:
    """Energy densities on all nodes 0..N+1 (x_full)."""

    x: np.ndarray
    a2: np.ndarray   # (w_x + w_t)^2
    b2: np.ndarray   # (w_x - w_t)^2
    ep: np.ndarray   # e' = q w^2
    M: np.ndarray    # -q'/2 w^2

    @property
    def e_minus(self) -> np.ndarray:
        return 0.5 * (self.a2 + self.ep)

    @property
    def e_plus(self) -> np.ndarray:
        return 0.5 * (self.b2 + self.ep)

    @property
    def e(self) -> np.ndarray:
        return self.e_minus + self.e_plus


def densities(state: FieldState, spec: PotentialSpec, qm: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> Densities:
    g = state.grid
    q, m = qm if qm is not None else potential_on_grid(spec, g)
    wx = _dx_full(g, state.w)
    wt = _full(g, state.w_t)
    w2 = _full(g, state.w * state.w)
    ep = np.zeros_like(w2)
    ep[1:-1] = q * w2[1:-1]
    M = np.zeros_like(w2)
    M[1:-1] = m * w2[1:-1]
    return Densities(g.x_full, (wx + wt) ** 2, (wx - wt) ** 2, ep, M)


def segment_integral(x: np.ndarray, f: np.ndarray, a: float, b: float) -> float:
    """Exact integral over [a, b] of the piecewise-linear interpolant of (x, f)."""
    if b <= a:
        return 0.0
    i0 = int(np.searchsorted(x, a, side="right"))
    i1 = int(np.searchsorted(x, b, side="left"))
    fa = float(np.interp(a, x, f))
    fb = float(np.interp(b, x, f))
    if i0 >= i1:
        return 0.5 * (fa + fb) * (b - a)
    xs = np.concatenate(([a], x[i0:i1], [b]))
    fs = np.concatenate(([fa], f[i0:i1], [fb]))
    return float(trapezoid(fs, xs))


def energy_functional(grid: GridSpec, spec: PotentialSpec, w: np.ndarray, w_t: np.ndarray) -> float:
    """
    Discrete E = sum (D+ w)^2 dx + sum w_t^2 dx + sum q w^2 dx, the quantity
    the leapfrog scheme conserves up to O(dt^2).  It is also the squared
    energy norm used for Cauchy differences.
    """
    w = np.asarray(w, dtype=float)
    w_t = np.asarray(w_t, dtype=float)
    h = grid.dx
    d = np.diff(_full(grid, w)) / h
    q = spec.q(grid.x)
    return float(h * (np.dot(d, d) + np.dot(w_t, w_t) + np.dot(q * w, w)))


def energy_decomposition(state: FieldState, spec: PotentialSpec) -> EnergyReport:
    """Trapezoid quadrature of e, e_-, e_+ and e' with centred w_x."""
    d = densities(state, spec)
    x = d.x
    em = float(trapezoid(d.e_minus, x))
    ep = float(trapezoid(d.e_plus, x))
    return EnergyReport(state.time, em + ep, em, ep, float(trapezoid(d.ep, x)))


# ---------------------------------------------------------------------------
# flux regions and run history
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    """[x1, x2] x [t1, t2]."""

    x1: float
    x2: float
    t1: float
    t2: float

    def __post_init__(self):
        if self.x2 < self.x1 or self.t2 < self.t1 or self.x1 < 0:
            raise ValueError("rectangle needs 0 <= x1 <= x2 and t1 <= t2")

    @property
    def t_span(self):
        return self.t1, self.t2


@dataclass(frozen=True)
class Triangle:
    """Backward light-cone triangle {x + t <= s, t >= t0, x >= 0}."""

    s: float
    t0: float

    def __post_init__(self):
        if self.s < self.t0:
            raise ValueError("triangle needs s >= t0")

    @property
    def t_span(self):
        return self.t0, self.s


Region = Union[Rectangle, Triangle]


@dataclass
class _RegionRecord:
    region: Region
    t: List[float] = field(default_factory=list)
    left_in: List[float] = field(default_factory=list)    # rectangle: 1/2(a^2 - e') at x1; triangle: 1/2 w_x(0)^2
    right_in: List[float] = field(default_factory=list)   # rectangle: 1/2(a^2 - e') at x2; triangle: e'(s - t)
    left_out: List[float] = field(default_factory=list)   # rectangle: 1/2(b^2 - e') at x1
    right_out: List[float] = field(default_factory=list)  # rectangle: 1/2(b^2 - e') at x2; triangle: b^2(s - t)
    area: List[float] = field(default_factory=list)
    start: Optional[Tuple[float, float]] = None           # (E_-, E_+) over the base at the first time
    end: Optional[Tuple[float, float]] = None             # rectangle only

    def complete(self) -> bool:
        t_lo, t_hi = self.region.t_span
        return self.start is not None and bool(self.t) and abs(self.t[-1] - t_hi) <= 1e-9 * max(1.0, t_hi) \
            and (isinstance(self.region, Triangle) or self.end is not None)


@dataclass
class History:
    """Boundary trace, Morawetz rate and flux-region traces of one run."""

    t: List[float] = field(default_factory=list)
    boundary_dx: List[float] = field(default_factory=list)
    morawetz_rate: List[float] = field(default_factory=list)
    reports: List[EnergyReport] = field(default_factory=list)
    snapshots: Dict[float, FieldState] = field(default_factory=dict)
    regions: List[_RegionRecord] = field(default_factory=list)
    E0: Optional[float] = None
    E_minus0: Optional[float] = None

    def register(self, region: Region) -> None:
        self.regions.append(_RegionRecord(region))

    def record(self, state: FieldState, spec: PotentialSpec, qm) -> None:
        t = state.time
        g = state.grid
        w = state.w
        active = [rec for rec in self.regions if _in_span(t, rec.region.t_span)]
        if self.E0 is None or active:
            d = densities(state, spec, qm)
            if self.E0 is None:
                self.E0 = float(trapezoid(d.e, d.x))
                self.E_minus0 = float(trapezoid(d.e_minus, d.x))
            for rec in active:
                _record_region(rec, d, t, g)
        self.t.append(t)
        self.boundary_dx.append(boundary_derivative(g, w))
        # trapezoid on the full grid; M vanishes at both ends
        self.morawetz_rate.append(float(np.dot(qm[1], w * w)) * g.dx)

    # accumulated integrals -------------------------------------------------
    def boundary_flux_accum(self) -> float:
        """1/2 int |w_x(0,t)|^2 dt over the recorded span."""
        if len(self.t) < 2:
            return 0.0
        return 0.5 * float(trapezoid(np.square(self.boundary_dx), self.t))

    def morawetz_accum(self) -> float:
        """int int M dx dt over the recorded span."""
        if len(self.t) < 2:
            return 0.0
        return float(trapezoid(self.morawetz_rate, self.t))

    def to_json(self, path) -> None:
        out = {
            "t_start": fmt(self.t[0]) if self.t else None,
            "t_end": fmt(self.t[-1]) if self.t else None,
            "steps": len(self.t),
            "E0": fmt(self.E0) if self.E0 is not None else None,
            "E_minus0": fmt(self.E_minus0) if self.E_minus0 is not None else None,
            "boundary_flux_accum": fmt(self.boundary_flux_accum()),
            "morawetz_accum": fmt(self.morawetz_accum()),
            "reports": [{k: fmt(v) for k, v in r.__dict__.items()} for r in self.reports],
        }
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _in_span(t: float, span) -> bool:
    lo, hi = span
    tol = 1e-9 * max(1.0, abs(hi))
    return lo - tol <= t <= hi + tol


def _record_region(rec: _RegionRecord, d: Densities, t: float, grid: GridSpec) -> None:
    r = rec.region
    if not _in_span(t, r.t_span):
        return
    x = d.x
    if isinstance(r, Rectangle):
        if r.x2 > grid.L:
            return
        qin = 0.5 * (d.a2 - d.ep)
        qout = 0.5 * (d.b2 - d.ep)
        rec.t.append(t)
        rec.left_in.append(float(np.interp(r.x1, x, qin)))
        rec.right_in.append(float(np.interp(r.x2, x, qin)))
        rec.left_out.append(float(np.interp(r.x1, x, qout)))
        rec.right_out.append(float(np.interp(r.x2, x, qout)))
        rec.area.append(segment_integral(x, d.M, r.x1, r.x2))
        base = (segment_integral(x, d.e_minus, r.x1, r.x2), segment_integral(x, d.e_plus, r.x1, r.x2))
        if rec.start is None:
            rec.start = base
        if abs(t - r.t2) <= 1e-9 * max(1.0, r.t2):
            rec.end = base
    else:
        xs = r.s - t
        if r.s - r.t0 > grid.L:
            return
        xs = min(max(xs, 0.0), grid.L)
        rec.t.append(t)
        rec.left_in.append(0.5 * float(d.a2[0]))
        rec.right_in.append(float(np.interp(xs, x, d.ep)))
        rec.right_out.append(float(np.interp(xs, x, d.b2)))
        rec.area.append(segment_integral(x, d.M, 0.0, xs))
        if rec.start is None:
            base = r.s - r.t0
            rec.start = (segment_integral(x, d.e_minus, 0.0, base), segment_integral(x, d.e_plus, 0.0, base))


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def _acceleration(w: np.ndarray, q: np.ndarray, h: float, out: np.ndarray) -> np.ndarray:
    out[1:-1] = w[2:] + w[:-2] - 2 * w[1:-1]
    out[0] = w[1] - 2 * w[0]
    out[-1] = w[-2] - 2 * w[-1]
    out /= h * h
    out -= q * w
    return out


def _check_dt(spec: PotentialSpec, grid: GridSpec, dt: float, q: np.ndarray) -> None:
    if dt > _MAX_CFL * grid.dx * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.4g} exceeds {_MAX_CFL}*dx={_MAX_CFL * grid.dx:.4g}")
    qmax = float(np.max(q)) if q.size else 0.0
    if qmax * dt * dt >= _STIFF_GUARD:
        raise CFLViolation(f"q_max*dt^2 = {qmax * dt * dt:.3g} >= {_STIFF_GUARD}; refine the grid")


def step(state: FieldState, dt: float, spec: PotentialSpec) -> FieldState:
    """One kick-drift-kick step of size dt."""
    g = state.grid
    q, _ = potential_on_grid(spec, g)
    _check_dt(spec, g, dt, q)
    acc = np.empty(g.N)
    v = state.w_t + 0.5 * dt * _acceleration(state.w, q, g.dx, acc)
    w = state.w + dt * v
    v = v + 0.5 * dt * _acceleration(w, q, g.dx, acc)
    return FieldState(g, w, v, state.time + dt)


def evolve_to(state: FieldState, T: float, spec: PotentialSpec, cfl: float = 0.5,
              history: Optional[History] = None, regions: Sequence[Region] = (),
              snapshot_times: Sequence[float] = (), report_times: Sequence[float] = (),
              blowup_factor: float = 10.0) -> FieldState:
    """
    Advance `state` to time T with steps no longer than cfl*dx.  Every
    region, snapshot and report time is hit exactly.  When `history` is
    given it receives the boundary trace, Morawetz rate and region traces
    at every step.
    """
    if not 0 < cfl <= _MAX_CFL:
        raise CFLViolation(f"cfl={cfl} must lie in (0, {_MAX_CFL}]")
    t0 = state.time
    if T < t0:
        raise ValueError("evolve_to only runs forward; reverse w_t for backward runs")
    g = state.grid
    qm = potential_on_grid(spec, g)
    q = qm[0]
    h = g.dx
    dt_max = cfl * h
    _check_dt(spec, g, dt_max, q)
    for r in regions:
        if history is None:
            history = History()
        history.register(r)

    events = {T}
    for r in regions:
        events.update(r.t_span)
    events.update(snapshot_times)
    events.update(report_times)
    events = sorted(e for e in events if t0 < e <= T)
    snaps = set(snapshot_times)
    reps = set(report_times)

    w = state.w.copy()
    v = state.w_t.copy()
    acc = np.empty(g.N)
    _acceleration(w, q, h, acc)
    E0 = energy_functional(g, spec, w, v)
    t = t0

    def current(copy=True):
        return FieldState(g, w.copy() if copy else w, v.copy() if copy else v, t)

    if history is not None:
        history.record(current(), spec, qm)
    if t0 in snaps and history is not None:
        history.snapshots[t0] = current()
    if t0 in reps and history is not None:
        history.reports.append(_report(current(), spec, history))

    n_done = 0
    for ev in events:
        n = max(1, int(math.ceil((ev - t) / dt_max - 1e-9)))
        dt = (ev - t) / n
        t_start = t
        for i in range(1, n + 1):
            v += 0.5 * dt * acc
            w += dt * v
            _acceleration(w, q, h, acc)
            v += 0.5 * dt * acc
            t = ev if i == n else t_start + i * dt
            n_done += 1
            if history is not None:
                history.record(current(copy=False), spec, qm)
            if n_done % 200 == 0:
                E = energy_functional(g, spec, w, v)
                if not np.isfinite(E) or E > blowup_factor * max(E0, 1e-300):
                    raise Blowup(f"energy grew from {E0:.4g} to {E:.4g} at t={t:.4g}")
        if history is not None:
            if ev in snaps:
                history.snapshots[ev] = current()
            if ev in reps:
                history.reports.append(_report(current(), spec, history))
    E = energy_functional(g, spec, w, v)
    if not np.isfinite(E) or E > blowup_factor * max(E0, 1e-300):
        raise Blowup(f"energy grew from {E0:.4g} to {E:.4g}")
    return FieldState(g, w, v, t)


def _report(state: FieldState, spec: PotentialSpec, history: History) -> EnergyReport:
    r = energy_decomposition(state, spec)
    return EnergyReport(r.time, r.E_total, r.E_minus, r.E_plus, r.potential_part,
                        history.boundary_flux_accum(), history.morawetz_accum())


# ---------------------------------------------------------------------------
# flux identities and Morawetz accounting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluxResult:
    inward: float
    outward: float
    energy: float

    @property
    def residual(self) -> float:
        """max(|inward defect|, |outward defect|) / E."""
        if self.energy == 0:
            return 0.0
        return max(abs(self.inward), abs(self.outward)) / self.energy


def flux_check(history: History, region: Region) -> FluxResult:
    """
    Evaluate both sides of the inward and outward flux identities on a
    recorded region.  Returns the signed defects (LHS - RHS) and the
    energy used for normalisation.
    """
    rec = next((r for r in history.regions if r.region == region), None)
    if rec is None or not rec.complete():
        raise RegionOutsideHistory(f"{region} was not recorded over its full time span")
    E = history.E0 or 0.0
    t = np.asarray(rec.t)

    def integ(vals):
        return float(trapezoid(vals, t)) if t.size > 1 else 0.0

    area = integ(rec.area)
    if isinstance(region, Rectangle):
        em1, ep1 = rec.start
        em2, ep2 = rec.end
        inward = em1 + integ(rec.right_in) - em2 - integ(rec.left_in) - area
        outward = ep1 - integ(rec.right_out) - ep2 + integ(rec.left_out) + area
    else:
        em, ep = rec.start
        bnd = integ(rec.left_in)
        inward = em - integ(rec.right_in) - bnd - area
        outward = ep - integ(rec.right_out) + bnd + area
    return FluxResult(inward, outward, E)


@dataclass(frozen=True)
class MorawetzReport:
    boundary_flux_accum: float     # 1/2 int |w_x(0,t)|^2 dt
    morawetz_accum: float          # int int M
    accumulated: float             # int |w_x(0,t)|^2 dt + int int (-q') |w|^2
    bound: float                   # 2 E
    representation_defect: float   # |boundary + area - E_-(t0)| / E
    E_minus_final: float
    converged: bool                # E_-(T) < 0.05 E

    @property
    def within_bound(self) -> bool:
        return self.accumulated <= self.bound


def morawetz_scan(history: History, final: FieldState, spec: PotentialSpec) -> MorawetzReport:
    """Accumulated Morawetz integrals of a run that started at history.t[0]."""
    E = history.E0 or 0.0
    bf = history.boundary_flux_accum()
    ma = history.morawetz_accum()
    em_final = energy_decomposition(final, spec).E_minus
    defect = abs(bf + ma - (history.E_minus0 or 0.0)) / E if E > 0 else 0.0
    return MorawetzReport(bf, ma, 2 * bf + 2 * ma, 2 * E, defect, em_final, em_final < 0.05 * E if E > 0 else True)


# ---------------------------------------------------------------------------
# shell and far-field diagnostics
# ---------------------------------------------------------------------------

def shell_energy(state: FieldState, spec: PotentialSpec, a: float, b: float) -> float:
    """int_a^b e(x,t) dx."""
    if not 0 <= a <= b:
        raise ValueError("shell needs 0 <= a <= b")
    d = densities(state, spec)
    return segment_integral(d.x, d.e, a, min(b, state.grid.L))


def cumulative_energy(state: FieldState, spec: PotentialSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes x and F(x) = int_0^x e."""
    d = densities(state, spec)
    h = state.grid.dx
    F = np.concatenate(([0.0], np.cumsum(0.5 * h * (d.e[1:] + d.e[:-1]))))
    return d.x, F


def sliding_max(state: FieldState, spec: PotentialSpec, ell: float) -> float:
    """sup_r int_r^{r+ell} e dx, with r on the grid nodes."""
    if ell <= 0:
        return 0.0
    x, F = cumulative_energy(state, spec)
    hi = np.interp(np.minimum(x + ell, x[-1]), x, F)
    return float(np.max(hi - F))


def asymptotic_diagnostics(state: FieldState, spec: PotentialSpec, fractions: Sequence[float] = (0.5, 0.9)) -> dict:
    """Quantities whose long-time limits vanish: int q w^2, int w^2/x^2,
    sup w^2/x, and E_-([0, c t]) for each c in `fractions`."""
    g = state.grid
    x = g.x
    w2 = state.w * state.w
    d = densities(state, spec)
    out = {
        "potential_part": float(trapezoid(d.ep, d.x)),
        "hardy": float(np.sum(w2 / x ** 2) * g.dx),
        "sup_w2_over_x": float(np.max(w2 / x)) if x.size else 0.0,
    }
    t = abs(state.time)
    for c in fractions:
        out[f"E_minus_inner_{c:g}"] = segment_integral(d.x, d.e_minus, 0.0, min(c * t, g.L))
    return out


# ---------------------------------------------------------------------------
# data helpers and output
# ---------------------------------------------------------------------------

def smooth_bump(x: np.ndarray, center: float, width: float) -> np.ndarray:
    """C-infinity bump exp(-1/(1-s^2)) with s = (x - center)/width, zero for |s| >= 1."""
    s = (np.asarray(x, dtype=float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_bump_dx(x: np.ndarray, center: float, width: float) -> np.ndarray:
    s = (np.asarray(x, dtype=float) - center) / width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    si = s[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si ** 2)) * (-2 * si / (1 - si ** 2) ** 2) / width
    return out


def travelling_bump(grid: GridSpec, center: float, width: float, direction: int) -> FieldState:
    """w0 = bump, w1 = -direction * w0' (direction +1 moves right, -1 moves left)."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    w0 = smooth_bump(grid.x, center, width)
    w1 = -direction * smooth_bump_dx(grid.x, center, width)
    return FieldState(grid, w0, w1, 0.0)


def smooth_step(s) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    a = np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    b = np.where(s < 1, np.exp(-1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    return a / (a + b)


def band_profile(k, band, taper: float = 0.2, power: float = 0.0) -> np.ndarray:
    """
    Flat-top C-infinity profile on `band` with tapers of relative width
    `taper` at both edges, times k**-power.
    """
    a, b = band
    k = np.asarray(k, dtype=float)
    s = (k - a) / (b - a)
    return smooth_step(s / taper) * smooth_step((1.0 - s) / taper) * k ** (-power)


def incoming_band_packet(grid: GridSpec, band, x0: float, taper: float = 0.2,
                         power: float = 0.0, nk: int = 2001) -> FieldState:
    """
    Incoming packet w = G(x + t - x0) minus its odd image, with
    G(y) = int f(k) cos(k y) dk and f = band_profile(k, band, taper, power).
    The odd image makes w vanish at x = 0.
    """
    k = np.linspace(band[0], band[1], nk)
    wk = np.full(nk, k[1] - k[0])
    wk[[0, -1]] *= 0.5
    amp = band_profile(k, band, taper, power) * wk
    x = grid.x
    w0 = np.empty_like(x)
    w1 = np.empty_like(x)
    for s in range(0, x.size, 2048):
        xs = x[s:s + 2048]
        yp = np.outer(xs - x0, k)
        ym = np.outer(-xs - x0, k)
        w0[s:s + 2048] = (np.cos(yp) - np.cos(ym)) @ amp
        w1[s:s + 2048] = (-np.sin(yp) + np.sin(ym)) @ (amp * k)
    return FieldState(grid, w0, w1, 0.0)


def write_snapshot(path, state: FieldState, spec: PotentialSpec) -> None:
    """CSV with columns x, w, w_t, e, e_minus, e_plus on the interior nodes."""
    d = densities(state, spec)
    with open(path, "w") as fh:
        fh.write("x,w,w_t,e,e_minus,e_plus\n")
        for i in range(state.grid.N):
            j = i + 1
            fh.write(",".join(fmt(v) for v in (d.x[j], state.w[i], state.w_t[i], d.e[j], d.e_minus[j], d.e_plus[j])))
            fh.write("\n")
