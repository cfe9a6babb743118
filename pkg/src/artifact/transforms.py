"""
Half-line sine transforms on a uniform grid.

Continuum pair::

    F0 f(k)     = int_0^inf sin(k r) f(r) dr
    F0^-1 g(r)  = (2/pi) int_0^inf sin(k r) g(k) dk

Discretised on x_n = n*dx (n = 1..N, dx = L/(N+1)) and k_m = pi*m/L, where
both sums reduce to a type-I DST and the pair is exactly inverse.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.fft import dst

from .errors import GridMismatch


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [0, L] with N interior nodes and zero ends."""

    L: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if int(self.N) != self.N or self.N < 8:
            raise ValueError("N must be an integer >= 8")

    @classmethod
    def from_spacing(cls, L: float, dx: float) -> "GridSpec":
        """Grid whose spacing is as close to `dx` as possible with length L."""
        return cls(float(L), int(round(L / dx)) - 1)

    @cached_property
    def dx(self) -> float:
        return self.L / (self.N + 1)

    @cached_property
    def dk(self) -> float:
        return np.pi / self.L

    @cached_property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(1, self.N + 1)

    @cached_property
    def k(self) -> np.ndarray:
        return self.dk * np.arange(1, self.N + 1)

    @cached_property
    def x_full(self) -> np.ndarray:
        """Nodes including both boundary points."""
        return self.dx * np.arange(0, self.N + 2)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite samples")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def padded(self) -> np.ndarray:
        """Samples with the zero boundary values appended at both ends."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c) -> "GridFunction":
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectrumFunction:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def k(self) -> np.ndarray:
        return self.grid.k


def _same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatch(f"{a.grid} vs {b.grid}")


def _dst1(v: np.ndarray) -> np.ndarray:
    # scipy's DST-I carries a factor 2: y_m = 2 sum_n v_n sin(pi (m+1)(n+1)/(N+1))
    if np.iscomplexobj(v):
        return dst(v.real, type=1) + 1j * dst(v.imag, type=1)
    return dst(v, type=1)


def sine_forward(f: GridFunction) -> SpectrumFunction:
    """g(k_m) = sum_n sin(k_m x_n) f(x_n) dx."""
    return SpectrumFunction(f.grid, 0.5 * f.grid.dx * _dst1(f.values))


def sine_inverse(g: SpectrumFunction, real: bool = False) -> GridFunction:
    """f(x_n) = (2/pi) sum_m sin(k_m x_n) g(k_m) dk.  `real=True` drops Im."""
    v = _dst1(g.values) / g.grid.L
    return GridFunction(g.grid, v.real if real else v)


def band_mask(grid: GridSpec, band) -> np.ndarray:
    lo, hi = band
    if lo < 0 or not lo < hi:
        raise ValueError("band must satisfy 0 <= lo < hi")
    return (grid.k >= lo) & (grid.k <= hi)


def band_project(f: GridFunction, band) -> GridFunction:
    """Zero the sine spectrum outside `band`."""
    g = sine_forward(f)
    gv = np.where(band_mask(f.grid, band), g.values, 0.0)
    out = sine_inverse(SpectrumFunction(f.grid, gv))
    return GridFunction(f.grid, out.values if np.iscomplexobj(f.values) else out.values.real)


def spectral_energy(g0: SpectrumFunction, g1: SpectrumFunction) -> float:
    """(2/pi) sum_m [k_m^2 |g0|^2 + |g1|^2] dk, the squared energy norm."""
    _same_grid(g0, g1)
    k = g0.grid.k
    s = np.sum(k * k * np.abs(g0.values) ** 2 + np.abs(g1.values) ** 2)
    return float(2.0 / np.pi * s * g0.grid.dk)


def energy_norm(v0: GridFunction, v1: GridFunction) -> float:
    """Homogeneous H^1 x L^2 norm computed in sine-spectral space."""
    _same_grid(v0, v1)
    return float(np.sqrt(spectral_energy(sine_forward(v0), sine_forward(v1))))


def physical_energy_norm(v0: GridFunction, v1: GridFunction) -> float:
    """Same norm by finite differences: sum |D+ v0|^2 dx + sum |v1|^2 dx."""
    _same_grid(v0, v1)
    dx = v0.grid.dx
    d = np.diff(v0.padded()) / dx
    return float(np.sqrt(np.sum(np.abs(d) ** 2) * dx + np.sum(np.abs(v1.values) ** 2) * dx))


def l2_norm(f: GridFunction) -> float:
    return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * f.grid.dx))


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

def fmt(v: float) -> str:
    """17 significant digits so that re-runs are byte-identical."""
    return f"{float(v):.17g}"


def write_grid_function(path, f: GridFunction) -> None:
    cplx = np.iscomplexobj(f.values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "re", "im"] if cplx else ["x", "value"])
        for x, v in zip(f.grid.x, f.values):
            w.writerow([fmt(x), fmt(v.real), fmt(v.imag)] if cplx else [fmt(x), fmt(v)])


def write_spectrum(path, g: SpectrumFunction) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "re", "im"])
        for k, v in zip(g.grid.k, g.values):
            w.writerow([fmt(k), fmt(v.real), fmt(v.imag)])


def read_grid_function(path, grid: GridSpec) -> GridFunction:
    rows = _read_rows(path)
    if rows.shape[1] == 3:
        vals = rows[:, 1] + 1j * rows[:, 2]
    else:
        vals = rows[:, 1]
    if rows.shape[0] != grid.N or not np.allclose(rows[:, 0], grid.x, rtol=0, atol=1e-9 * grid.L):
        raise GridMismatch("file samples do not match the grid")
    return GridFunction(grid, vals)


def read_spectrum(path, grid: GridSpec) -> SpectrumFunction:
    rows = _read_rows(path)
    if rows.shape[0] != grid.N or not np.allclose(rows[:, 0], grid.k, rtol=1e-12, atol=0):
        raise GridMismatch("file samples do not match the grid")
    return SpectrumFunction(grid, rows[:, 1] + 1j * rows[:, 2])


def _read_rows(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(c) for c in r] for r in rows[1:] if r])
