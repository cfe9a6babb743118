"""
Repulsive potentials on the half line.

A potential q is repulsive when q > 0, q' < 0 and q -> 0 at infinity.  Three
classes are distinguished:

* TypeI   : q is C^1 up to x = 0 and decays like x**-beta.
* TypeII  : q may blow up at 0 like x**-kappa with kappa in (0, 2) and
            decays with beta > 1/3.
* TypeIII : q = mu * x**-2 + q0 with mu >= 3/4 and q0 of TypeII.

The moments Q_j(t) = int_{lower}^{t} q(s)**j ds feed every phase-shift
formula downstream, so they get their own cached evaluator.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from .errors import (
    ClassificationError,
    DecayMismatch,
    DivergentTail,
    DomainError,
    NotRepulsive,
)


class Kind(str, Enum):
    INVERSE_POWER = "inverse_power"
    SHIFTED_INVERSE_POWER = "shifted_inverse_power"
    SMOOTHED_INVERSE_POWER = "smoothed_inverse_power"
    INVERSE_SQUARE_PLUS = "inverse_square_plus"
    TRUNCATED_LINEARIZATION = "truncated_linearization"
    TABULATED = "tabulated"
    ZERO = "zero"


class PotentialClass(str, Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """
    Immutable description of a potential q(x).

    Use the constructors (`inverse_power`, `shifted_inverse_power`, ...)
    rather than filling the fields by hand.  Only the fields relevant to
    `kind` are meaningful.
    """

    kind: Kind
    beta: float = math.inf
    shift: float = 0.0
    delta: float = 0.0
    mu: float = 0.0
    inner: Optional["PotentialSpec"] = None
    base: Optional["PotentialSpec"] = None
    splice: float = 1.0
    x_table: Optional[np.ndarray] = field(default=None, repr=False)
    q_table: Optional[np.ndarray] = field(default=None, repr=False)
    _interp: Optional[PchipInterpolator] = field(default=None, repr=False)

    # ---- constructors -------------------------------------------------
    @classmethod
    def zero(cls) -> "PotentialSpec":
        return cls(Kind.ZERO)

    @classmethod
    def inverse_power(cls, beta: float) -> "PotentialSpec":
        """q(x) = x**-beta."""
        if beta <= 0:
            raise ValueError("beta must be positive")
        return cls(Kind.INVERSE_POWER, beta=float(beta))

    @classmethod
    def shifted_inverse_power(cls, beta: float, x0: float = 1.0) -> "PotentialSpec":
        """q(x) = (x0 + x)**-beta."""
        if beta <= 0 or x0 <= 0:
            raise ValueError("beta and x0 must be positive")
        return cls(Kind.SHIFTED_INVERSE_POWER, beta=float(beta), shift=float(x0))

    @classmethod
    def smoothed_inverse_power(cls, beta: float, delta: float = 0.1) -> "PotentialSpec":
        """q(x) = (x**2 + delta**2)**(-beta/2), a regularised x**-beta."""
        if beta <= 0 or delta <= 0:
            raise ValueError("beta and delta must be positive")
        return cls(Kind.SMOOTHED_INVERSE_POWER, beta=float(beta), delta=float(delta))

    @classmethod
    def inverse_square_plus(cls, mu: float, inner: "PotentialSpec") -> "PotentialSpec":
        """q(x) = mu * x**-2 + inner(x)."""
        return cls(Kind.INVERSE_SQUARE_PLUS, beta=min(2.0, inner.beta),
                   mu=float(mu), inner=inner)

    @classmethod
    def truncated_linearization(cls, base: "PotentialSpec", splice: float = 1.0) -> "PotentialSpec":
        """Equal to base for x >= splice, tangent line of base below it."""
        return cls(Kind.TRUNCATED_LINEARIZATION, beta=base.beta, base=base,
                   splice=float(splice))

    @classmethod
    def tabulated(cls, x, q, beta: Optional[float] = None) -> "PotentialSpec":
        """
        Samples of q on an increasing grid.

        Interpolation is monotone cubic (PCHIP) so q' keeps its sign between
        samples.  Past the last sample a power law matched in value and slope
        is used, with exponent `beta` defaulting to the local log-slope.
        """
        x = np.asarray(x, dtype=float)
        q = np.asarray(q, dtype=float)
        if x.ndim != 1 or x.shape != q.shape or x.size < 4:
            raise ValueError("need at least 4 matching samples")
        if np.any(np.diff(x) <= 0) or x[0] < 0:
            raise ValueError("sample grid must be increasing and start at x >= 0")
        interp = PchipInterpolator(x, q, extrapolate=False)
        slope = float(interp.derivative()(x[-1]))
        local = -x[-1] * slope / q[-1] if q[-1] > 0 else math.inf
        b = float(beta) if beta is not None else local
        return cls(Kind.TABULATED, beta=b, x_table=x, q_table=q, _interp=interp)

    # ---- structural properties ----------------------------------------
    @property
    def singular(self) -> bool:
        """True when q is unbounded at x = 0."""
        if self.kind in (Kind.INVERSE_POWER, Kind.INVERSE_SQUARE_PLUS):
            return True
        if self.kind is Kind.TABULATED:
            return bool(self.x_table[0] > 0)
        return False

    @property
    def kappa(self) -> Optional[float]:
        """Growth exponent at zero, recorded for class validation only."""
        if self.kind is Kind.INVERSE_POWER:
            return self.beta
        if self.kind is Kind.INVERSE_SQUARE_PLUS:
            return self.inner.kappa
        if self.kind is Kind.TABULATED and self.singular:
            x0 = self.x_table[0]
            return float(-x0 * self._interp.derivative()(x0) / self.q_table[0])
        return None

    # ---- evaluation ---------------------------------------------------
    def _check_domain(self, x: np.ndarray) -> None:
        if self.kind is Kind.ZERO:
            return
        if self.singular:
            lo = self.x_table[0] if self.kind is Kind.TABULATED else 0.0
            if np.any(x <= lo) and self.kind is not Kind.TABULATED:
                raise DomainError(f"{self.kind.value} is singular at x=0; got x <= 0")
            if self.kind is Kind.TABULATED and np.any(x < lo):
                raise DomainError(f"tabulated potential starts at x={lo}")
        elif np.any(x < 0):
            raise DomainError("potential defined on x >= 0 only")

    def q(self, x):
        x_arr = np.asarray(x, dtype=float)
        self._check_domain(x_arr)
        out = self._q(x_arr)
        return float(out) if np.ndim(x) == 0 else out

    def dq(self, x):
        x_arr = np.asarray(x, dtype=float)
        self._check_domain(x_arr)
        out = self._dq(x_arr)
        return float(out) if np.ndim(x) == 0 else out

    def _q(self, x: np.ndarray) -> np.ndarray:
        k = self.kind
        if k is Kind.ZERO:
            return np.zeros_like(x)
        if k is Kind.INVERSE_POWER:
            return x ** (-self.beta)
        if k is Kind.SHIFTED_INVERSE_POWER:
            return (self.shift + x) ** (-self.beta)
        if k is Kind.SMOOTHED_INVERSE_POWER:
            return (x * x + self.delta ** 2) ** (-0.5 * self.beta)
        if k is Kind.INVERSE_SQUARE_PLUS:
            return self.mu / (x * x) + self.inner._q(x)
        if k is Kind.TRUNCATED_LINEARIZATION:
            s = self.splice
            qs = self.base._q(np.asarray(s))
            dqs = self.base._dq(np.asarray(s))
            far = np.maximum(x, s)
            return np.where(x >= s, self.base._q(far), qs + (x - s) * dqs)
        if k is Kind.TABULATED:
            return self._tab(x, deriv=False)
        raise AssertionError(k)

    def _dq(self, x: np.ndarray) -> np.ndarray:
        k = self.kind
        b = self.beta
        if k is Kind.ZERO:
            return np.zeros_like(x)
        if k is Kind.INVERSE_POWER:
            return -b * x ** (-b - 1.0)
        if k is Kind.SHIFTED_INVERSE_POWER:
            return -b * (self.shift + x) ** (-b - 1.0)
        if k is Kind.SMOOTHED_INVERSE_POWER:
            return -b * x * (x * x + self.delta ** 2) ** (-0.5 * b - 1.0)
        if k is Kind.INVERSE_SQUARE_PLUS:
            return -2.0 * self.mu / x ** 3 + self.inner._dq(x)
        if k is Kind.TRUNCATED_LINEARIZATION:
            s = self.splice
            dqs = self.base._dq(np.asarray(s))
            far = np.maximum(x, s)
            return np.where(x >= s, self.base._dq(far), dqs + 0.0 * x)
        if k is Kind.TABULATED:
            return self._tab(x, deriv=True)
        raise AssertionError(k)

    def _tab(self, x: np.ndarray, deriv: bool) -> np.ndarray:
        xe, qe = self.x_table[-1], self.q_table[-1]
        inside = x < xe
        xin = np.where(inside, x, xe)
        f = self._interp.derivative() if deriv else self._interp
        vin = f(xin)
        xout = np.where(inside, xe, x)
        tail = qe * (xout / xe) ** (-self.beta)
        if deriv:
            tail = -self.beta * tail / xout
        return np.where(inside, vin, tail)


@dataclass(frozen=True)
class Classification:
    cls: PotentialClass
    beta: float
    kappa: Optional[float] = None
    mu: Optional[float] = None


def eval_q(spec: PotentialSpec, x):
    return spec.q(x)


def eval_qprime(spec: PotentialSpec, x):
    return spec.dq(x)


def fitted_decay_rate(spec: PotentialSpec, lo: float = 1e2, hi: float = 1e4) -> float:
    """Least-squares log-log slope of q over [lo, hi], sign flipped."""
    x = np.geomspace(lo, hi, 64)
    slope = np.polyfit(np.log(x), np.log(spec.q(x)), 1)[0]
    return float(-slope)


def classify(spec: PotentialSpec, decay_tol: float = 0.1) -> Classification:
    """
    Validate a potential by sampling and return its class.

    Raises NotRepulsive if some sample has q <= 0 or q' >= 0 and
    DecayMismatch if the fitted decay rate is more than `decay_tol` away
    from the declared one.
    """
    if spec.kind is Kind.ZERO:
        return Classification(PotentialClass.TYPE_I, math.inf)

    lo = 1e-3
    if spec.kind is Kind.TABULATED:
        lo = max(lo, float(spec.x_table[0]))
    x = np.geomspace(lo, 1e4, 400)
    if not spec.singular:
        x = np.concatenate(([0.0], x))
    qv, dqv = spec.q(x), spec.dq(x)
    bad = np.flatnonzero((qv <= 0) | (dqv >= 0) | ~np.isfinite(qv))
    if bad.size:
        raise NotRepulsive(f"repulsivity fails at x={x[bad[0]]:.6g}")

    fit = fitted_decay_rate(spec)
    if abs(fit - spec.beta) > decay_tol:
        raise DecayMismatch(f"declared beta={spec.beta:.4g}, fitted {fit:.4g}")

    if spec.kind is Kind.INVERSE_SQUARE_PLUS:
        if spec.mu < 0.75:
            raise ClassificationError("inverse-square coefficient must be >= 3/4")
        inner = classify(spec.inner, decay_tol)
        if inner.cls is PotentialClass.TYPE_III or inner.beta <= 1.0 / 3.0:
            raise ClassificationError("inner part must be TypeII with beta > 1/3")
        return Classification(PotentialClass.TYPE_III, spec.beta, inner.kappa, spec.mu)

    if spec.singular:
        kappa = spec.kappa
        if kappa is None or not 0.0 < kappa < 2.0:
            raise ClassificationError("growth exponent at zero must lie in (0, 2)")
        if spec.beta <= 1.0 / 3.0:
            raise ClassificationError("singular potentials need beta > 1/3")
        return Classification(PotentialClass.TYPE_II, spec.beta, kappa)

    return Classification(PotentialClass.TYPE_I, spec.beta)


def truncate_to_type1(spec: PotentialSpec, splice: float = 1.0) -> PotentialSpec:
    """
    Replace q on [0, splice] by its tangent line at `splice`.

    TypeI input is returned unchanged.  For TypeIII the inverse-square part
    is dropped first.
    """
    if not spec.singular:
        return spec
    base = spec.inner if spec.kind is Kind.INVERSE_SQUARE_PLUS else spec
    return PotentialSpec.truncated_linearization(base, splice)


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

_TAIL_FLOOR = 1e-14


class MomentCache:
    """
    Q_j(t) = int_{lower}^{t} q**j with adaptive Gauss-Kronrod panels.

    Panel integrals over a doubling breakpoint grid are computed once per j
    and kept, so repeated calls only integrate the last partial panel.
    """

    def __init__(self, potential: PotentialSpec, lower_limit: float = 1.0,
                 rtol: float = 1e-10):
        if lower_limit < 0:
            raise ValueError("lower limit must be >= 0")
        self.potential = potential
        self.lower_limit = float(lower_limit)
        self.rtol = rtol
        self._breaks = self.lower_limit + np.concatenate(([0.0], 2.0 ** np.arange(-6, 41)))
        self._cum: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _integrate(self, j: int, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        f = lambda s: self.potential.q(s) ** j  # noqa: E731
        val, _ = quad(f, a, b, epsabs=0.0, epsrel=self.rtol, limit=400)
        return val

    def _check_origin(self, j: int) -> None:
        p = self.potential
        if self.lower_limit == 0 and p.singular:
            kappa = 2.0 if p.kind is Kind.INVERSE_SQUARE_PLUS else (p.kappa or 0.0)
            if j * kappa >= 1.0:
                raise DomainError(f"q**{j} is not integrable at 0")

    def _cumulative(self, j: int) -> np.ndarray:
        with self._lock:
            if j not in self._cum:
                self._check_origin(j)
                b = self._breaks
                parts = [self._integrate(j, b[i], b[i + 1]) for i in range(b.size - 1)]
                self._cum[j] = np.concatenate(([0.0], np.cumsum(parts)))
            return self._cum[j]

    def moment(self, j: int, t):
        """Q_j(t); `t` may be a scalar or an array."""
        if j < 1:
            raise ValueError("moment index must be >= 1")
        if self.potential.kind is Kind.ZERO:
            return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < self.lower_limit):
            raise ValueError("t must be >= the lower limit")
        cum = self._cumulative(j)
        b = self._breaks
        if np.any(t_arr > b[-1]):
            raise ValueError("t beyond the tabulated range")
        idx = np.searchsorted(b, t_arr, side="right") - 1
        out = np.array([cum[i] + self._integrate(j, b[i], tv) for i, tv in zip(idx, t_arr)])
        return float(out[0]) if np.ndim(t) == 0 else out.reshape(np.shape(t))

    def tail(self, j: int) -> float:
        """int_{lower}^{inf} q**j, with a power-law correction past the cutoff."""
        p = self.potential
        if p.kind is Kind.ZERO:
            return 0.0
        if j * p.beta <= 1.0:
            raise DivergentTail(f"q**{j} is not integrable at infinity (beta={p.beta})")
        cum = self._cumulative(j)
        b = self._breaks
        qb = p.q(b[1:]) ** j
        hit = np.flatnonzero(qb < _TAIL_FLOOR)
        i = int(hit[0]) + 1 if hit.size else b.size - 1
        X = b[i]
        qX, dqX = p.q(X), p.dq(X)
        local = -X * dqX / qX
        return float(cum[i] + qX ** j * X / (j * local - 1.0))

    def tail_from(self, j: int, x: float) -> float:
        """int_{x}^{inf} q**j for x >= lower limit."""
        return self.tail(j) - self.moment(j, x)


def moment(cache: MomentCache, j: int, t):
    return cache.moment(j, t)


def moment_tail3(cache: MomentCache) -> float:
    return cache.tail(3)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def load_table_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column (x, q) CSV; a non-numeric header row is skipped."""
    xs, qs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                xv, qv = float(row[0]), float(row[1])
            except ValueError:
                continue
            xs.append(xv)
            qs.append(qv)
    return np.array(xs), np.array(qs)


def spec_from_mapping(m: dict) -> PotentialSpec:
    """
    Build a potential from a config table such as
    ``{kind = "inverse_power", beta = 0.6, shift = 1.0}``.
    """
    kind = str(m.get("kind", "")).lower()
    if kind == "zero":
        return PotentialSpec.zero()
    if kind in ("inverse_power", "shifted_inverse_power", "smoothed_inverse_power"):
        beta = float(m["beta"])
        if float(m.get("shift", 0.0)) > 0:
            return PotentialSpec.shifted_inverse_power(beta, float(m["shift"]))
        if float(m.get("delta", 0.0)) > 0:
            return PotentialSpec.smoothed_inverse_power(beta, float(m["delta"]))
        return PotentialSpec.inverse_power(beta)
    if kind == "inverse_square_plus":
        return PotentialSpec.inverse_square_plus(float(m["mu"]), spec_from_mapping(m["inner"]))
    if kind in ("truncated", "truncated_linearization"):
        return PotentialSpec.truncated_linearization(spec_from_mapping(m["base"]),
                                                     float(m.get("splice", 1.0)))
    if kind == "tabulated":
        x, q = load_table_csv(m["path"])
        beta = m.get("beta")
        return PotentialSpec.tabulated(x, q, None if beta is None else float(beta))
    raise KeyError(f"unknown potential kind {kind!r}")
