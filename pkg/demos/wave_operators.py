"""
Modified wave operators for q = (1+x)^-beta.

For each variant of the phase shift P(k,t) the script prints
||U(t)^-1 S_q(t) d - W d|| / ||d|| on a dyadic time list.  With beta = 0.6
the full three-term phase and the one-term phase (beta > 1/2) are
compared.  Without a phase the limit operator needs q to be integrable, so
that column is reported as undefined unless beta > 1.
"""
from __future__ import annotations

import sys
import warnings

import numpy as np

from artifact.errors import DivergentTail, VariantInadmissible
from artifact.modified_propagator import PhaseShiftVariant, waveop_residual
from artifact.potentials import PotentialSpec
from artifact.spectral import build_spectral_basis
from artifact.transforms import GridFunction, GridSpec

BAND = (0.5, 4.0)


def band_data(table, basis):
    k = table.k
    s = np.clip((k - k[0]) / (k[-1] - k[0]), 0.0, 1.0)
    bump = np.where((s > 0) & (s < 1), np.exp(-1.0 / np.maximum(s * (1 - s), 1e-300)), 0.0)
    g = basis.grid
    return (GridFunction(g, basis.inverse(bump).real),
            GridFunction(g, basis.inverse(k * bump * np.cos(3 * k)).real))


def main(beta: float = 0.6) -> None:
    spec = PotentialSpec.shifted_inverse_power(beta)
    grid = GridSpec.from_spacing(600.0, 0.1)
    table, basis = build_spectral_basis(spec, grid, BAND)
    data = band_data(table, basis)
    t_list = [25.0, 50.0, 100.0, 200.0, 400.0]
    print(f"q = (1+x)^-{beta}, band {BAND}, residual / ||d||")
    print(f"{'t':>6}" + "".join(f"{v.value:>12}" for v in PhaseShiftVariant))
    cols = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", VariantInadmissible)
        for v in PhaseShiftVariant:
            try:
                scan = waveop_residual(spec, v, data, t_list, basis=basis)
            except DivergentTail:
                cols.append(np.full(len(t_list), np.nan))
                continue
            cols.append(scan.residual / scan.data_norm)
    for i, t in enumerate(t_list):
        print(f"{t:6.0f}" + "".join(f"{c[i]:12.4e}" for c in cols))


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.6)
