"""
Radial spreading in three dimensions for q = |x|^-1/2 (smoothed at 0).

An incoming packet with frequencies in [0.4, 2] passes the origin and
leaves.  Each frequency k lags the light cone by about Q1(t)/(2k^2), and
Q1(t) = 2 t^(1/2) keeps growing, so the energy spreads over a shell whose
thickness grows with Q1.  The table lists the energy fractions inside,
within and beyond the shell, and the largest fraction found in any window
of width Q1/log Q1.
"""
from __future__ import annotations

from artifact.evolution import incoming_band_packet
from artifact.highdim import HarmonicSector, dispersion_shell_3d
from artifact.potentials import PotentialSpec
from artifact.transforms import GridSpec


def main() -> None:
    spec = PotentialSpec.smoothed_inverse_power(0.5, 0.1)
    grid = GridSpec.from_spacing(900.0, 0.05)
    data = incoming_band_packet(grid, (0.4, 2.0), 5.0, power=2.5)
    rows = dispersion_shell_3d(spec, HarmonicSector(3, 0), data, [100.0, 200.0, 400.0, 800.0], (0.05, 1.0))
    print(f"{'t':>6} {'Q1':>8} {'inside':>9} {'shell':>9} {'outside':>9} {'sliding sup':>12}")
    for r in rows:
        print(f"{r.t:6.0f} {r.Q1:8.3f} {r.inside:9.4f} {r.shell:9.4f} {r.outside:9.4f} {r.sliding_sup:12.4f}")


if __name__ == "__main__":
    main()
