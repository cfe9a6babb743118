"""
Inward and outward energy for a packet hitting the repulsive potential
(1+x)^-0.6 near the origin.

The packet starts moving left.  E_- (inward) drains through the origin and
the potential while E_+ (outward) fills up; their sum stays fixed.  The
Morawetz integrals account for everything E_- loses.
"""
from __future__ import annotations

from artifact.evolution import History, Triangle, evolve_to, flux_check, morawetz_scan, travelling_bump
from artifact.potentials import PotentialSpec
from artifact.transforms import GridSpec


def main() -> None:
    spec = PotentialSpec.shifted_inverse_power(0.6)
    grid = GridSpec.from_spacing(200.0, 0.02)
    state = travelling_bump(grid, 40.0, 5.0, -1)
    tri = Triangle(80.0, 10.0)
    hist = History()
    final = evolve_to(state, 150.0, spec, history=hist, regions=[tri],
                      report_times=[10.0 * i for i in range(1, 16)])
    print(f"{'t':>6} {'E':>12} {'E_-':>12} {'E_+':>12} {'int q w^2':>12}")
    for r in hist.reports:
        print(f"{r.time:6.1f} {r.E_total:12.6f} {r.E_minus:12.6f} {r.E_plus:12.6f} {r.potential_part:12.6f}")
    m = morawetz_scan(hist, final, spec)
    print(f"\nboundary term 1/2 int w_x(0,t)^2 dt = {m.boundary_flux_accum:.6f}")
    print(f"Morawetz term int int M          = {m.morawetz_accum:.6f}")
    print(f"accumulated {m.accumulated:.6f} <= 2E = {m.bound:.6f}: {m.within_bound}")
    print(f"E_-(0) = {hist.E_minus0:.6f}, defect of the balance {m.representation_defect:.2e}")
    print(f"triangle flux residual {flux_check(hist, tri).residual:.2e}")


if __name__ == "__main__":
    main()
