"""
Command-line entry point ``repulse-wave``.

    repulse-wave <experiment> --config run.toml [--set grid.dx=0.05] [--out dir] [--threads n]

The config is a TOML file.  Common tables:

    [potential]  kind = "shifted_inverse_power", beta = 0.6, shift = 1.0
    [grid]       L = 600.0, dx = 0.1        (or N instead of dx)
    [data]       see `_field_data`
    band = [0.5, 4.0]
    t_list = [25.0, 50.0, 100.0]
    variant = "full"
    ode_rtol = 1e-10                        (waveop: wave-function integrator tolerance)
    [tolerances] per-experiment overrides of the checks in `_CHECKS`

Each run writes CSV files, ``summary.txt`` and ``manifest.json`` into the
output directory.  Exit status: 0 when every check holds, 1 when a check
fails or a module raises (the stage is named on stderr), 2 for a malformed
config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .errors import ArtifactError, ConfigInvalid

EXPERIMENTS = ("wavefun", "spectrum", "evolve", "waveop", "variants", "equiv",
               "dispersion", "odecheck", "bridge3d")

_CHECKS = {
    "spectrum_free_amp": 1e-3,
    "energy_drift": 1e-3,
    "monotone_slack": 1e-3,
    "morawetz_defect": 0.03,
    "flux_residual": 1e-2,
    "bridge": 1e-6,
    "shell_fraction": 0.9,
    "ode_stability": 0.01,
    "free_residual": 1e-10,
}


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: dict, items) -> dict:
    """Apply ``a.b.c=value`` overrides in place; values are parsed as TOML."""
    for item in items or ():
        if "=" not in item:
            raise ConfigInvalid(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigInvalid(f"empty key in {item!r}")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigInvalid(f"{key} descends into a non-table")
        node[parts[-1]] = _parse_value(text.strip())
    return cfg


def load_config(path, overrides=()) -> dict:
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"parse error in {path}: {exc}") from exc
    return apply_overrides(cfg, overrides)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigInvalid(f"missing key {key!r}")
    return cfg[key]


def _float_list(cfg: dict, key: str, default=None) -> List[float]:
    v = cfg.get(key, default)
    if v is None:
        raise ConfigInvalid(f"missing key {key!r}")
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{key} must be a list of numbers") from exc


def _potential(cfg: dict):
    from .potentials import spec_from_mapping

    table = _need(cfg, "potential")
    if not isinstance(table, dict):
        raise ConfigInvalid("[potential] must be a table")
    if table.get("kind") == "tabulated" and not Path(str(table.get("path", ""))).is_file():
        raise ConfigInvalid(f"tabulated potential file not found: {table.get('path')!r}")
    try:
        return spec_from_mapping(table)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad [potential] table: {exc}") from exc


def _grid(cfg: dict):
    from .transforms import GridSpec

    g = _need(cfg, "grid")
    try:
        L = float(g["L"])
        if "N" in g:
            return GridSpec(L, int(g["N"]))
        return GridSpec.from_spacing(L, float(g["dx"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad [grid] table: {exc}") from exc


def _band(cfg: dict):
    band = _float_list(cfg, "band", [0.5, 4.0])
    if len(band) != 2 or not 0 < band[0] < band[1]:
        raise ConfigInvalid("band must be [a, b] with 0 < a < b")
    return band[0], band[1]


def _check_grid_length(grid, t_max: float, support: float) -> None:
    if grid.L < t_max + support + 10:
        raise ConfigInvalid(f"grid L={grid.L} < max(t_list) + data support + 10 = {t_max + support + 10}")


def _field_data(cfg: dict, grid):
    """
    Initial data for the finite-difference experiments.

    [data] kind = "bump"        center, width, direction (0 = at rest, +-1 travelling)
    [data] kind = "band_packet" band, x0, taper, power (incoming packet)
    An optional second bump at rest is added with `rest_center`, `rest_width`,
    `rest_amplitude`.  Returns (state, support radius).
    """
    from .evolution import (FieldState, incoming_band_packet, smooth_bump,
                            travelling_bump)

    d = cfg.get("data", {})
    kind = d.get("kind", "bump")
    if kind == "bump":
        c, w = float(d.get("center", 30.0)), float(d.get("width", 8.0))
        direction = int(d.get("direction", -1))
        if direction == 0:
            st = FieldState(grid, smooth_bump(grid.x, c, w), 0 * grid.x, 0.0)
        else:
            st = travelling_bump(grid, c, w, direction)
        support = c + w
    elif kind == "band_packet":
        band = tuple(float(v) for v in d.get("band", _band(cfg)))
        x0 = float(d.get("x0", 5.0))
        st = incoming_band_packet(grid, band, x0, float(d.get("taper", 0.2)), float(d.get("power", 0.0)))
        support = x0
    else:
        raise ConfigInvalid(f"unknown data kind {kind!r}")
    if "rest_center" in d:
        c, w = float(d["rest_center"]), float(d.get("rest_width", 6.0))
        extra = float(d.get("rest_amplitude", 0.5)) * smooth_bump(grid.x, c, w)
        st = FieldState(grid, st.w + extra, st.w_t, 0.0)
        support = max(support, c + w)
    return st, support


def _spectral_data(cfg: dict, table, basis):
    """
    Data with generalized spectrum g0 = bump on the band and
    g1 = k * bump * cos(phase * k), `phase` from [data] (default 3).
    """
    import numpy as np

    from .transforms import GridFunction

    d = cfg.get("data", {})
    k = table.k
    a, b = k[0], k[-1]
    s = np.clip((k - a) / (b - a), 0.0, 1.0)
    bump = np.where((s > 0) & (s < 1), np.exp(-1.0 / np.maximum(s * (1 - s), 1e-300)), 0.0)
    phase = float(d.get("phase", 3.0))
    g = basis.grid
    return (GridFunction(g, basis.inverse(bump).real),
            GridFunction(g, basis.inverse(k * bump * np.cos(phase * k)).real))


# ---------------------------------------------------------------------------
# run bookkeeping
# ---------------------------------------------------------------------------

@dataclass
class Run:
    out: Path
    cfg: dict
    files: List[str] = field(default_factory=list)
    lines: List[str] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)

    def tol(self, name: str) -> float:
        return float(self.cfg.get("tolerances", {}).get(name, _CHECKS[name]))

    def csv(self, name: str, header, rows) -> None:
        from .transforms import fmt

        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
        self.files.append(name)

    def note(self, text: str) -> None:
        self.lines.append(text)

    def check(self, name: str, ok: bool, detail: str) -> None:
        self.checks[name] = bool(ok)
        self.lines.append(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")


def _fmt(v: float) -> str:
    from .transforms import fmt

    return fmt(v)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def run_wavefun(run: Run) -> None:
    import numpy as np

    from .spectral import solve_wavefunctions

    cfg = run.cfg
    spec = _potential(cfg)
    ks = _float_list(cfg, "k_list", [0.5, 1.0, 2.0, 4.0])
    x_max = float(cfg.get("x_max", 100.0))
    x = np.linspace(0.0, x_max, int(cfg.get("samples", 2001)))
    u, ux = solve_wavefunctions(spec, ks, x)
    header = ["x"] + [f"u_k{i}" for i in range(len(ks))] + [f"ux_k{i}" for i in range(len(ks))]
    run.csv("wavefunctions.csv", header, (np.concatenate(([xi], u[i], ux[i])) for i, xi in enumerate(x)))
    run.note("k values: " + ", ".join(_fmt(k) for k in ks))


def run_spectrum(run: Run) -> None:
    import numpy as np

    from .spectral import extract_jost_table

    cfg = run.cfg
    spec = _potential(cfg)
    ks = _float_list(cfg, "k_list", [0.5, 1.0, 2.0, 4.0])
    window = cfg.get("window")
    table = extract_jost_table(spec, ks, window=tuple(window) if window else None)
    path = run.out / "jost.csv"
    table.to_csv(path)
    run.files.append("jost.csv")
    run.note(f"fit window: [{_fmt(table.window[0])}, {_fmt(table.window[1])}], order {table.order}")
    if spec.kind.value == "zero":
        dev = float(np.max(np.abs(table.absA * table.k - 1.0)))
        arg = float(np.max(np.abs(table.argA)))
        tol = run.tol("spectrum_free_amp")
        run.check("free_amplitude", dev < tol and arg < tol, f"max||A|k-1| = {dev:.3e}, max|arg A| = {arg:.3e}")


def run_evolve(run: Run) -> None:
    import numpy as np

    from .evolution import (History, Rectangle, Triangle, energy_functional,
                            evolve_to, flux_check, morawetz_scan, write_snapshot)

    cfg = run.cfg
    spec = _potential(cfg)
    grid = _grid(cfg)
    T = float(cfg.get("T", 100.0))
    state, support = _field_data(cfg, grid)
    _check_grid_length(grid, T, support)
    regions = []
    for r in cfg.get("regions", []):
        if r.get("kind") == "rectangle":
            regions.append(Rectangle(float(r["x1"]), float(r["x2"]), float(r["t1"]), float(r["t2"])))
        elif r.get("kind") == "triangle":
            regions.append(Triangle(float(r["s"]), float(r["t0"])))
        else:
            raise ConfigInvalid(f"unknown region {r!r}")
    n_rep = int(cfg.get("reports", 20))
    report_times = list(np.linspace(0.0, T, n_rep + 1))
    snaps = [float(t) for t in cfg.get("snapshot_times", [])]
    hist = History()
    final = evolve_to(state, T, spec, cfl=float(cfg.get("cfl", 0.5)), history=hist,
                      regions=regions, report_times=report_times, snapshot_times=snaps)
    run.csv("energy.csv", ["t", "E", "E_minus", "E_plus", "potential_part", "boundary_flux", "morawetz"],
            ((r.time, r.E_total, r.E_minus, r.E_plus, r.potential_part, r.boundary_flux_accum,
              r.morawetz_accum) for r in hist.reports))
    for i, (t, snap) in enumerate(sorted(hist.snapshots.items())):
        name = f"snapshot_{i:03d}.csv"
        write_snapshot(run.out / name, snap, spec)
        run.files.append(name)

    E0 = energy_functional(grid, spec, state.w, state.w_t)
    E1 = energy_functional(grid, spec, final.w, final.w_t)
    drift = abs(E1 - E0) / E0
    run.check("energy_drift", drift < run.tol("energy_drift"), f"{drift:.3e}")
    em = np.array([r.E_minus for r in hist.reports])
    ep = np.array([r.E_plus for r in hist.reports])
    slack = run.tol("monotone_slack") * E0
    run.check("inward_nonincreasing", np.all(np.diff(em) <= slack), f"largest step change {np.max(np.diff(em)) / E0:.3e} E")
    run.check("outward_nondecreasing", np.all(np.diff(ep) >= -slack), f"smallest step change {np.min(np.diff(ep)) / E0:.3e} E")
    m = morawetz_scan(hist, final, spec)
    run.check("morawetz_bound", m.within_bound, f"{_fmt(m.accumulated)} <= {_fmt(m.bound)}")
    run.note(f"representation defect {m.representation_defect:.4e}, E_minus(T)/E = {m.E_minus_final / E0:.4e}")
    rows = []
    for reg in regions:
        fr = flux_check(hist, reg)
        rows.append((type(reg).__name__, fr.inward, fr.outward, fr.energy))
        rel = max(abs(fr.inward), abs(fr.outward)) / fr.energy
        run.check(f"flux_{type(reg).__name__.lower()}_{len(rows)}", rel < run.tol("flux_residual"), f"{rel:.3e}")
    if rows:
        run.csv("flux.csv", ["region", "inward_defect", "outward_defect", "energy"], rows)


def run_waveop(run: Run) -> None:
    from .modified_propagator import PhaseShiftVariant, waveop_residual
    from .potentials import Kind
    from .spectral import build_spectral_basis

    cfg = run.cfg
    spec = _potential(cfg)
    grid = _grid(cfg)
    band = _band(cfg)
    t_list = _float_list(cfg, "t_list", [25.0, 50.0, 100.0])
    variant = PhaseShiftVariant(str(cfg.get("variant", "full")).lower())
    _check_grid_length(grid, max(t_list), float(cfg.get("data", {}).get("support", 30.0)))
    table, basis = build_spectral_basis(spec, grid, band, rtol=float(cfg.get("ode_rtol", 1e-10)))
    data = _spectral_data(cfg, table, basis)
    scan = waveop_residual(spec, variant, data, t_list, basis=basis)
    rel = scan.residual / scan.data_norm if scan.data_norm > 0 else 0.0 * scan.residual
    run.csv("residual.csv", ["t", "residual", "cauchy", "residual_over_data"],
            ((t, r, c, x) for (t, r, c), x in zip(scan.rows(), rel)))
    run.note(f"data energy norm {_fmt(scan.data_norm)}")
    if spec.kind is Kind.ZERO and variant is PhaseShiftVariant.NONE:
        # both operators reduce to the free propagator and the identity
        worst = float(max(rel))
        run.check("free_residual", worst < run.tol("free_residual"),
                  f"max residual/||d|| = {_fmt(worst)}")


def run_variants(run: Run) -> None:
    import numpy as np

    from .modified_propagator import variant_table

    cfg = run.cfg
    spec = _potential(cfg)
    ks = _float_list(cfg, "k_list", [0.5, 1.0, 2.0])
    rows = []
    for t in _float_list(cfg, "t_list", [1e2, 1e3, 1e4]):
        rows += [(t, k, pf, ps, d) for k, pf, ps, d in variant_table(spec, np.array(ks), t)]
    run.csv("variants.csv", ["t", "k", "P_full", "P_simple", "difference"], rows)


def run_equiv(run: Run) -> None:
    from .modified_propagator import intertwine_residual
    from .potentials import spec_from_mapping, truncate_to_type1
    from .transforms import GridFunction

    cfg = run.cfg
    spec_a = _potential(cfg)
    splice = float(cfg.get("splice", 1.0))
    spec_b = spec_from_mapping(cfg["partner"]) if "partner" in cfg else truncate_to_type1(spec_a, splice)
    grid = _grid(cfg)
    t_list = _float_list(cfg, "t_list", [50.0, 100.0, 200.0, 400.0])
    state, support = _field_data(cfg, grid)
    _check_grid_length(grid, max(t_list), support)
    t, _, diffs = intertwine_residual(spec_a, spec_b, (GridFunction(grid, state.w), GridFunction(grid, state.w_t)),
                                      t_list, R=splice, cfl=float(cfg.get("cfl", 0.5)))
    run.csv("cauchy.csv", ["t", "difference_to_previous"], zip(t, diffs))


def run_dispersion(run: Run) -> None:
    import numpy as np

    from .evolution import band_profile
    from .highdim import HarmonicSector, default_shell_constants, dispersion_shell_3d
    from .modified_propagator import PhaseShiftVariant, oscillatory_packet
    from .potentials import MomentCache

    cfg = run.cfg
    spec = _potential(cfg)
    band = _band(cfg)
    t_list = _float_list(cfg, "t_list", [100.0, 200.0, 400.0, 800.0])
    variant = PhaseShiftVariant(str(cfg.get("variant", "full")).lower())

    # stationary-phase packet: sup |w| * Q1^(1/2)
    packet_spec = spec_from_packet(cfg) or spec
    cache = MomentCache(packet_spec, 1.0)
    rows = []
    for t in t_list:
        Q1 = float(cache.moment(1, t))
        x = np.arange(t - Q1 / (2 * band[0] ** 2) - 20, t + 20, 0.05)
        w = oscillatory_packet(lambda k: band_profile(k, band, 0.15), band, packet_spec, t, -1, x, variant)
        sup = float(np.max(np.abs(w)))
        rows.append((t, Q1, sup, sup * math.sqrt(Q1)))
    run.csv("packet.csv", ["t", "Q1", "sup_abs_w", "sup_times_sqrt_Q1"], rows)
    scaled = [r[3] for r in rows]
    run.note(f"packet sup*Q1^(1/2) max/min = {max(scaled) / min(scaled):.4f}")

    # radial shells in R^d
    sh = cfg.get("shell", {})
    grid = _grid(cfg)
    _check_grid_length(grid, max(t_list), float(cfg.get("data", {}).get("x0", 5.0)))
    state, _ = _field_data(cfg, grid)
    sector = HarmonicSector(int(sh.get("d", 3)), int(sh.get("nu", 0)))
    c = sh.get("constants")
    constants = tuple(float(v) for v in c) if c else default_shell_constants(band)
    shells = dispersion_shell_3d(spec, sector, state, t_list, constants, cfl=float(cfg.get("cfl", 0.5)))
    run.csv("shell.csv", ["t", "inside_frac", "shell_frac", "outside_frac", "sliding_sup"],
            ((r.t, r.inside, r.shell, r.outside, r.sliding_sup) for r in shells))
    run.note(f"shell constants c1={_fmt(constants[0])}, c2={_fmt(constants[1])}")
    last = shells[-1]
    run.check("shell_fraction", last.shell >= run.tol("shell_fraction"), f"{last.shell:.4f} at t={_fmt(last.t)}")


def spec_from_packet(cfg: dict):
    """Optional separate potential for the packet evaluator ([packet_potential])."""
    from .potentials import spec_from_mapping

    table = cfg.get("packet_potential")
    return spec_from_mapping(table) if table else None


def run_odecheck(run: Run) -> None:
    from .highdim import ode_asymptotics_check

    cfg = run.cfg
    spec = _potential(cfg)
    case = str(cfg.get("case", "b"))
    T_range = tuple(_float_list(cfg, "T_range", [1e3, 1e4]))
    for xi in _float_list(cfg, "xi_list", [1.0, 2.0]):
        rep = ode_asymptotics_check(spec, xi, case=case, T_range=T_range)
        tag = f"xi{_fmt(xi)}".replace(".", "p")
        stride = max(1, rep.t.size // 20000)
        run.csv(f"ode_{tag}.csv", ["t", "E0", "E1"],
                zip(rep.t[::stride], rep.E0[::stride], rep.E1[::stride]))
        slope = rep.slope()
        run.note(f"xi={_fmt(xi)}: A={_fmt(rep.A)}, B={_fmt(rep.B)}, |E0| slope {slope:.4f}")
        run.check(f"ode_stability_{tag}", rep.stability < run.tol("ode_stability"), f"{rep.stability:.3e}")
        run.check(f"ode_slope_{tag}", abs(-slope - spec.beta) <= 0.15, f"slope {slope:.4f}, beta {spec.beta}")


def run_bridge3d(run: Run) -> None:
    from .evolution import smooth_bump
    from .highdim import mu_fraction, radial3d_bridge
    from .transforms import GridFunction

    cfg = run.cfg
    grid = _grid(cfg)
    d = cfg.get("data", {})
    w = GridFunction(grid, smooth_bump(grid.x, float(d.get("center", 8.0)), float(d.get("width", 4.0))))
    res = radial3d_bridge(w, k_max=float(cfg.get("k_max", 10.0)))
    run.csv("bridge.csv", ["rho", "direct", "via_sine", "difference"],
            zip(res.rho, res.direct, res.via_sine, res.direct - res.via_sine))
    run.check("bridge", res.discrepancy < run.tol("bridge"), f"max discrepancy {res.discrepancy:.3e}")
    rows = [(str(dd), str(nu), str(mu_fraction(dd, nu))) for dd in (3, 4, 5) for nu in (0, 1, 2)]
    run.csv("mu_table.csv", ["d", "nu", "mu"], rows)


_RUNNERS: Dict[str, Callable[[Run], None]] = {
    "wavefun": run_wavefun,
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "waveop": run_waveop,
    "variants": run_variants,
    "equiv": run_equiv,
    "dispersion": run_dispersion,
    "odecheck": run_odecheck,
    "bridge3d": run_bridge3d,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _versions() -> dict:
    import numpy
    import scipy

    return {"artifact": __version__, "numpy": numpy.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(experiment: str, cfg: dict, out: Path) -> int:
    """Run one experiment; returns the exit status."""
    if experiment not in _RUNNERS:
        raise ConfigInvalid(f"unknown experiment {experiment!r}")
    declared = cfg.get("experiment")
    if declared is not None and declared != experiment:
        raise ConfigInvalid(f"config declares experiment {declared!r}, command line asks for {experiment!r}")
    out.mkdir(parents=True, exist_ok=True)
    r = Run(out, cfg)
    r.note(f"experiment: {experiment}")
    _RUNNERS[experiment](r)
    with open(out / "summary.txt", "w") as fh:
        fh.write("\n".join(r.lines) + "\n")
    r.files.append("summary.txt")
    manifest = {
        "experiment": experiment,
        "config_hash": config_hash(cfg),
        "versions": _versions(),
        "checks": r.checks,
        "files": {name: _sha256(out / name) for name in r.files},
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0 if all(r.checks.values()) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="repulse-wave", description="Run a wave-equation experiment from a TOML config.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. grid.dx=0.05 (repeatable)")
    p.add_argument("--out", default=None, help="output directory (default: out/<experiment>)")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/FFT worker threads")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 2
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        cfg = load_config(args.config, args.set)
        out = Path(args.out or cfg.get("output", f"out/{args.experiment}"))
        return run(args.experiment, cfg, out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArtifactError, ValueError) as exc:
        print(f"stage {args.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
