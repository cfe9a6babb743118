"""
Run every config in demos/configs through the `repulse-wave` CLI and print
each summary.  Outputs go to out/demos/<config name>.

    python demos/run_configs.py [name ...]
"""
from __future__ import annotations

import sys
import time
from pathlib import Path

from artifact.cli import load_config, main

HERE = Path(__file__).resolve().parent


def run_one(path: Path, out_root: Path) -> int:
    experiment = load_config(path)["experiment"]
    out = out_root / path.stem
    start = time.perf_counter()
    status = main([experiment, "--config", str(path), "--out", str(out)])
    print(f"== {path.stem} ({experiment}) exit {status} in {time.perf_counter() - start:.1f} s")
    summary = out / "summary.txt"
    if summary.exists():
        print(summary.read_text().rstrip())
    return status


def main_demo(names) -> int:
    configs = sorted((HERE / "configs").glob("*.toml"))
    if names:
        configs = [c for c in configs if c.stem in names]
    worst = 0
    for cfg in configs:
        worst = max(worst, run_one(cfg, Path("out") / "demos"))
    return worst


if __name__ == "__main__":
    sys.exit(main_demo(sys.argv[1:]))
