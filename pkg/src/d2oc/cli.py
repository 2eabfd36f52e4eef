"""Command-line scenario runner.

Exit codes: 0 success, 1 configuration error, 2 runtime error (including a
missing or violated ultimate bound under ``--require-bound``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

from .analysis import analyze_log, write_bound_report
from .config import CONTROLLER_MODES, ScenarioConfig, load_config
from .errors import ConfigError, D2ocError
from .swarm import run_simulation, write_metrics_csv, write_snapshot_csv

log = logging.getLogger("d2oc")


def bundled_scenario(name: str = "paper_scenario.json") -> Path:
    return Path(str(resources.files("d2oc") / "scenarios" / name))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d2oc", description="Run a density-tracking swarm scenario.")
    p.add_argument("--config", type=Path, default=None,
                   help="scenario JSON (default: bundled paper_scenario.json)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--controller", choices=CONTROLLER_MODES, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--r-scale", type=float, default=None, help="override the input penalty scale")
    p.add_argument("--receding", action="store_true", default=None,
                   help="apply only the first input of each plan")
    p.add_argument("--emit-plots", action="store_true")
    p.add_argument("--require-bound", action="store_true",
                   help="exit 2 unless every feedforward agent has a bound it respects")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def execute_scenario(cfg: ScenarioConfig, out: Path, *, config_path: str, emit_plots: bool = False,
                     require_bound: bool = False) -> int:
    t0 = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    emitted: list[str] = []

    metrics = run_simulation(cfg)
    reports = analyze_log(metrics, cfg.horizon.H, cfg.output.settle_fraction)

    write_metrics_csv(out / "metrics.csv", metrics)
    emitted.append("metrics.csv")
    snap_dir = out / "snapshots"
    if metrics.snapshots:
        snap_dir.mkdir(exist_ok=True)
    for snap in metrics.snapshots:
        name = f"snapshots/snapshot_{snap['step']:05d}.csv"
        write_snapshot_csv(out / name, snap)
        emitted.append(name)
    write_bound_report(out / "bound_report.json", {k: v.to_json() for k, v in reports.items()})
    emitted.append("bound_report.json")

    if emit_plots:
        from .plots import emit_all
        emitted.extend(emit_all(metrics, reports, out))

    manifest = {
        "config": config_path,
        "seed": cfg.seed,
        "output_dir": str(out),
        "files": emitted,
        "completed": metrics.completed,
        "duration_s": round(time.perf_counter() - t0, 3),
    }
    tmp = out / "manifest.json.tmp"
    tmp.write_text(json.dumps(manifest, indent=2) + "\n")
    tmp.replace(out / "manifest.json")

    if require_bound:
        checked = {k: v for k, v in reports.items() if k.startswith("ff/")} or reports
        bad = [k for k, v in checked.items() if v.bound is None or not v.passed]
        if bad:
            log.error("ultimate bound missing or violated for %s", ", ".join(bad))
            return 2
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    config_path = args.config or bundled_scenario()
    try:
        cfg = load_config(config_path).with_overrides(
            seed=args.seed, mode=args.controller, steps=args.steps,
            receding=args.receding, r_scale=args.r_scale)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return execute_scenario(cfg, args.out, config_path=str(config_path),
                                emit_plots=args.emit_plots, require_bound=args.require_bound)
    except D2ocError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
