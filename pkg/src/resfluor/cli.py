"""Command-line interface: run scenarios, sweep drive ratios, list presets."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import (
    ConfigInvariantError,
    ConfigSchemaError,
    ConfigUnitError,
    ScenarioConfig,
    load_config,
)
from .geometry import CouplingError, GeometryError
from .liouvillian import SteadyStateError
from .presets import PRESET_IDS, expand_preset, preset_description
from .runner import run_scenario, run_sweep
from .spectrum import SpectrumError

_CATEGORIES = (
    (ConfigSchemaError, "config-schema", 2),
    (ConfigUnitError, "config-units", 2),
    (ConfigInvariantError, "config-invariant", 2),
    (GeometryError, "geometry", 2),
    (CouplingError, "coupling", 2),
    (SteadyStateError, "steady-state", 3),
    (SpectrumError, "spectrum", 3),
    (ValueError, "invalid-argument", 2),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resfluor",
        description="Steady-state resonance-fluorescence spectra of driven atom arrays.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--preset", choices=PRESET_IDS, help="built-in scenario")
        p.add_argument("--config", type=Path, help="JSON scenario file")
        p.add_argument("--out-dir", type=Path,
                       default=Path(os.environ.get("RESFLUOR_OUT_DIR", ".")),
                       help="output directory (default: $RESFLUOR_OUT_DIR or '.')")
        p.add_argument("--grid-points", type=int, help="odd number of grid points")
        p.add_argument("--grid-width", type=float, help="grid half-width in gamma")
        p.add_argument("--zero-collective", action="store_true",
                       help="switch off J and Gamma (independent-atoms counterfactual)")
        p.add_argument("--uniform-couplings", nargs=2, type=float,
                       metavar=("J", "GAMMA"),
                       help="force all pairs to share these J and Gamma")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for sweep rows")

    run_p = sub.add_parser("run", help="run one scenario, write CSV + JSON sidecar")
    add_common(run_p)

    sweep_p = sub.add_parser("sweep", help="sweep the drive ratio of non-addressed atoms")
    add_common(sweep_p)
    sweep_p.add_argument("--ratios", default="0:1:21", metavar="START:STOP:COUNT",
                         help="ratio grid (default 0:1:21)")
    sweep_p.add_argument("--omega1", nargs="+", type=float,
                         help="drive strength(s) of the addressed atom")

    sub.add_parser("list-presets", help="list built-in scenarios")
    return parser


def _resolve_config(args) -> tuple[ScenarioConfig, str]:
    if (args.preset is None) == (args.config is None):
        raise ConfigInvariantError("give exactly one of --preset or --config")
    if args.preset is not None:
        config, name = expand_preset(args.preset), args.preset
    else:
        config, name = load_config(args.config), args.config.stem
    overrides = {}
    if args.grid_points is not None:
        overrides["grid_points"] = args.grid_points
    if args.grid_width is not None:
        overrides["grid_width"] = args.grid_width
    if args.zero_collective:
        overrides["zero_collective"] = True
        overrides["uniform_couplings"] = None
    if args.uniform_couplings is not None:
        if args.zero_collective:
            raise ConfigInvariantError(
                "--zero-collective and --uniform-couplings are mutually exclusive")
        overrides["uniform_couplings"] = tuple(args.uniform_couplings)
        overrides["zero_collective"] = False
    if overrides:
        from dataclasses import replace
        config = replace(config, **overrides)
        if config.grid_points < 3 or config.grid_points % 2 == 0:
            raise ConfigInvariantError("--grid-points must be odd and >= 3")
    return config, name


def _parse_ratios(spec: str) -> list[float]:
    try:
        start, stop, count = spec.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise ConfigSchemaError(f"--ratios expects START:STOP:COUNT, got {spec!r}") from None
    if count < 1:
        raise ConfigInvariantError("--ratios COUNT must be >= 1")
    if count == 1:
        return [start]
    return [start + (stop - start) * k / (count - 1) for k in range(count)]


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for preset_id in PRESET_IDS:
                print(f"{preset_id:20s} {preset_description(preset_id)}")
            return 0
        config, name = _resolve_config(args)
        if args.command == "run":
            csv_path, json_path, result = run_scenario(config, args.out_dir, name=name)
            print(f"wrote {csv_path} and {json_path}")
            print(f"D = {result.report.d:.6g}  S_max = {result.report.s_max:.6g}  "
                  f"I_ss = {result.intensity:.6g}")
            return 0
        if args.command == "sweep":
            out_path = Path(args.out_dir) / f"{name}_sweep.csv"
            failures = run_sweep(config, _parse_ratios(args.ratios), out_path,
                                 omega1_values=args.omega1, workers=args.workers)
            print(f"wrote {out_path}")
            if failures:
                print(f"error[sweep]: {len(failures)} row(s) failed", file=sys.stderr)
                return 3
            return 0
        raise AssertionError(args.command)
    except Exception as err:  # noqa: BLE001 - single exit point maps categories
        for cls, category, code in _CATEGORIES:
            if isinstance(err, cls):
                print(f"error[{category}]: {err}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
