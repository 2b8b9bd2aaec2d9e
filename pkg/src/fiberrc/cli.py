"""Command-line entry points for the experiment harness.

Subcommands:

  simulate-link   run the transmission system, write the detected waveform
  run             one end-to-end pipeline, print the BER record as JSON
  sweep           Cartesian parameter sweep to CSV (resumable)
  benchmark       all processing modes across window sizes to CSV
  distance        longest distance meeting a BER target, per mode
  eye             eye-diagram and histogram CSV emission

Common flags: --config/--preset select the experiment, --seed overrides the
master seed, --out the output directory (env FIBERRC_OUT), --workers the
process count (env FIBERRC_WORKERS).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from fiberrc.harness import (
    ExperimentConfig,
    StageError,
    benchmark,
    distance_to_fec,
    eye_data,
    run_pipeline,
    sweep,
)
from fiberrc.signals import write_waveform


def _load_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json_file(args.config)
    elif args.preset:
        cfg = ExperimentConfig.from_dict({"preset": args.preset})
    else:
        raise SystemExit("one of --config or --preset is required")
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.seeds = None
    return cfg


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("FIBERRC_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("FIBERRC_WORKERS")
    return int(env) if env else 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON path")
    p.add_argument("--preset", help="named preset (see fiberrc.presets)")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=None, help="worker processes")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fiberrc", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("simulate-link", "simulate the transmission system only"),
        ("run", "run one end-to-end pipeline"),
        ("sweep", "run the configured parameter sweep"),
        ("benchmark", "compare processing modes across window sizes"),
        ("distance", "find the longest distance meeting a BER target"),
        ("eye", "emit eye-diagram and histogram CSV"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "distance":
            p.add_argument("--target", type=float, default=1e-3)
            p.add_argument("--z-low", type=float, default=1.0)
            p.add_argument("--z-high", type=float, default=60.0)
            p.add_argument("--modes", nargs="+", default=None)
        if name == "benchmark":
            p.add_argument("--windows", type=int, nargs="+", default=[1, 3, 5, 7, 9])

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except StageError as exc:
        print(f"fiberrc: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"fiberrc: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    if args.command == "simulate-link":
        from fiberrc.harness import _link_stream
        seeds = cfg.resolved_seeds()
        bits, wav = _link_stream(cfg, seeds.bits_train, seeds.noise, "rep0-train")
        path = out / "link_output.frcw"
        write_waveform(path, wav)
        bits_path = out / "bits.json"
        bits_path.write_text(json.dumps(bits.bits.tolist()))
        print(json.dumps({"waveform": str(path), "bits": str(bits_path),
                          "n_bits": len(bits)}))
    elif args.command == "run":
        result = run_pipeline(cfg)
        print(json.dumps({
            "mode": result.mode, "ber": result.ber,
            "threshold": result.threshold, "train_ber": result.train_ber,
            "validation_ber_mean": result.validation_ber_mean,
            "validation_ber_std": result.validation_ber_std,
            "wall_time_s": result.wall_time_s}))
    elif args.command == "sweep":
        rows = sweep(cfg, out / "sweep.csv", workers=_workers(args))
        print(json.dumps({"csv": str(out / "sweep.csv"), "rows": len(rows)}))
    elif args.command == "benchmark":
        rows = benchmark(cfg, out / "benchmark.csv",
                         window_bits=tuple(args.windows), workers=_workers(args))
        print(json.dumps({"csv": str(out / "benchmark.csv"), "rows": len(rows)}))
    elif args.command == "distance":
        result = distance_to_fec(cfg, ber_target=args.target,
                                 z_low_km=args.z_low, z_high_km=args.z_high,
                                 modes=tuple(args.modes) if args.modes else None)
        print(json.dumps(result))
    elif args.command == "eye":
        eye_rows, hist_rows = eye_data(cfg)
        import csv as _csv
        with open(out / "eye.csv", "w", newline="") as fh:
            fh.write("# fiberrc eye schema v1\n")
            w = _csv.DictWriter(fh, fieldnames=["segment", "phase", "value"])
            w.writeheader()
            w.writerows(eye_rows)
        with open(out / "histogram.csv", "w", newline="") as fh:
            fh.write("# fiberrc histogram schema v1\n")
            w = _csv.DictWriter(fh, fieldnames=["bin_left", "bin_right", "count"])
            w.writeheader()
            w.writerows(hist_rows)
        print(json.dumps({"eye": str(out / "eye.csv"),
                          "histogram": str(out / "histogram.csv")}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
