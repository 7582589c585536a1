"""Command line entry point: ``cyclores run | presets | sweep``.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime abort.
The output root is taken from ``$CYCLORES_OUTPUT_ROOT`` (default
``./cyclores-out``); each scenario writes into ``<root>/<name>/``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .grid import BoundaryError
from .scenario import (
    OUTPUT_ROOT_ENV,
    PRESETS,
    ConfigError,
    get_preset,
    load_config,
    output_root,
    parse_config_text,
    run_scenario,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

log = logging.getLogger("cyclores")


def _load(target: str):
    path = Path(target)
    if not path.exists():
        try:
            entry = get_preset(target)
        except KeyError:
            raise ConfigError([f"{target}: no such file or preset"]) from None
        return parse_config_text(entry.text, f"<preset {entry.name}>")
    return load_config(path)


def run_one(target: str, outdir=None) -> int:
    try:
        cfg = _load(target)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        result = run_scenario(cfg, outdir)
    except BoundaryError as exc:
        print(f"abort: {cfg.name}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (RuntimeError, FloatingPointError) as exc:
        print(f"abort: {cfg.name}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    s = result.summary
    print(f"{cfg.name}: wrote {result.outdir} ({s['runtime_s']:.1f} s)")
    for key in ("rho_hat", "rho_pred", "v_asy_hat", "v_asy_pred", "classifier"):
        if key in s:
            print(f"  {key}: {s[key]}")
    return EXIT_OK


def cmd_presets(args) -> int:
    for p in PRESETS:
        print(f"{p.name}\n  result:  {p.anchor}\n  setup:   {p.description}")
    if args.write:
        d = Path(args.write)
        d.mkdir(parents=True, exist_ok=True)
        for p in PRESETS:
            (d / f"{p.name}.ini").write_text(p.text)
        print(f"wrote {len(PRESETS)} configs to {d}")
    return EXIT_OK


def cmd_run(args) -> int:
    return run_one(args.config, args.out)


def cmd_sweep(args) -> int:
    d = Path(args.config_dir)
    if not d.is_dir():
        print(f"error: {d}: not a directory", file=sys.stderr)
        return EXIT_VALIDATION
    configs = sorted(str(p) for p in d.glob("*.ini"))
    if not configs:
        print(f"error: {d}: no *.ini scenario files", file=sys.stderr)
        return EXIT_VALIDATION
    workers = args.workers or min(len(configs), os.cpu_count() or 1)
    if workers == 1:
        codes = [run_one(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            codes = list(pool.map(run_one, configs))
    for c, code in zip(configs, codes):
        print(f"{Path(c).name}: exit {code}")
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cyclores",
        description="Driven Landau-level simulations: run scenario configs and write CSV/report/JSON/PNG outputs.",
        epilog=f"Outputs go to ${OUTPUT_ROOT_ENV} (default ./cyclores-out).",
    )
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one scenario config (file path or preset name)")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the output root)")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("presets", help="list the preset scenarios")
    p.add_argument("--write", metavar="DIR", help="also write the preset configs as .ini files")
    p.set_defaults(func=cmd_presets)
    p = sub.add_parser("sweep", help="run every *.ini in a directory on a worker pool")
    p.add_argument("config_dir")
    p.add_argument("--workers", type=int, default=0)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    log.info("output root: %s", output_root())
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
