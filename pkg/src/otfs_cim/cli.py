"""``sim`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from .config import SYSTEMS, ConfigError, FrameConfig, load_config, validate
from .harness import SweepSpec, records_csv, run_recipe, run_sweep


def parse_snr(text: str) -> tuple:
    """``start:step:stop`` (stop inclusive), a comma list, or ``inf``."""
    if ":" in text:
        try:
            start, step, stop = (float(x) for x in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad SNR range {text!r}; use start:step:stop")
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError(f"bad SNR range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(v) for v in np.round(start + step * np.arange(n), 10))
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description="OTFS-CIM Monte Carlo BER simulator")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="FrameConfig JSON file (defaults used if omitted)")
    src.add_argument("--recipe", help="figure recipe JSON (runs every curve it lists)")
    p.add_argument("--system", choices=SYSTEMS, default="otfs-cim")
    p.add_argument("--snr", type=parse_snr, default=None,
                   help="start:step:stop, comma list, or inf for a noiseless run "
                        "(default 0:5:15, or the recipe's own grid)")
    p.add_argument("--max-frames", type=int, default=None)
    p.add_argument("--min-errors", type=int, default=200,
                   help="stop an SNR point after this many bit errors (0 disables)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="output prefix for .csv/.json files")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.recipe:
            results = run_recipe(args.recipe, args.out, workers=args.workers,
                                 max_frames=args.max_frames, snr_db=args.snr)
            for label, records in results.items():
                for r in records:
                    print(f"{label}\t{r.snr_db:g}\t{r.ber:.3e}\t+-{r.ci95_halfwidth:.1e}")
            return 0
        cfg = load_config(args.config, allow_cross=True) if args.config else validate(FrameConfig())
        spec = SweepSpec(system=args.system, cfg=cfg, snr_db_list=args.snr or (0.0, 5.0, 10.0, 15.0),
                         max_frames=args.max_frames or 10_000, min_bit_errors=args.min_errors,
                         seed=args.seed)
        records, _ = run_sweep(spec, args.out, workers=args.workers)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"sim: error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(records_csv(spec, records))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
