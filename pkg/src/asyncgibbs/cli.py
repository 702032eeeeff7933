"""``asyncgibbs <experiment> [--config path.json] [--seed N] [--out DIR] [--paper-scale] [--strict]``

Writes ``<out>/<experiment>.csv`` and ``<out>/<experiment>.meta.json``.
Exit codes: 0 success, 2 configuration error, 3 guard violation with --strict.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import AsyncGibbsError, ConfigError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3

log = logging.getLogger("asyncgibbs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asyncgibbs", description="Sequential vs asynchronous Gibbs experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON config file (parameters override defaults)")
    ap.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--paper-scale", action="store_true", help="use full-size parameters")
    ap.add_argument("--strict", action="store_true", help="exit 3 if any validity guard is violated")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.config:
            cfg = ExperimentConfig.load(args.config, args.experiment)
        else:
            cfg = ExperimentConfig(args.experiment)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            cfg.seed = args.seed
        cfg.paper_scale = cfg.paper_scale or args.paper_scale
        cfg.strict = cfg.strict or args.strict
        log.info("running %s with %s", cfg.experiment, json.dumps(cfg.to_json(), default=str))
        result = run_experiment(cfg)
    except (ConfigError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AsyncGibbsError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    csv_path, meta_path = write_outputs(result, cfg, args.out)
    print(f"wrote {csv_path} and {meta_path}")
    if result.guard_violations:
        print("guard violations: " + "; ".join(map(str, result.guard_violations)), file=sys.stderr)
        if cfg.strict:
            return EXIT_GUARD
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
