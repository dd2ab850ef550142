"""Command line entry point: ``mobtwin run | summarize | validate``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_scenario
from .metrics import EmptyInput, format_table, summarize
from .scenarios import resolve

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4
OUT_ENV = "MOBTWIN_OUT_DIR"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mobtwin", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario and write trace files")
    r.add_argument("--config", required=True, help="scenario file or bundled scenario name")
    r.add_argument("--seed", type=int)
    r.add_argument("--duration", type=float)
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")

    s = sub.add_parser("summarize", help="latency statistics from a latency.csv trace")
    s.add_argument("--in", dest="infile", required=True)

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = load_scenario(resolve(args.config))
            print(f"ok: {len(cfg.network.nodes)} nodes, {len(cfg.network.segments)} segments, "
                  f"{len(cfg.network.rsus)} rsus, {len(cfg.flows)} flows")
            return EXIT_OK
        if args.command == "summarize":
            print(format_table(summarize(args.infile)), end="")
            return EXIT_OK
        from .sim import run

        cfg = load_scenario(resolve(args.config)).with_overrides(args.seed, args.duration)
        out = Path(args.out or os.environ.get(OUT_ENV) or "out")
        summary = run(cfg, out)
        for r in summary.routes:
            print(f"t={r['decided_at']:.3f}s request {r['request_id']}: {r['kind']} route "
                  f"{'-'.join(r['segments'])} (cost {r['cost']:.1f})")
        if summary.latency:
            print(format_table(summary.latency), end="")
        print(f"budget violations: {len(summary.budget_violations)}; traces in {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EmptyInput, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
