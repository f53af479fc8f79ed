"""Command line entry point: ``critwave <scenario> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(harness.EXIT_USAGE)


def build_parser():
    p = _Parser(prog="critwave", description="Run one numerical scenario and write CSV/JSON artifacts.")
    p.add_argument("scenario", choices=harness.SCENARIOS)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--out", help=f"output directory (default ${harness.OUT_ENV}/<scenario> or ./critwave_out)")
    p.add_argument("--seed", help="PCG64 seed")
    p.add_argument("--ell", help="boost speed")
    p.add_argument("--radii", help="comma separated radii")
    p.add_argument("--trange", help="time range lo:hi")
    p.add_argument("--tol", help="check tolerance")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {k: getattr(args, k) for k in ("seed", "ell", "radii", "trange", "tol")
                 if getattr(args, k) is not None}
    try:
        cfg = harness.load_config(args.scenario, args.config, overrides)
    except harness.ConfigError as e:
        print(f"critwave: config error: {e}", file=sys.stderr)
        return harness.EXIT_USAGE
    code, summary = harness.run_scenario(cfg, args.out)
    verdict = {c["name"]: ("PASS" if c["pass"] else "FAIL") for c in summary["checks"]}
    print(json.dumps({"scenario": cfg.scenario, "exit_code": code, "checks": verdict,
                      "error": summary["error"]}, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
