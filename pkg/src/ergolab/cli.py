"""Command line entry point: ``ergolab run`` and ``ergolab validate``."""
from __future__ import annotations

import argparse
import sys

from .errors import NumericError, ValidationError
from .parallel import set_default_workers
from .runner import default_out, load_config, run_experiment, with_seed

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergolab", description="Ergodic-theory experiment runner")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default results/<stem>)")
    r.add_argument("--workers", type=int, default=None,
                   help="thread count (falls back to ERGOLAB_WORKERS)")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.cmd == "validate":
            print(f"ok: {args.config} ({cfg.kind})")
            return EXIT_OK
        cfg = with_seed(cfg, args.seed)
        set_default_workers(args.workers)
        out = args.out or cfg.out or default_out(args.config)
        res = run_experiment(cfg, out_dir=out, workers=args.workers)
        for p in res["paths"]:
            print(p)
        return EXIT_OK
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        set_default_workers(None)


if __name__ == "__main__":
    sys.exit(main())
