"""Command-line entry point.

    bifionet generate|train|evaluate|bound|ingest|report --config FILE [--seed N] [--out DIR]

Exit codes: 0 success, 1 configuration or parse error, 2 numeric failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import experiments as ex
from .errors import BifionetError, ConfigError, ContractError, DimensionError, NumericError, ParseError, SpecError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("bifionet")


def _generate(cfg, args):
    for key, path in ex.run_generate(cfg).items():
        print(f"wrote {key}: {path}")


def _train(cfg, args):
    for kind, path in ex.run_train(cfg, args.kind or ex.KINDS).items():
        print(f"trained {kind}: {path}")


def _evaluate(cfg, args):
    for kind, rep in ex.run_evaluate_all(cfg, args.kind or ex.KINDS).items():
        print(f"{kind} epsilon_val = {rep.epsilon_val:.6e}")


def _bound(cfg, args):
    for app, cmp in ex.run_bound(cfg).items():
        print(f"application {app}: bound(1) standard={cmp.standard[1]:.4g} bifi={cmp.bifi[1]:.4g}")


def _ingest(cfg, args):
    for key, path in ex.run_ingest(cfg).items():
        print(f"ingested {key}: {path}")


def _report(cfg, args):
    r = ex.run_report(cfg)
    print(f"bifi {r['bifi']:.6e}  standard {r['standard']:.6e}  improvement {r['improvement']:.3f}")


COMMANDS = {
    "generate": _generate,
    "train": _train,
    "evaluate": _evaluate,
    "bound": _bound,
    "ingest": _ingest,
    "report": _report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bifionet", description="Bi-fidelity DeepONet experiments")
    parser.add_argument("command", choices=list(COMMANDS))
    parser.add_argument("--config", required=True, help="INI experiment file")
    parser.add_argument("--seed", type=int, help="override [experiment] seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--kind", action="append", choices=list(ex.KINDS),
                        help="restrict train/evaluate to one formulation (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ex.load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
        COMMANDS[args.command](cfg, args)
    except (ConfigError, ParseError, SpecError, DimensionError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BifionetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
