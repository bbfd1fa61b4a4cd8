"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import RunConfig, load_config
from .errors import InputError, InvariantError

log = logging.getLogger("neighbourtext")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="neighbourtext", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    for name, help_ in [
        ("ingest", "assemble per-unit documents and record-count histograms"),
        ("aggregate", "average zone attributes onto gazetteer units"),
        ("features", "build the vocabulary and unit x term matrix"),
        ("correlate", "Bonferroni-corrected term/attribute correlation scan"),
        ("predict", "elastic-net Monte Carlo cross-validation per attribute"),
        ("report", "summarise existing outputs as Markdown"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=_u64, default=None, help="override [run] seed")
        p.add_argument("--out", default=None, help="override [run] out directory")

    s = sub.add_parser("synth", help="generate a synthetic gazetteer, zones and corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--config", default=None, help="unused; accepted for symmetry")
    s.add_argument("--units", type=int, default=200)
    s.add_argument("--vocab", type=int, default=500)
    s.add_argument("--plant", action="append", default=None, metavar="ATTR[:NOISE[:TERM]]",
                   help="planted term tied to an attribute (repeatable; default attr_a:0.05)")
    s.add_argument("--kind", choices=("qa", "microblog"), default="qa")
    s.add_argument("--severed", action="store_true", help="draw planted rates independently of attributes")
    return ap


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are input errors here
        return 0 if exc.code in (0, None) else 1
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "synth":
            result = pipeline.cmd_synth(
                args.out, args.units, args.vocab, args.plant or ["attr_a:0.05"], args.seed, args.kind, args.severed
            )
        else:
            cfg: RunConfig = load_config(args.config).with_overrides(seed=args.seed, out=args.out)
            result = pipeline.STAGES[args.cmd](cfg)
    except (InputError, OSError) as exc:
        log.error("%s", exc)
        return 1
    except InvariantError as exc:
        log.error("invariant violated: %s", exc)
        return 2
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return 2
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
