"""Command line: dgvi-render <kind> --in PATH [--in PATH ...] --out PATH."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotJob, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgvi-render", description="Render dgvi experiment exports")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True, help="input artifact (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    parser.add_argument("--clim", type=float, nargs=2, metavar=("LO", "HI"), default=(0.0, 1.0))
    parser.add_argument("--column", default="verif_bce", help="metrics column for curves")
    parser.add_argument("--log", action="store_true", help="log-scale y axis for curves")
    return parser


def cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = PlotJob(
            kind=args.kind,
            inputs=tuple(args.inputs),
            out=args.out,
            bounds=None if args.bounds is None else tuple(args.bounds),
            clim=tuple(args.clim),
            column=args.column,
            log_scale=args.log,
        )
        out = render(job)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.kind}: {out}")
    return 0


def main() -> None:
    sys.exit(cli())
