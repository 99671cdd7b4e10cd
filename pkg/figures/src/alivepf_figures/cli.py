"""Command-line renderer: render_figs <family> <in.csv>... -o <out.png>.

Exit codes: 0 on success, 2 for unreadable inputs, schema mismatches, or
bad options. The output image's pixel dimensions are --size times --dpi.
"""

from __future__ import annotations

import argparse
import sys

from .families import FAMILIES, render_family
from .reader import SchemaMismatch, read_table


def _parse_size(text: str):
    try:
        width_text, _, height_text = text.partition("x")
        width, height = float(width_text), float(height_text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"size must look like 8x5 (inches), got {text!r}")
    if width <= 0 or height <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return width, height


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_figs",
        description="Render experiment CSVs as figures",
    )
    parser.add_argument("family", choices=sorted(FAMILIES),
                        help="figure family to render")
    parser.add_argument("inputs", nargs="+", help="input CSV file(s)")
    parser.add_argument("-o", "--out", required=True,
                        help="output image path (format from extension)")
    parser.add_argument("--dpi", type=int, default=100)
    parser.add_argument("--size", type=_parse_size, default=(8.0, 5.0),
                        metavar="WxH", help="figure size in inches, e.g. 8x5")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.dpi < 1:
        print("error: --dpi must be a positive integer", file=sys.stderr)
        return 2
    try:
        tables = [read_table(path) for path in args.inputs]
        render_family(args.family, tables, out_path=args.out, size=args.size,
                      dpi=args.dpi, title=args.title)
    except SchemaMismatch as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: cannot write {args.out}: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
