"""Command line: report <kind> --coords F --labels F --variances F --out F."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="report",
        description="Render figures from embedding CLI artifacts.")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--coords", help="coordinates TSV (id, x, y[, uncertainty])")
    parser.add_argument("--labels", help="node label file for point coloring")
    parser.add_argument("--variances", help="variance CSV (epoch,dim,mean_sigma)")
    parser.add_argument("--ellipse-scale", type=float, default=1.0)
    parser.add_argument("--out", required=True, help="output image file")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, out_path=args.out,
                          coords_path=args.coords, labels_path=args.labels,
                          variances_path=args.variances,
                          ellipse_scale=args.ellipse_scale)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        info = render(spec)
    except (SchemaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: points={info.points} ellipses={info.ellipses} "
          f"curves={info.curves}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
