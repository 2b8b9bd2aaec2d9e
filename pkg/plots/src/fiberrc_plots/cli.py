"""`plot <kind> --in <csv> --out <png/svg>` command."""

from __future__ import annotations

import argparse
import json
import sys

from fiberrc_plots.render import PLOT_KINDS, PlotSpec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="plot",
                                     description="render fiberrc CSV outputs")
    parser.add_argument("kind", choices=PLOT_KINDS)
    parser.add_argument("--in", dest="csv_path", required=True,
                        help="input CSV path")
    parser.add_argument("--out", dest="out_path", required=True,
                        help="output image path (.png or .svg)")
    parser.add_argument("--x", default=None, help="x-axis column override")
    parser.add_argument("--y", default="ber", help="value column")
    parser.add_argument("--series", default="mode", help="series column")
    parser.add_argument("--linear-y", action="store_true",
                        help="disable the log BER axis")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    spec = PlotSpec(csv_path=args.csv_path, kind=args.kind,
                    out_path=args.out_path, x=args.x, y=args.y,
                    series=args.series, log_y=not args.linear_y,
                    title=args.title)
    try:
        meta = render(spec)
    except (ValueError, OSError) as exc:
        print(f"plot: {exc}", file=sys.stderr)
        return 1
    printable = {k: v for k, v in meta.items() if not isinstance(v, dict)}
    print(json.dumps({"out": args.out_path, **printable}))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
