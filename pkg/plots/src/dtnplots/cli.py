"""Command-line figure generation from aggregated metric tables."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import (
    METRICS,
    FigureError,
    FigureSpec,
    X_LABELS,
    render,
    render_all,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dtnplots",
        description="Render metric figures from dtnsim aggregate CSV tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    one = sub.add_parser("figure", help="render a single chart")
    one.add_argument("--table", required=True, help="aggregate CSV table")
    one.add_argument("--metric", required=True, choices=sorted(METRICS))
    one.add_argument("--x-axis", required=True, choices=sorted(X_LABELS))
    one.add_argument("--protocols", required=True,
                     help="comma-separated protocol names (series order)")
    one.add_argument("--output", required=True, help="output image path")
    one.add_argument("--title", default=None)

    batch = sub.add_parser("all", help="render the full figure family")
    batch.add_argument("--input-dir", required=True,
                       help="directory with aggregate_<axis>.csv tables")
    batch.add_argument("--output-dir", required=True)
    batch.add_argument("--protocols", default=None,
                       help="comma list (default: every protocol in each table)")
    batch.add_argument("--hop-exclude", default="snw",
                       help="protocols to omit from hop-count charts "
                       "(default snw; pass '' to keep all)")
    batch.add_argument("--stability-metric", default="overhead_ratio",
                       choices=sorted(METRICS))

    args = parser.parse_args(argv)
    try:
        if args.command == "figure":
            spec = FigureSpec(
                metric=args.metric,
                x_axis=args.x_axis,
                protocols=[p for p in args.protocols.split(",") if p],
                table=Path(args.table),
                output=Path(args.output),
                title=args.title,
            )
            out = render(spec)
            print(out)
        else:
            outputs = render_all(
                Path(args.input_dir),
                Path(args.output_dir),
                protocols=args.protocols.split(",") if args.protocols else None,
                hop_exclude=[p for p in args.hop_exclude.split(",") if p],
                stability_metric=args.stability_metric,
            )
            for out in outputs:
                print(out)
    except (FigureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
