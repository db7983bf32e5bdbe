"""Command line: render a results directory into figures."""

from __future__ import annotations

import argparse
import sys

from .render import RenderError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="stpmarket-plots",
        description="Render experiment result CSVs into the committed figure set.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render all figures for the scenarios present")
    p.add_argument("results_dir")
    p.add_argument("out_dir")
    args = parser.parse_args(argv)
    try:
        written = render(args.results_dir, args.out_dir)
    except RenderError as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
