"""`render` command line tool.

Either render a JSON figure spec:

    render --spec figure.json

or use a per-panel subcommand:

    render gap-vs-eta --inputs runs/gap/gap_*.json --out figs/gap_vs_eta

Exit codes: 0 success, 1 schema/manifest rejection or render failure.
"""

from __future__ import annotations

import argparse
import sys

from .panels import PANELS
from .render import FigureSpec, render
from .schemas import ManifestMismatchError, SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="render",
                                     description="Render simulation artifacts "
                                                 "to SVG and PNG figures")
    parser.add_argument("--spec", help="JSON figure spec file")
    sub = parser.add_subparsers(dest="panel_command")
    for name in sorted(PANELS):
        p = sub.add_parser(name.replace("_", "-"), help=f"{name} panel")
        p.add_argument("--inputs", nargs="+", required=True,
                       help="artifact files to read")
        p.add_argument("--out", required=True,
                       help="output image path (without extension)")
        p.add_argument("--xscale", choices=("linear", "log"))
        p.add_argument("--yscale", choices=("linear", "log"))
        p.add_argument("--title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.spec:
            spec = FigureSpec.from_json(args.spec)
        elif args.panel_command:
            scales = {}
            if args.xscale:
                scales["x"] = args.xscale
            if args.yscale:
                scales["y"] = args.yscale
            spec = FigureSpec(panel=args.panel_command.replace("-", "_"),
                              inputs=args.inputs, output=args.out,
                              scales=scales, title=args.title)
        else:
            print("nothing to do: pass --spec or a panel subcommand",
                  file=sys.stderr)
            return 1
        written = render(spec)
    except (SchemaError, ManifestMismatchError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print("wrote " + ", ".join(written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
