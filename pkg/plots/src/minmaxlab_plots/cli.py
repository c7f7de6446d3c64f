"""Command line figure rendering.

    plot curves --spec figure.yaml [--out override.png]
    plot spectrum --json report.json --out spectrum.png

Exit codes: 0 on success, 2 for missing inputs, 3 for schema violations,
4 for empty series; the diagnostic goes to stderr.
"""

from __future__ import annotations

import argparse
import sys

from .figspec import (
    EmptySeriesError,
    MissingFileError,
    PlotInputError,
    SchemaError,
    load_figure_spec,
)
from .render import render_curves, render_spectrum


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plot", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("curves", help="render distance-vs-passes curves")
    sp.add_argument("--spec", required=True, help="YAML figure spec")
    sp.add_argument("--out", default=None, help="override the output path")
    sp.set_defaults(func=_cmd_curves)

    sp = sub.add_parser("spectrum", help="render an eigenvalue scatter")
    sp.add_argument("--json", required=True, dest="json_path",
                    help="spectrum report JSON")
    sp.add_argument("--out", required=True, help="output image path")
    sp.add_argument("--title", default=None)
    sp.set_defaults(func=_cmd_spectrum)
    return p


def _cmd_curves(args) -> int:
    spec = load_figure_spec(args.spec)
    summary = render_curves(spec, output=args.out)
    out = args.out or spec.output
    print(f"wrote {out}: " + ", ".join(
        f"{label} (x{info['runs']}, final {info['final']:.3g})"
        for label, info in summary.items()
    ))
    return 0


def _cmd_spectrum(args) -> int:
    result = render_spectrum(args.json_path, args.out, title=args.title)
    print(f"wrote {args.out}: {len(result['points'])} eigenvalues, "
          f"radius {result['spectral_radius']:.6g} ({result['verdict']})")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MissingFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"error: schema violation: {exc}", file=sys.stderr)
        return 3
    except EmptySeriesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
