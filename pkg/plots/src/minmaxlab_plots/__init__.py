"""Rendering of minmaxlab trajectory CSVs and spectrum reports into
publication-style figures."""

__version__ = "0.1.0"

from .figspec import FigureSpec, SeriesEntry, load_figure_spec
from .render import render_curves, render_spectrum

__all__ = [
    "FigureSpec",
    "SeriesEntry",
    "load_figure_spec",
    "render_curves",
    "render_spectrum",
    "__version__",
]
