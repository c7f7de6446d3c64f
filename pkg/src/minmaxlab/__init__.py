"""Lookahead-minmax and baseline game optimizers on analytic saddle-point
testbeds, plus spectral analysis of their update operators and a seeded,
reproducible experiment harness."""

__version__ = "0.1.0"

from . import lookahead, optimizers, problems, spectral

__all__ = ["problems", "optimizers", "lookahead", "spectral", "__version__"]
