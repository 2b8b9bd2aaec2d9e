"""Batch figure rendering for fiberrc CSV outputs.

This package only reads CSV files produced by the experiment harness; it
never recomputes physics.  Rendering is deterministic: identical CSV input
and spec produce byte-identical image files.
"""

from fiberrc_plots.render import PlotSpec, build_figure, render

__version__ = "0.1.0"

__all__ = ["PlotSpec", "build_figure", "render", "__version__"]
