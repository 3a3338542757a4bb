"""Figure rendering for dgvi experiment exports.

Reads only the documented artifact formats (grid/metrics/feature-stats CSV
and particles JSON); no dependency on the producing package.
"""

from dgvi_plots.render import KINDS, PlotJob, render

__all__ = ["PlotJob", "render", "KINDS"]
