"""Figure rendering for central-spin autocorrelation runs.

Reads the batch CLI's CSV output (comment-line metadata plus a
``t,S_real,S_imag,norm_drift[,stderr]`` table) and renders static
comparison figures: multi-engine overlays, zooms on the correlation dip,
and finite-field curves with their Gaussian envelope.
"""

from .csvdata import CsvError, RunData, load_run
from .render import PlotJob, main, render

__all__ = ["CsvError", "PlotJob", "RunData", "load_run", "main", "render"]

__version__ = "0.1.0"
