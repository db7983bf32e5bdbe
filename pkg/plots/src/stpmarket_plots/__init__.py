"""Figure rendering for market-engine experiment CSVs."""

from .figspec import FIGURES, FigureSpec, figures_for
from .render import FigureData, RenderError, build_figure, load_figure_data, render

__version__ = "0.1.0"
