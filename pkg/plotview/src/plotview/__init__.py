"""Stacked-bar charts for miniapp benchmark CSV summaries."""

from .cli import (DataError, load_summary, main, medians_from_raw,
                  render_stacked_bars)

__version__ = "0.1.0"
