"""Figure generation for dtnsim aggregated metric tables."""

from .figures import FigureSpec, render, render_all

__all__ = ["FigureSpec", "render", "render_all"]
