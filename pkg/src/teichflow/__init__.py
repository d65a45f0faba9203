"""Coupled harmonic-map / Teichmüller flow on the flat two-torus."""

from .metric import Grid, MetricField, TeichParams, build_grid

__all__ = ["Grid", "MetricField", "TeichParams", "build_grid"]
__version__ = "0.1.0"
