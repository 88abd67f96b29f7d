"""Gaussian-mixture models of epidemic case curves."""

from .model import CaseSeries, Component, FitError, InsufficientStructureError, Mixture, NoiseBound

__all__ = ["CaseSeries", "Component", "FitError", "InsufficientStructureError", "Mixture", "NoiseBound"]
__version__ = "0.1.0"
