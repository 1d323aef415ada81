"""Exact symbolic engine for the model-operator expansion of Bergman kernel coefficients."""

__version__ = "0.1.0"
