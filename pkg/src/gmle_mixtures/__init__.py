"""Generalized maximum likelihood for normal location-scale mixtures."""

__version__ = "0.1.0"
