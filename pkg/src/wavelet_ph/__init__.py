"""Optimisable spectral-wavelet extended persistence for graph classification."""

__version__ = "0.1.0"
