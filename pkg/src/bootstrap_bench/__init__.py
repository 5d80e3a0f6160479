"""Benchmark of bootstrap data-gathering strategies for learned dynamics models."""
__version__ = "0.1.0"
