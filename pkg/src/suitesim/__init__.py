"""Benchmark-suite similarity from cluster coverage, and cross-suite model error."""

__version__ = "0.1.0"
