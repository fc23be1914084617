"""Cross-fitted projection tests for high-dimensional two-sample means."""

__version__ = "0.1.0"
