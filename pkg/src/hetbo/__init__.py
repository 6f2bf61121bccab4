"""Bayesian optimization of scheduling configurations on heterogeneous multi-core processors."""

__version__ = "0.1.0"
