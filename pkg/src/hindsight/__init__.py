"""Simulation and moment-inequality inference for large Bayesian games."""

__version__ = "0.1.0"
