"""Pseudolikelihood estimation of the inverse temperature in quadratic spin models."""
__version__ = "0.1.0"
