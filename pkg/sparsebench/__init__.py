"""Sparse linear regression benchmark: classical and Bayesian estimators on a shared grid."""

__version__ = "0.1.0"
