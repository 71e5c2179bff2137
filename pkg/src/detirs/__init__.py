"""Exact bounds on determinant-IRS values of synchronous non-local games."""

__version__ = "0.1.0"
