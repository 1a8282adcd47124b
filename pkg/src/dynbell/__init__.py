"""Exact laboratory for dynamical local hidden-variable models on finite spaces."""

__version__ = "0.1.0"
