"""Wasserstein convergence of empirical measures for subordinated diffusions on flat tori."""

__version__ = "0.1.0"
