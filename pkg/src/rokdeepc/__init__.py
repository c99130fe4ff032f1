"""Robust kernel-based data-enabled predictive control for nonlinear systems."""

__version__ = "0.1.0"
