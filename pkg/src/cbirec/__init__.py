"""Consistence-based diffusion recommenders and an offline evaluation harness."""

__version__ = "0.1.0"
