"""Hausdorff dimension of level sets and multiple times of Lévy processes."""

__version__ = "0.1.0"
