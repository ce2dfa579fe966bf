"""Warping-model estimation and goodness-of-fit tests based on the Wasserstein variation."""

__version__ = "0.1.0"
