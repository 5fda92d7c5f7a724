"""Cluster-based POD reduced-order models with a naive Bayes pre-classifier."""

__version__ = "0.1.0"
