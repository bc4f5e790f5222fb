"""Hybrid discontinuous Galerkin / finite-volume solver for 2D conservation laws."""

__version__ = "0.1.0"
