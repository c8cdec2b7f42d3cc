"""Exact Cantor-type constructions and desk-scale dimension checks for fibers and graphs of continuous maps."""

__version__ = "0.1.0"
