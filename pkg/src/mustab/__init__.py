"""mustab: curvature fields, variations and mu-stability of immersed discs."""

__version__ = "0.1.0"
