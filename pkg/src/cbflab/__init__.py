"""Desk-scale lab for observation-conditioned residual neural CBF safety filtering."""

__version__ = "0.1.0"
