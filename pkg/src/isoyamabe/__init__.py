"""Radial reductions of Yamabe-type problems on manifolds with isoparametric functions."""

__version__ = "0.1.0"
