"""Unfitted C1 finite element solver for linearized membrane bending with
penalized particle couplings."""

__version__ = "0.1.0"
