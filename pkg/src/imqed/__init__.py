"""Effective Lindblad models of (nonreciprocal) superconducting circuits from
their multiport immittance responses."""

from .immittance import Kind, Pole, PoleResidueResponse, evaluate, split

__all__ = ["Kind", "Pole", "PoleResidueResponse", "evaluate", "split"]
__version__ = "0.1.0"
