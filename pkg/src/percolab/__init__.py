"""Percolation, cellular automata and stability experiments on finitely generated groups."""

__version__ = "0.1.0"
