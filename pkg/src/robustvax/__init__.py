"""Robust multi-vaccine reverse supply chain: model builder, robust
counterpart compiler, solvers and experiment harness."""

__version__ = "0.1.0"
