"""Simulation and equilibrium toolkit for validator selection games."""

__version__ = "0.1.0"
