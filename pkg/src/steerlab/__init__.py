"""Simulation and verification toolkit for one-way EPR steering."""

__version__ = "0.1.0"
