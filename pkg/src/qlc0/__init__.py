"""Simulation toolkit for low-degree approximation, learning and testing of shallow CZ circuits."""

__version__ = "0.1.0"
