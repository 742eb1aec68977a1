"""Simulation and analysis of a tunable family of three-photon W-class states."""

__version__ = "0.1.0"
