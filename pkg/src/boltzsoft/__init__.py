"""Cutoff soft-potential Boltzmann solver near a global Maxwellian, with verification diagnostics."""

__version__ = "0.1.0"
