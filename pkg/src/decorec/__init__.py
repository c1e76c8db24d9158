"""Decoherence by a scattering environment: master equations, histories and records."""

__version__ = "0.1.0"
